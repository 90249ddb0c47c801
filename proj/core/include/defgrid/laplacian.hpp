#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "defgrid/geometry.hpp"
#include "defgrid/grid.hpp"

namespace defgrid {

/// Combinatorial graph Laplacian L = D - A with a cached factorization of
/// (I + lambda L). smooth() applies (I + lambda L)^{-2} per column via two
/// successive solves. Immutable after construction; concurrent smooth calls
/// on one operator are safe.
class LaplacianOperator {
public:
    LaplacianOperator(int node_count, std::span<const std::pair<int, int>> edges, double lambda);

    int node_count() const { return n_; }
    double lambda() const { return lambda_; }
    const Eigen::SparseMatrix<double>& laplacian() const { return lap_; }

    Eigen::MatrixXd smooth(const Eigen::MatrixXd& g) const;

    /// Total factorizations performed process-wide; lets tests assert reuse.
    static std::int64_t factorization_count();

private:
    int n_;
    double lambda_;
    Eigen::SparseMatrix<double> lap_;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
};

/// Nodes are the level's active lattice vertices; edges join axis-adjacent
/// active pairs.
LaplacianOperator build_grid_laplacian(const GridLevel& level, double lambda);

/// Nodes are mesh vertices; adjacency is the mesh edge set, uniform weights.
LaplacianOperator build_mesh_laplacian(const TriMesh& mesh, double lambda);

}  // namespace defgrid
