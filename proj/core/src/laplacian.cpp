#include "defgrid/laplacian.hpp"

#include <atomic>
#include <vector>

namespace defgrid {

namespace {
std::atomic<std::int64_t> g_factorizations{0};
}

LaplacianOperator::LaplacianOperator(int node_count,
                                     std::span<const std::pair<int, int>> edges, double lambda)
    : n_(node_count), lambda_(lambda) {
    if (node_count < 1) throw InputError("Laplacian needs at least one node");
    if (!(lambda > 0.0)) throw InputError("smoothing strength must be positive");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(edges.size() * 4 + static_cast<std::size_t>(n_));
    std::vector<double> degree(static_cast<std::size_t>(n_), 0.0);
    for (const auto& [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n_ || b >= n_ || a == b) {
            throw InputError("bad Laplacian edge");
        }
        trip.emplace_back(a, b, -1.0);
        trip.emplace_back(b, a, -1.0);
        degree[static_cast<std::size_t>(a)] += 1.0;
        degree[static_cast<std::size_t>(b)] += 1.0;
    }
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, degree[static_cast<std::size_t>(i)]);
    lap_.resize(n_, n_);
    lap_.setFromTriplets(trip.begin(), trip.end());

    Eigen::SparseMatrix<double> shifted(n_, n_);
    shifted.setIdentity();
    shifted += lambda_ * lap_;
    solver_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    solver_->compute(shifted);
    if (solver_->info() != Eigen::Success) {
        throw NumericError("factorization of (I + lambda L) failed");
    }
    g_factorizations.fetch_add(1, std::memory_order_relaxed);
}

Eigen::MatrixXd LaplacianOperator::smooth(const Eigen::MatrixXd& g) const {
    if (g.rows() != n_) {
        throw InputError("gradient has " + std::to_string(g.rows()) + " rows, operator has " +
                         std::to_string(n_) + " nodes");
    }
    const Eigen::MatrixXd once = solver_->solve(g);
    return solver_->solve(once);
}

std::int64_t LaplacianOperator::factorization_count() {
    return g_factorizations.load(std::memory_order_relaxed);
}

LaplacianOperator build_grid_laplacian(const GridLevel& level, double lambda) {
    std::vector<std::pair<int, int>> edges;
    const int r = level.resolution;
    for (std::size_t s = 0; s < level.coords.size(); ++s) {
        const Vec3i& c = level.coords[s];
        for (int axis = 0; axis < 3; ++axis) {
            Vec3i nb = c;
            nb[axis] += 1;
            if (nb[axis] >= r) continue;
            const std::int32_t other = level.slot_at(nb.x(), nb.y(), nb.z());
            if (other >= 0) edges.emplace_back(static_cast<int>(s), other);
        }
    }
    return LaplacianOperator(level.active_count(), edges, lambda);
}

LaplacianOperator build_mesh_laplacian(const TriMesh& mesh, double lambda) {
    return LaplacianOperator(static_cast<int>(mesh.vertex_count()), mesh.edges, lambda);
}

}  // namespace defgrid
