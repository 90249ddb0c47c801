#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "defgrid/objective.hpp"

namespace defgrid {

/// Gradients of the total loss, shaped exactly like the parameters.
struct GradientBundle {
    std::vector<std::vector<std::vector<Transform6>>> grids;  // [grid][level][slot]
    std::vector<Vec3> vertices;

    static GradientBundle zeros_like(const GridSequence& gs, std::size_t vertex_count);

    /// Throws NumericError naming the grid and level on any non-finite entry.
    void check_finite() const;
};

/// Exact reverse-mode gradients of the objective evaluated by the last
/// SequenceEvaluator::evaluate() call. Robust weights, NN pairings, cd_max,
/// and confidence weights are constants of the differentiated function.
GradientBundle backward_pass(const SequenceEvaluator& ev);

/// Backprop of one transition step y = R(z(x)) x + t(x) at a single point.
/// Scatters parameter gradients into grid_grads ([level][slot]) and returns
/// the input-position adjoint when requested (nullopt otherwise).
std::optional<Vec3> backward_grid_step(const DeformationGrid& grid, const Vec3& x,
                                       const Vec3& ybar,
                                       std::vector<std::vector<Transform6>>& grid_grads,
                                       bool need_input_adjoint);

struct FdInstanceSpec {
    int levels = 2;
    int frames = 3;          // frame count (T + 1)
    int points_per_frame = 50;
    int vertex_count = 20;
    int keyframe = 0;
    double param_range = 0.5;
    std::uint64_t seed = 7;
};

/// Self-contained randomized instance for gradient verification.
struct FdInstance {
    PointCloudSequence seq;
    TriMesh mesh;
    GridSequence grids;
    ConfidenceState conf;
    EvalOptions opts;
};

FdInstance make_fd_instance(const FdInstanceSpec& spec);

/// Entry corrupted before comparison (test hook); grid < 0 targets a vertex.
struct FdCorruption {
    int grid = -1;
    int level = 0;
    int slot = 0;
    int channel = 0;  // 0..5 for grids (z then t), 0..2 for vertices
    int vertex = -1;
};

struct FdFailure {
    std::string entry;
    double analytic = 0.0;
    double numeric = 0.0;
    double error = 0.0;
};

struct FdReport {
    bool pass = false;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    std::vector<FdFailure> failures;
};

/// Central finite differences of the frozen objective against backward_pass,
/// step 1e-5 scaled by max(1, |theta|) per parameter.
FdReport finite_difference_check(const FdInstanceSpec& spec, double rel_tol = 1e-4,
                                 double abs_floor = 1e-7,
                                 const FdCorruption* corrupt = nullptr);

/// Max relative error of the analytic Jacobian of (z, x) -> R(z) x against
/// central finite differences over random draws.
double cayley_jacobian_max_rel_error(std::uint64_t seed, int trials);

}  // namespace defgrid
