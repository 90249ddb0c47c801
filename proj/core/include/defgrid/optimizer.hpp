#pragma once

#include <memory>
#include <vector>

#include "defgrid/gradients.hpp"
#include "defgrid/laplacian.hpp"
#include "defgrid/objective.hpp"

namespace defgrid {

struct OptimSchedule {
    double grid_lr = 5e-3;
    double grid_lr_growth = 1.10;
    double grid_lambda = 0.25;
    double grid_lambda_growth = 1.50;
    double mesh_lr = 1e-4;
    double mesh_lambda = 16.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_epochs = 2000;

    bool precondition = true;
    bool precondition_after_adam = false;
    /// Grid learning-rate factor applied when preconditioning is disabled.
    double no_precondition_lr_scale = 0.1;

    double level_lr(int level) const { return grid_lr * std::pow(grid_lr_growth, level - 1); }
    double level_lambda(int level) const {
        return grid_lambda * std::pow(grid_lambda_growth, level - 1);
    }
};

struct AdamMoments {
    std::vector<double> m, v;
    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

struct OptimizationState {
    int step_count = 0;
    std::vector<std::vector<AdamMoments>> grid_moments;  // [grid][level]
    AdamMoments mesh_moments;
    ConfidenceState confidence;

    static OptimizationState init(const GridSequence& grids, std::size_t vertex_count,
                                  int max_epochs);
};

/// Per-level smoothing operators; grid entries absent when grid
/// preconditioning is disabled (mesh smoothing is always built).
struct PreconditionerSet {
    std::vector<std::vector<std::unique_ptr<LaplacianOperator>>> grid_ops;  // [grid][level]
    std::unique_ptr<LaplacianOperator> mesh_op;
};

PreconditionerSet build_preconditioners(const GridSequence& grids, const TriMesh& topology,
                                        const OptimSchedule& schedule);

/// One update: per level the gradient is smoothed by (I + lambda_l L)^{-2},
/// fed through Adam, and applied with the level's learning rate; mesh vertices
/// likewise with the mesh Laplacian. The caller advances the epoch counter.
void apply_step(OptimizationState& state, GridSequence& grids, std::vector<Vec3>& verts,
                const GradientBundle& grads, const PreconditionerSet& precond,
                const OptimSchedule& schedule, int threads = 1);

struct LossRecord {
    int epoch = 0;
    LossBreakdown breakdown;
    double wall_time_s = 0.0;
};

struct RunResult {
    std::vector<Vec3> vertices;
    GridSequence grids;
    std::vector<LossRecord> history;
    int best_epoch = 0;
    double best_loss = 0.0;
};

/// Joint optimization of the template vertices and all transition grids for
/// schedule.max_epochs epochs; returns the best-loss snapshot.
RunResult run_optimization(const PointCloudSequence& seq, const TriMesh& mesh0,
                           GridSequence grids, const OptimSchedule& schedule,
                           const EvalOptions& eval_opts, int log_interval = 10);

}  // namespace defgrid
