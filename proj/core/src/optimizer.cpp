#include "defgrid/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "defgrid/parallel.hpp"

namespace defgrid {

OptimizationState OptimizationState::init(const GridSequence& grids, std::size_t vertex_count,
                                          int max_epochs) {
    OptimizationState st;
    st.grid_moments.resize(grids.grids.size());
    for (std::size_t g = 0; g < grids.grids.size(); ++g) {
        st.grid_moments[g].resize(grids.grids[g].levels.size());
        for (std::size_t l = 0; l < grids.grids[g].levels.size(); ++l) {
            st.grid_moments[g][l].init(
                static_cast<std::size_t>(grids.grids[g].levels[l].active_count()) * 6);
        }
    }
    st.mesh_moments.init(vertex_count * 3);
    st.confidence = ConfidenceState{0, max_epochs};
    return st;
}

PreconditionerSet build_preconditioners(const GridSequence& grids, const TriMesh& topology,
                                        const OptimSchedule& schedule) {
    PreconditionerSet set;
    if (schedule.precondition) {
        set.grid_ops.resize(grids.grids.size());
        for (std::size_t g = 0; g < grids.grids.size(); ++g) {
            for (const GridLevel& level : grids.grids[g].levels) {
                set.grid_ops[g].push_back(std::make_unique<LaplacianOperator>(
                    build_grid_laplacian(level, schedule.level_lambda(level.level))));
            }
        }
    }
    set.mesh_op = std::make_unique<LaplacianOperator>(
        build_mesh_laplacian(topology, schedule.mesh_lambda));
    return set;
}

namespace {

/// Adam on a flat buffer; returns the unscaled step (m_hat / (sqrt(v_hat) + eps)).
void adam_update(AdamMoments& mom, const double* grad, double* step_out, std::size_t n,
                 const OptimSchedule& s, int step_count) {
    const double bc1 = 1.0 - std::pow(s.beta1, step_count);
    const double bc2 = 1.0 - std::pow(s.beta2, step_count);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        mom.m[i] = s.beta1 * mom.m[i] + (1.0 - s.beta1) * g;
        mom.v[i] = s.beta2 * mom.v[i] + (1.0 - s.beta2) * g * g;
        const double m_hat = mom.m[i] / bc1;
        const double v_hat = mom.v[i] / bc2;
        step_out[i] = m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

void step_grid_level(GridLevel& level, AdamMoments& mom,
                     const std::vector<Transform6>& grads, const LaplacianOperator* op,
                     const OptimSchedule& schedule, int step_count) {
    const int n = level.active_count();
    if (n == 0) return;
    if (static_cast<std::size_t>(n) != grads.size()) {
        throw InputError("gradient shape does not match grid level topology");
    }
    if (op && op->node_count() != n) {
        throw InputError("preconditioner does not match grid level topology");
    }

    Eigen::MatrixXd g(n, 6);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 6; ++c) g(i, c) = grads[static_cast<std::size_t>(i)].channel(c);
    }

    double lr = schedule.level_lr(level.level);
    if (!schedule.precondition) lr *= schedule.no_precondition_lr_scale;

    Eigen::MatrixXd pre = g;
    if (op && !schedule.precondition_after_adam) pre = op->smooth(g);

    Eigen::MatrixXd step(n, 6);
    adam_update(mom, pre.data(), step.data(), static_cast<std::size_t>(n) * 6, schedule,
                step_count);

    if (op && schedule.precondition_after_adam) step = op->smooth(step);

    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 6; ++c) {
            level.params[static_cast<std::size_t>(i)].channel(c) -= lr * step(i, c);
        }
    }
}

}  // namespace

void apply_step(OptimizationState& state, GridSequence& grids, std::vector<Vec3>& verts,
                const GradientBundle& grads, const PreconditionerSet& precond,
                const OptimSchedule& schedule, int threads) {
    if (grads.grids.size() != grids.grids.size() || grads.vertices.size() != verts.size()) {
        throw InputError("gradient bundle does not match parameter shapes");
    }
    grads.check_finite();
    state.step_count += 1;
    const int step_count = state.step_count;

    parallel_for(grids.grids.size(), threads, [&](std::size_t g) {
        auto& grid = grids.grids[g];
        for (std::size_t l = 0; l < grid.levels.size(); ++l) {
            const LaplacianOperator* op =
                schedule.precondition ? precond.grid_ops[g][l].get() : nullptr;
            step_grid_level(grid.levels[l], state.grid_moments[g][l], grads.grids[g][l], op,
                            schedule, step_count);
        }
    });

    const int nv = static_cast<int>(verts.size());
    if (precond.mesh_op && precond.mesh_op->node_count() != nv) {
        throw InputError("mesh preconditioner does not match vertex count");
    }
    Eigen::MatrixXd g(nv, 3);
    for (int i = 0; i < nv; ++i) g.row(i) = grads.vertices[static_cast<std::size_t>(i)].transpose();
    Eigen::MatrixXd pre = g;
    if (precond.mesh_op && !schedule.precondition_after_adam) pre = precond.mesh_op->smooth(g);
    Eigen::MatrixXd step(nv, 3);
    adam_update(state.mesh_moments, pre.data(), step.data(), static_cast<std::size_t>(nv) * 3,
                schedule, step_count);
    if (precond.mesh_op && schedule.precondition_after_adam) step = precond.mesh_op->smooth(step);
    for (int i = 0; i < nv; ++i) {
        verts[static_cast<std::size_t>(i)] -= schedule.mesh_lr * step.row(i).transpose();
    }
}

RunResult run_optimization(const PointCloudSequence& seq, const TriMesh& mesh0,
                           GridSequence grids, const OptimSchedule& schedule,
                           const EvalOptions& eval_opts, int log_interval) {
    if (log_interval < 1) log_interval = 1;
    SequenceEvaluator evaluator(seq, mesh0, eval_opts);
    std::vector<Vec3> verts = mesh0.vertices;
    OptimizationState state = OptimizationState::init(grids, verts.size(), schedule.max_epochs);
    PreconditionerSet precond = build_preconditioners(grids, mesh0, schedule);

    RunResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    GridSequence best_grids = grids;
    std::vector<Vec3> best_verts = verts;

    const auto start = std::chrono::steady_clock::now();
    for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
        state.confidence.epoch = epoch;
        const ForwardEval& fe = evaluator.evaluate(grids, verts, state.confidence);
        const double total = fe.breakdown.total;
        if (!std::isfinite(total)) {
            throw NumericError("total loss became non-finite at epoch " + std::to_string(epoch));
        }
        if (total < result.best_loss) {
            result.best_loss = total;
            result.best_epoch = epoch;
            best_grids = grids;
            best_verts = verts;
        }
        if (epoch % log_interval == 0 || epoch + 1 == schedule.max_epochs) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            result.history.push_back({epoch, fe.breakdown, elapsed});
        }

        GradientBundle grads = backward_pass(evaluator);
        apply_step(state, grids, verts, grads, precond, schedule, eval_opts.threads);
    }

    result.vertices = std::move(best_verts);
    result.grids = std::move(best_grids);
    return result;
}

}  // namespace defgrid
