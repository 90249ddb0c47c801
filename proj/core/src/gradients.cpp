#include "defgrid/gradients.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "defgrid/parallel.hpp"
#include "defgrid/rng.hpp"

namespace defgrid {

GradientBundle GradientBundle::zeros_like(const GridSequence& gs, std::size_t vertex_count) {
    GradientBundle b;
    b.grids.resize(gs.grids.size());
    for (std::size_t g = 0; g < gs.grids.size(); ++g) {
        b.grids[g].resize(gs.grids[g].levels.size());
        for (std::size_t l = 0; l < gs.grids[g].levels.size(); ++l) {
            b.grids[g][l].assign(gs.grids[g].levels[l].params.size(), Transform6{});
        }
    }
    b.vertices.assign(vertex_count, Vec3::Zero());
    return b;
}

void GradientBundle::check_finite() const {
    for (std::size_t g = 0; g < grids.size(); ++g) {
        for (std::size_t l = 0; l < grids[g].size(); ++l) {
            for (const Transform6& tf : grids[g][l]) {
                if (!tf.z.allFinite() || !tf.t.allFinite()) {
                    throw NumericError("non-finite gradient in grid " + std::to_string(g) +
                                       ", level " + std::to_string(l + 1));
                }
            }
        }
    }
    for (const Vec3& v : vertices) {
        if (!v.allFinite()) throw NumericError("non-finite gradient on template vertices");
    }
}

std::optional<Vec3> backward_grid_step(const DeformationGrid& grid, const Vec3& x,
                                       const Vec3& ybar,
                                       std::vector<std::vector<Transform6>>& grid_grads,
                                       bool need_input_adjoint) {
    const Vec3 xc = clamp_to_domain(x);
    const double inv_level_count = 1.0 / static_cast<double>(grid.levels.size());
    constexpr std::size_t kMaxLevels = 16;
    if (grid.levels.size() > kMaxLevels) throw InputError("more than 16 grid levels");

    // Recompute the aggregated transform; stencils are reused for the scatter.
    Transform6 agg;
    std::array<LevelStencil, kMaxLevels> stencils;
    for (std::size_t l = 0; l < grid.levels.size(); ++l) {
        stencils[l] = make_stencil(grid.levels[l], xc);
        const auto& st = stencils[l];
        for (int c = 0; c < st.count; ++c) {
            if (st.slots[c] < 0) continue;
            agg += st.weights[c] * grid.levels[l].params[static_cast<std::size_t>(st.slots[c])];
        }
    }
    agg *= inv_level_count;

    const RotationPullback pb(agg.z);
    Vec3 zbar, xbar_rot;
    pb.pull_back(x, ybar, zbar, xbar_rot);
    const Transform6 tbar(zbar, ybar);

    Vec3 xcbar = Vec3::Zero();
    for (std::size_t l = 0; l < grid.levels.size(); ++l) {
        const auto& st = stencils[l];
        const auto& params = grid.levels[l].params;
        auto& grads = grid_grads[l];
        for (int c = 0; c < st.count; ++c) {
            const std::int32_t s = st.slots[c];
            if (s < 0) continue;
            grads[static_cast<std::size_t>(s)] += (inv_level_count * st.weights[c]) * tbar;
            if (need_input_adjoint) {
                const double coupling = params[static_cast<std::size_t>(s)].dot(tbar);
                xcbar += (inv_level_count * coupling) * st.weight_grads[c];
            }
        }
    }

    if (!need_input_adjoint) return std::nullopt;
    Vec3 xbar = xbar_rot;
    for (int a = 0; a < 3; ++a) {
        // Clamp passes the derivative through inside the domain (boundary included).
        if (x[a] >= -1.0 && x[a] <= 1.0) xbar[a] += xcbar[a];
    }
    return xbar;
}

namespace {

/// Position adjoints of one robust Chamfer term with frozen pairings and
/// weights. `coef` multiplies the whole term.
void chamfer_adjoint(const ChamferCache& cache, std::span<const Vec3> moving,
                     std::span<const Vec3> fixed, double coef, std::vector<Vec3>& moving_adj) {
    const double inv_m = coef * 2.0 / static_cast<double>(moving.size());
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const Vec3 d = moving[i] - fixed[static_cast<std::size_t>(cache.nn_in_fixed[i])];
        moving_adj[i] += (inv_m * cache.w_moving[i]) * d;
    }
    const double inv_f = coef * 2.0 / static_cast<double>(fixed.size());
    for (std::size_t j = 0; j < fixed.size(); ++j) {
        const std::size_t m = static_cast<std::size_t>(cache.nn_in_moving[j]);
        const Vec3 d = moving[m] - fixed[j];
        moving_adj[m] += (inv_f * cache.w_fixed[j]) * d;
    }
}

}  // namespace

GradientBundle backward_pass(const SequenceEvaluator& ev) {
    const ForwardEval& fe = ev.last();
    const GridSequence& grids = ev.last_grids();
    const TriMesh& topo = ev.topology();
    const PointCloudSequence& seq = ev.sequence();
    const EvalOptions& opts = ev.options();

    const int key = fe.keyframe;
    const int frame_count = fe.frame_count;
    const int n_transitions = frame_count - 1;
    const double inv_n = 1.0 / static_cast<double>(n_transitions);

    GradientBundle bundle = GradientBundle::zeros_like(grids, topo.vertex_count());

    std::vector<std::vector<Vec3>> adj(static_cast<std::size_t>(frame_count));
    for (int t = 0; t < frame_count; ++t) {
        adj[static_cast<std::size_t>(t)].assign(topo.vertex_count(), Vec3::Zero());
    }

    std::vector<int> frames;
    for (int t = 0; t < frame_count; ++t) {
        if (t != key) frames.push_back(t);
    }

    // Per-frame Chamfer adjoints; the transported-cloud term backprops one
    // step straight into its own transition grid.
    parallel_for(frames.size(), opts.threads, [&](std::size_t fi) {
        const int t = frames[static_cast<std::size_t>(fi)];
        const auto& target = seq.frames[static_cast<std::size_t>(t)].points;

        chamfer_adjoint(fe.mesh_term[static_cast<std::size_t>(t)],
                        fe.mesh_pos[static_cast<std::size_t>(t)], target,
                        inv_n * fe.confidence[static_cast<std::size_t>(t)],
                        adj[static_cast<std::size_t>(t)]);

        const auto& transported = fe.transported[static_cast<std::size_t>(t)];
        std::vector<Vec3> cloud_adj(transported.size(), Vec3::Zero());
        chamfer_adjoint(fe.cloud_term[static_cast<std::size_t>(t)], transported, target, inv_n,
                        cloud_adj);

        const int source = grids.frame_toward_keyframe(t);
        const auto& source_cloud = seq.frames[static_cast<std::size_t>(source)].points;
        const int gi = grids.grid_index_for_frame(t);
        const DeformationGrid& g = grids.grids[static_cast<std::size_t>(gi)];
        auto& grid_grads = bundle.grids[static_cast<std::size_t>(gi)];
        for (std::size_t i = 0; i < source_cloud.size(); ++i) {
            backward_grid_step(g, source_cloud[i], cloud_adj[i], grid_grads,
                               /*need_input_adjoint=*/false);
        }
    });

    // Isometry adjoints touch pairs of frames; serial.
    if (opts.use_isometry && opts.isometry_weight != 0.0) {
        const double scale = opts.isometry_weight * inv_n /
                             static_cast<double>(topo.edges.size());
        for (int t : frames) {
            const int prev = grids.frame_toward_keyframe(t);
            const auto& cur = fe.mesh_pos[static_cast<std::size_t>(t)];
            const auto& pre = fe.mesh_pos[static_cast<std::size_t>(prev)];
            auto& cur_adj = adj[static_cast<std::size_t>(t)];
            auto& pre_adj = adj[static_cast<std::size_t>(prev)];
            for (const auto& [i, j] : topo.edges) {
                const Vec3 vc = cur[static_cast<std::size_t>(i)] - cur[static_cast<std::size_t>(j)];
                const Vec3 vp = pre[static_cast<std::size_t>(i)] - pre[static_cast<std::size_t>(j)];
                const double lc = vc.norm();
                const double lp = vp.norm();
                const double diff = lc - lp;
                if (diff == 0.0) continue;  // |.| subgradient 0 at the kink
                const double s = diff > 0.0 ? scale : -scale;
                if (lc > 0.0) {
                    const Vec3 d = (s / lc) * vc;
                    cur_adj[static_cast<std::size_t>(i)] += d;
                    cur_adj[static_cast<std::size_t>(j)] -= d;
                }
                if (lp > 0.0) {
                    const Vec3 d = (s / lp) * vp;
                    pre_adj[static_cast<std::size_t>(i)] -= d;
                    pre_adj[static_cast<std::size_t>(j)] += d;
                }
            }
        }
    }

    // Surface initialization term acts on the template directly.
    chamfer_adjoint(fe.init_term, fe.mesh_pos[static_cast<std::size_t>(key)],
                    seq.frames[static_cast<std::size_t>(key)].points, 1.0,
                    adj[static_cast<std::size_t>(key)]);

    // Backpropagation through time, outward frames first; the two directions
    // are independent except for the final push into the keyframe, which is
    // buffered per direction and merged in fixed order.
    std::vector<Vec3> into_key[2];
    std::vector<int> dirs;
    if (grids.forward_count() > 0) dirs.push_back(+1);
    if (grids.backward_count() > 0) dirs.push_back(-1);
    for (int d = 0; d < 2; ++d) into_key[d].assign(topo.vertex_count(), Vec3::Zero());

    parallel_for(dirs.size(), opts.threads, [&](std::size_t di) {
        const int sign = dirs[di];
        const int outermost = sign > 0 ? frame_count - 1 : 0;
        auto& key_buffer = into_key[sign > 0 ? 0 : 1];
        for (int t = outermost; t != key; t -= sign) {
            const int prev = t - sign;
            const int gi = grids.grid_index_for_frame(t);
            const DeformationGrid& g = grids.grids[static_cast<std::size_t>(gi)];
            auto& grid_grads = bundle.grids[static_cast<std::size_t>(gi)];
            const auto& inputs = fe.mesh_pos[static_cast<std::size_t>(prev)];
            const auto& ybars = adj[static_cast<std::size_t>(t)];
            auto& prev_adj = prev == key ? key_buffer : adj[static_cast<std::size_t>(prev)];
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                const auto xbar = backward_grid_step(g, inputs[i], ybars[i], grid_grads,
                                                     /*need_input_adjoint=*/true);
                prev_adj[i] += *xbar;
            }
        }
    });

    bundle.vertices = adj[static_cast<std::size_t>(key)];
    for (int d = 0; d < 2; ++d) {
        for (std::size_t i = 0; i < bundle.vertices.size(); ++i) {
            bundle.vertices[i] += into_key[d][i];
        }
    }

    bundle.check_finite();
    return bundle;
}

FdInstance make_fd_instance(const FdInstanceSpec& spec) {
    if (spec.frames < 2 || spec.vertex_count < 4 || spec.points_per_frame < 4) {
        throw InputError("finite-difference instance too small");
    }
    std::mt19937_64 gen(spec.seed);

    // Cylinder strip mesh: rings of 5 vertices with seeded jitter.
    const int around = 5;
    const int rings = spec.vertex_count / around;
    if (rings * around != spec.vertex_count) {
        throw InputError("fd instance vertex count must be a multiple of 5");
    }
    std::vector<Vec3> verts;
    for (int r = 0; r < rings; ++r) {
        for (int a = 0; a < around; ++a) {
            const double angle = 2.0 * M_PI * a / around;
            const double jitter = 0.05 * (uniform_unit(gen) - 0.5);
            verts.emplace_back(0.35 * std::cos(angle) + jitter,
                               0.35 * std::sin(angle) + jitter,
                               -0.4 + 0.8 * r / std::max(1, rings - 1) + jitter);
        }
    }
    std::vector<std::array<int, 3>> tris;
    for (int r = 0; r + 1 < rings; ++r) {
        for (int a = 0; a < around; ++a) {
            const int a2 = (a + 1) % around;
            const int v00 = r * around + a;
            const int v01 = r * around + a2;
            const int v10 = (r + 1) * around + a;
            const int v11 = (r + 1) * around + a2;
            tris.push_back({v00, v01, v11});
            tris.push_back({v00, v11, v10});
        }
    }

    std::vector<PointCloud> clouds;
    for (int f = 0; f < spec.frames; ++f) {
        std::vector<Vec3> pts;
        pts.reserve(static_cast<std::size_t>(spec.points_per_frame));
        for (int i = 0; i < spec.points_per_frame; ++i) {
            pts.emplace_back(uniform_range(gen, -0.6, 0.6), uniform_range(gen, -0.6, 0.6),
                             uniform_range(gen, -0.6, 0.6));
        }
        clouds.emplace_back(std::move(pts));
    }

    FdInstance inst;
    inst.seq = PointCloudSequence(std::move(clouds));
    inst.mesh = TriMesh(std::move(verts), std::move(tris));
    inst.grids = GridSequence::build(inst.seq, spec.keyframe, spec.levels);
    for (auto& grid : inst.grids.grids) {
        for (auto& level : grid.levels) {
            for (auto& p : level.params) {
                for (int c = 0; c < 6; ++c) {
                    p.channel(c) = uniform_range(gen, -spec.param_range, spec.param_range);
                }
            }
        }
    }
    inst.conf = ConfidenceState{/*epoch=*/1, /*max_epochs=*/4};
    inst.opts.threads = 1;
    return inst;
}

namespace {
std::string entry_name(int grid, int level, int slot, int channel) {
    static const char* names[6] = {"z0", "z1", "z2", "t0", "t1", "t2"};
    return "grid" + std::to_string(grid) + "/level" + std::to_string(level + 1) + "/cell" +
           std::to_string(slot) + "/" + names[channel];
}
}  // namespace

FdReport finite_difference_check(const FdInstanceSpec& spec, double rel_tol, double abs_floor,
                                 const FdCorruption* corrupt) {
    FdInstance inst = make_fd_instance(spec);
    SequenceEvaluator ev(inst.seq, inst.mesh, inst.opts);
    std::vector<Vec3> verts = inst.mesh.vertices;
    ev.evaluate(inst.grids, verts, inst.conf);
    GradientBundle analytic = backward_pass(ev);

    if (corrupt) {
        if (corrupt->grid >= 0) {
            analytic.grids[static_cast<std::size_t>(corrupt->grid)]
                          [static_cast<std::size_t>(corrupt->level)]
                          [static_cast<std::size_t>(corrupt->slot)]
                              .channel(corrupt->channel) *= 2.0;
        } else if (corrupt->vertex >= 0) {
            analytic.vertices[static_cast<std::size_t>(corrupt->vertex)][corrupt->channel] *= 2.0;
        }
    }

    FdReport report;
    report.pass = true;

    auto compare = [&](double a, double n, const std::string& name) {
        ++report.checked;
        const double err = std::abs(a - n);
        const double denom = std::max(std::abs(a), std::abs(n));
        const double rel = denom > 0.0 ? err / denom : 0.0;
        if (denom >= abs_floor) report.max_rel_error = std::max(report.max_rel_error, rel);
        const bool ok = err <= std::max(abs_floor, rel_tol * denom);
        if (!ok) {
            report.pass = false;
            report.failures.push_back({name, a, n, err});
        }
    };

    auto probe = [&](double& theta) {
        const double h = 1e-5 * std::max(1.0, std::abs(theta));
        const double saved = theta;
        theta = saved + h;
        const double up = ev.evaluate_frozen(inst.grids, verts);
        theta = saved - h;
        const double dn = ev.evaluate_frozen(inst.grids, verts);
        theta = saved;
        return (up - dn) / (2.0 * h);
    };

    for (std::size_t g = 0; g < inst.grids.grids.size(); ++g) {
        auto& grid = inst.grids.grids[g];
        for (std::size_t l = 0; l < grid.levels.size(); ++l) {
            auto& params = grid.levels[l].params;
            for (std::size_t s = 0; s < params.size(); ++s) {
                for (int c = 0; c < 6; ++c) {
                    const double numeric = probe(params[s].channel(c));
                    compare(analytic.grids[g][l][s].channel(c), numeric,
                            entry_name(static_cast<int>(g), static_cast<int>(l),
                                       static_cast<int>(s), c));
                }
            }
        }
    }
    for (std::size_t v = 0; v < verts.size(); ++v) {
        for (int c = 0; c < 3; ++c) {
            const double numeric = probe(verts[v][c]);
            compare(analytic.vertices[v][c], numeric,
                    "vertex" + std::to_string(v) + "/" + std::string(1, char('x' + c)));
        }
    }
    return report;
}

double cayley_jacobian_max_rel_error(std::uint64_t seed, int trials) {
    std::mt19937_64 gen(seed);
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const Vec3 z(uniform_range(gen, -1.5, 1.5), uniform_range(gen, -1.5, 1.5),
                     uniform_range(gen, -1.5, 1.5));
        const Vec3 x(uniform_range(gen, -1.0, 1.0), uniform_range(gen, -1.0, 1.0),
                     uniform_range(gen, -1.0, 1.0));
        const RotationPullback pb(z);
        Mat3 analytic;
        for (int i = 0; i < 3; ++i) {
            Vec3 zbar, xbar;
            pb.pull_back(x, Vec3::Unit(i), zbar, xbar);
            analytic.row(i) = zbar.transpose();
        }
        Mat3 numeric;
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Vec3 zp = z, zm = z;
            zp[k] += h;
            zm[k] -= h;
            numeric.col(k) = (cayley_rotation(zp) * x - cayley_rotation(zm) * x) / (2.0 * h);
        }
        const double scale = std::max(1e-12, numeric.cwiseAbs().maxCoeff());
        worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

}  // namespace defgrid
