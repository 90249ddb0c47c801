#include "defgrid/objective.hpp"

#include <algorithm>
#include <cmath>

#include "defgrid/parallel.hpp"

namespace defgrid {

double ConfidenceState::delta() const {
    if (max_epochs <= 0) throw InputError("max_epochs must be positive");
    const double ratio = std::clamp(static_cast<double>(epoch) / max_epochs, 0.0, 1.0);
    return 1.0 - std::sqrt(ratio);
}

std::vector<double> confidence_weights(double delta, double cd_max,
                                       std::span<const double> ordered_frame_cds) {
    std::vector<double> weights;
    weights.reserve(ordered_frame_cds.size());
    double acc = 1.0;
    for (double cd : ordered_frame_cds) {
        const double excess = std::max(0.0, cd - cd_max);
        acc *= std::pow(1.0 / (1.0 + excess), delta);
        weights.push_back(acc);
    }
    return weights;
}

namespace {

/// One Chamfer direction: moving points query the fixed index.
void fill_direction(std::span<const Vec3> moving, const NnIndex& fixed_index, double alpha,
                    std::vector<int>& nn_out, std::vector<double>& w_out, double& sum_out) {
    nn_out.resize(moving.size());
    w_out.resize(moving.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const auto res = fixed_index.nearest(moving[i]);
        const double w = std::exp(-alpha * res.sq_dist);
        nn_out[i] = res.index;
        w_out[i] = w;
        sum += w * res.sq_dist;
    }
    sum_out = sum;
}

ChamferCache chamfer_cache(std::span<const Vec3> moving, std::span<const Vec3> fixed,
                           const NnIndex& fixed_index, double alpha) {
    if (moving.empty() || fixed.empty()) throw InputError("Chamfer over an empty point set");
    ChamferCache cache;
    double sum_mf = 0.0, sum_fm = 0.0;
    fill_direction(moving, fixed_index, alpha, cache.nn_in_fixed, cache.w_moving, sum_mf);
    const NnIndex moving_index(moving);
    fill_direction(fixed, moving_index, alpha, cache.nn_in_moving, cache.w_fixed, sum_fm);
    cache.value = sum_mf / static_cast<double>(moving.size()) +
                  sum_fm / static_cast<double>(fixed.size());
    return cache;
}

double frozen_chamfer(const ChamferCache& cache, std::span<const Vec3> moving,
                      std::span<const Vec3> fixed) {
    double sum_mf = 0.0;
    for (std::size_t i = 0; i < moving.size(); ++i) {
        const Vec3 d = moving[i] - fixed[static_cast<std::size_t>(cache.nn_in_fixed[i])];
        sum_mf += cache.w_moving[i] * d.squaredNorm();
    }
    double sum_fm = 0.0;
    for (std::size_t j = 0; j < fixed.size(); ++j) {
        const Vec3 d = moving[static_cast<std::size_t>(cache.nn_in_moving[j])] - fixed[j];
        sum_fm += cache.w_fixed[j] * d.squaredNorm();
    }
    return sum_mf / static_cast<double>(moving.size()) +
           sum_fm / static_cast<double>(fixed.size());
}

}  // namespace

double robust_chamfer(std::span<const Vec3> p, std::span<const Vec3> q,
                      const RobustChamferParams& params) {
    if (p.empty() || q.empty()) throw InputError("robust Chamfer over an empty point set");
    const NnIndex q_index(q);
    return chamfer_cache(p, q, q_index, params.alpha).value;
}

SequenceEvaluator::SequenceEvaluator(const PointCloudSequence& seq, const TriMesh& topology,
                                     EvalOptions opts)
    : seq_(&seq), topo_(&topology), opts_(opts) {
    frame_index_.reserve(static_cast<std::size_t>(seq.frame_count()));
    for (const auto& frame : seq.frames) frame_index_.emplace_back(frame.points);
    eval_.frame_count = seq.frame_count();
    eval_.mesh_pos.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.transported.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.mesh_term.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.cloud_term.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.cd_mesh.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.cd_cloud.resize(static_cast<std::size_t>(eval_.frame_count));
    eval_.confidence.resize(static_cast<std::size_t>(eval_.frame_count));
}

void SequenceEvaluator::deform_chain(const GridSequence& grids, std::span<const Vec3> verts,
                                     int direction_sign) {
    const int key = grids.keyframe;
    const int last = direction_sign > 0 ? grids.frame_count - 1 : 0;
    std::vector<Vec3> current(verts.begin(), verts.end());
    for (int t = key + direction_sign; direction_sign > 0 ? t <= last : t >= last;
         t += direction_sign) {
        const DeformationGrid& g = grids.grid_for_frame(t);
        for (Vec3& p : current) p = apply_grid_step(g, p);
        eval_.mesh_pos[static_cast<std::size_t>(t)] = current;
    }
}

void SequenceEvaluator::frame_terms(const GridSequence& grids, int t) {
    const double alpha = opts_.chamfer.alpha;
    const auto& target = seq_->frames[static_cast<std::size_t>(t)].points;
    const NnIndex& target_index = frame_index_[static_cast<std::size_t>(t)];

    eval_.mesh_term[static_cast<std::size_t>(t)] =
        chamfer_cache(eval_.mesh_pos[static_cast<std::size_t>(t)], target, target_index, alpha);
    eval_.cd_mesh[static_cast<std::size_t>(t)] = eval_.mesh_term[static_cast<std::size_t>(t)].value;

    const int source = grids.frame_toward_keyframe(t);
    const auto& source_cloud = seq_->frames[static_cast<std::size_t>(source)].points;
    auto& transported = eval_.transported[static_cast<std::size_t>(t)];
    transported.resize(source_cloud.size());
    const DeformationGrid& g = grids.grid_for_frame(t);
    for (std::size_t i = 0; i < source_cloud.size(); ++i) {
        transported[i] = apply_grid_step(g, source_cloud[i]);
    }
    eval_.cloud_term[static_cast<std::size_t>(t)] =
        chamfer_cache(transported, target, target_index, alpha);
    eval_.cd_cloud[static_cast<std::size_t>(t)] =
        eval_.cloud_term[static_cast<std::size_t>(t)].value;
}

const ForwardEval& SequenceEvaluator::evaluate(const GridSequence& grids,
                                               std::span<const Vec3> verts,
                                               const ConfidenceState& conf) {
    if (grids.frame_count != seq_->frame_count()) {
        throw InputError("grid sequence and point cloud sequence disagree on frame count");
    }
    if (verts.size() != topo_->vertex_count()) {
        throw InputError("vertex buffer does not match mesh topology");
    }
    last_grids_ = &grids;
    const int key = grids.keyframe;
    eval_.keyframe = key;
    eval_.mesh_pos[static_cast<std::size_t>(key)].assign(verts.begin(), verts.end());

    // Recursive composition is serial per direction; the two directions and
    // then the per-frame Chamfer terms parallelize with per-slot outputs.
    {
        const bool has_fwd = grids.forward_count() > 0;
        const bool has_bwd = grids.backward_count() > 0;
        std::vector<int> dirs;
        if (has_fwd) dirs.push_back(1);
        if (has_bwd) dirs.push_back(-1);
        parallel_for(dirs.size(), opts_.threads,
                     [&](std::size_t d) { deform_chain(grids, verts, dirs[d]); });
    }

    std::vector<int> frames;
    frames.reserve(static_cast<std::size_t>(eval_.frame_count - 1));
    for (int t = 0; t < eval_.frame_count; ++t) {
        if (t != key) frames.push_back(t);
    }
    parallel_for(frames.size(), opts_.threads,
                 [&](std::size_t i) { frame_terms(grids, frames[i]); });

    eval_.init_term = chamfer_cache(eval_.mesh_pos[static_cast<std::size_t>(key)],
                                    seq_->frames[static_cast<std::size_t>(key)].points,
                                    frame_index_[static_cast<std::size_t>(key)],
                                    opts_.chamfer.alpha);

    // cd_max over transitions, outside any differentiation path.
    double cd_max = 0.0;
    for (int t : frames) cd_max = std::max(cd_max, eval_.cd_cloud[static_cast<std::size_t>(t)]);
    eval_.cd_max = cd_max;
    eval_.delta = conf.delta();

    // Direction-local cumulative confidence products, outward from the keyframe.
    std::fill(eval_.confidence.begin(), eval_.confidence.end(), 1.0);
    auto fill_confidence = [&](int sign) {
        std::vector<double> cds;
        for (int t = key + sign; t >= 0 && t < eval_.frame_count; t += sign) {
            cds.push_back(eval_.cd_mesh[static_cast<std::size_t>(t)]);
        }
        const auto w = confidence_weights(eval_.delta, cd_max, cds);
        int i = 0;
        for (int t = key + sign; t >= 0 && t < eval_.frame_count; t += sign) {
            eval_.confidence[static_cast<std::size_t>(t)] = w[static_cast<std::size_t>(i++)];
        }
    };
    fill_confidence(+1);
    fill_confidence(-1);

    const int n_transitions = eval_.frame_count - 1;
    double transform = 0.0;
    for (int t = 0; t < eval_.frame_count; ++t) {
        if (t == key) continue;
        transform += eval_.confidence[static_cast<std::size_t>(t)] *
                         eval_.cd_mesh[static_cast<std::size_t>(t)] +
                     eval_.cd_cloud[static_cast<std::size_t>(t)];
    }
    transform /= static_cast<double>(n_transitions);

    const double iso = isometry_from_positions(*topo_, eval_.mesh_pos, key);

    auto& b = eval_.breakdown;
    b.mesh_loss = eval_.init_term.value;
    b.transform_loss = transform;
    b.isometry_loss = iso;
    b.cd_max = cd_max;
    const double w_iso = opts_.use_isometry ? opts_.isometry_weight : 0.0;
    b.total = b.mesh_loss + b.transform_loss + w_iso * b.isometry_loss;
    b.frame_cd = eval_.cd_mesh;
    b.frame_cd[static_cast<std::size_t>(key)] = b.mesh_loss;
    b.frame_confidence = eval_.confidence;
    return eval_;
}

double SequenceEvaluator::evaluate_frozen(const GridSequence& grids,
                                          std::span<const Vec3> verts) const {
    const int key = grids.keyframe;
    const int frame_count = grids.frame_count;

    std::vector<std::vector<Vec3>> mesh_pos(static_cast<std::size_t>(frame_count));
    mesh_pos[static_cast<std::size_t>(key)].assign(verts.begin(), verts.end());
    for (int sign : {+1, -1}) {
        std::vector<Vec3> current(verts.begin(), verts.end());
        for (int t = key + sign; t >= 0 && t < frame_count; t += sign) {
            const DeformationGrid& g = grids.grid_for_frame(t);
            for (Vec3& p : current) p = apply_grid_step(g, p);
            mesh_pos[static_cast<std::size_t>(t)] = current;
        }
    }

    double transform = 0.0;
    for (int t = 0; t < frame_count; ++t) {
        if (t == key) continue;
        const auto& target = seq_->frames[static_cast<std::size_t>(t)].points;
        const double cd_mesh =
            frozen_chamfer(eval_.mesh_term[static_cast<std::size_t>(t)],
                           mesh_pos[static_cast<std::size_t>(t)], target);

        const int source = grids.frame_toward_keyframe(t);
        const auto& source_cloud = seq_->frames[static_cast<std::size_t>(source)].points;
        std::vector<Vec3> transported(source_cloud.size());
        const DeformationGrid& g = grids.grid_for_frame(t);
        for (std::size_t i = 0; i < source_cloud.size(); ++i) {
            transported[i] = apply_grid_step(g, source_cloud[i]);
        }
        const double cd_cloud =
            frozen_chamfer(eval_.cloud_term[static_cast<std::size_t>(t)], transported, target);

        transform += eval_.confidence[static_cast<std::size_t>(t)] * cd_mesh + cd_cloud;
    }
    transform /= static_cast<double>(frame_count - 1);

    const double init = frozen_chamfer(eval_.init_term, mesh_pos[static_cast<std::size_t>(key)],
                                       seq_->frames[static_cast<std::size_t>(key)].points);
    const double iso = isometry_from_positions(*topo_, mesh_pos, key);
    const double w_iso = opts_.use_isometry ? opts_.isometry_weight : 0.0;
    return init + transform + w_iso * iso;
}

double isometry_from_positions(const TriMesh& topology,
                               std::span<const std::vector<Vec3>> positions, int keyframe) {
    if (topology.edges.empty()) throw InputError("mesh has no edges for the isometry term");
    const int frame_count = static_cast<int>(positions.size());
    const int n_transitions = frame_count - 1;
    if (n_transitions < 1) throw InputError("isometry needs at least two frames");

    double acc = 0.0;
    for (int t = 0; t < frame_count; ++t) {
        if (t == keyframe) continue;
        const int prev = t > keyframe ? t - 1 : t + 1;
        const auto& cur = positions[static_cast<std::size_t>(t)];
        const auto& pre = positions[static_cast<std::size_t>(prev)];
        for (const auto& [i, j] : topology.edges) {
            const double len_cur =
                (cur[static_cast<std::size_t>(i)] - cur[static_cast<std::size_t>(j)]).norm();
            const double len_pre =
                (pre[static_cast<std::size_t>(i)] - pre[static_cast<std::size_t>(j)]).norm();
            acc += std::abs(len_cur - len_pre);
        }
    }
    return acc / (static_cast<double>(n_transitions) * static_cast<double>(topology.edges.size()));
}

double mesh_loss(std::span<const Vec3> verts, std::span<const Vec3> keyframe_cloud,
                 const RobustChamferParams& params) {
    return robust_chamfer(verts, keyframe_cloud, params);
}

double transform_loss(const GridSequence& grids, const TriMesh& topology,
                      std::span<const Vec3> verts, const PointCloudSequence& seq,
                      const ConfidenceState& conf, TransformLossDiagnostics* diag,
                      const RobustChamferParams& params) {
    EvalOptions opts;
    opts.chamfer = params;
    SequenceEvaluator ev(seq, topology, opts);
    const ForwardEval& fe = ev.evaluate(grids, verts, conf);
    if (diag) {
        diag->frame_cd = fe.cd_mesh;
        diag->frame_cloud_cd = fe.cd_cloud;
        diag->frame_confidence = fe.confidence;
        diag->cd_max = fe.cd_max;
    }
    return fe.breakdown.transform_loss;
}

double compute_cd_max(const GridSequence& grids, const PointCloudSequence& seq,
                      const RobustChamferParams& params) {
    double cd_max = 0.0;
    for (int t = 0; t < grids.frame_count; ++t) {
        if (t == grids.keyframe) continue;
        const int source = grids.frame_toward_keyframe(t);
        const auto& source_cloud = seq.frames[static_cast<std::size_t>(source)].points;
        std::vector<Vec3> transported(source_cloud.size());
        const DeformationGrid& g = grids.grid_for_frame(t);
        for (std::size_t i = 0; i < source_cloud.size(); ++i) {
            transported[i] = apply_grid_step(g, source_cloud[i]);
        }
        cd_max = std::max(cd_max, robust_chamfer(transported,
                                                 seq.frames[static_cast<std::size_t>(t)].points,
                                                 params));
    }
    return cd_max;
}

double isometry_loss(const GridSequence& grids, const TriMesh& topology,
                     std::span<const Vec3> verts) {
    std::vector<std::vector<Vec3>> positions(static_cast<std::size_t>(grids.frame_count));
    positions[static_cast<std::size_t>(grids.keyframe)].assign(verts.begin(), verts.end());
    for (int sign : {+1, -1}) {
        std::vector<Vec3> current(verts.begin(), verts.end());
        for (int t = grids.keyframe + sign; t >= 0 && t < grids.frame_count; t += sign) {
            const DeformationGrid& g = grids.grid_for_frame(t);
            for (Vec3& p : current) p = apply_grid_step(g, p);
            positions[static_cast<std::size_t>(t)] = current;
        }
    }
    return isometry_from_positions(topology, positions, grids.keyframe);
}

LossBreakdown total_loss(const GridSequence& grids, const TriMesh& topology,
                         std::span<const Vec3> verts, const PointCloudSequence& seq,
                         const ConfidenceState& conf, const EvalOptions& opts) {
    SequenceEvaluator ev(seq, topology, opts);
    return ev.evaluate(grids, verts, conf).breakdown;
}

}  // namespace defgrid
