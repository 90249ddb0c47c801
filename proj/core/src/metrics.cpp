#include "defgrid/metrics.hpp"

#include <cmath>

#include "defgrid/nn_index.hpp"

namespace defgrid {

NormalizationTransform unit_box_transform(const TriMesh& gt) {
    const Bbox box = bounding_box(gt.vertices);
    const double extent = box.longest_extent();
    NormalizationTransform tf;
    tf.center = box.min;
    tf.scale = extent > 0.0 ? 1.0 / extent : 1.0;
    return tf;
}

namespace {

TriMesh transformed(const TriMesh& mesh, const NormalizationTransform& tf) {
    std::vector<Vec3> verts;
    verts.reserve(mesh.vertices.size());
    for (const Vec3& v : mesh.vertices) verts.push_back(tf.apply(v));
    return TriMesh(std::move(verts), mesh.triangles);
}

struct DirectionStats {
    double mean_sq_dist = 0.0;
    double mean_abs_cos = 0.0;
    double fraction_within_half = 0.0;
    double fraction_within_one = 0.0;
};

DirectionStats one_direction(const SurfaceSamples& from, const SurfaceSamples& to,
                             const NnIndex& to_index, double thresh_half, double thresh_one) {
    DirectionStats st;
    std::size_t within_half = 0, within_one = 0;
    for (std::size_t i = 0; i < from.points.size(); ++i) {
        const auto res = to_index.nearest(from.points[i]);
        st.mean_sq_dist += res.sq_dist;
        st.mean_abs_cos +=
            std::abs(from.normals[i].dot(to.normals[static_cast<std::size_t>(res.index)]));
        const double d = std::sqrt(res.sq_dist);
        if (d <= thresh_half) ++within_half;
        if (d <= thresh_one) ++within_one;
    }
    const double n = static_cast<double>(from.points.size());
    st.mean_sq_dist /= n;
    st.mean_abs_cos /= n;
    st.fraction_within_half = static_cast<double>(within_half) / n;
    st.fraction_within_one = static_cast<double>(within_one) / n;
    return st;
}

double f_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

}  // namespace

FrameMetrics evaluate_frame(const TriMesh& pred, const TriMesh& gt, const MetricParams& params) {
    const NormalizationTransform tf = unit_box_transform(gt);
    const TriMesh pred_n = transformed(pred, tf);
    const TriMesh gt_n = transformed(gt, tf);

    const auto pred_samples =
        sample_surface(pred_n, static_cast<std::size_t>(params.samples), params.seed);
    const auto gt_samples =
        sample_surface(gt_n, static_cast<std::size_t>(params.samples), params.seed);

    const double base = params.threshold_on_diagonal ? std::sqrt(3.0) : 1.0;
    const double thresh_half = params.tau_half * base;
    const double thresh_one = params.tau_one * base;

    const NnIndex pred_index(pred_samples.points);
    const NnIndex gt_index(gt_samples.points);

    const DirectionStats p2g =
        one_direction(pred_samples, gt_samples, gt_index, thresh_half, thresh_one);
    const DirectionStats g2p =
        one_direction(gt_samples, pred_samples, pred_index, thresh_half, thresh_one);

    FrameMetrics m;
    m.cd = p2g.mean_sq_dist + g2p.mean_sq_dist;
    m.cd_scaled = m.cd * 1e5;
    m.nc = 0.5 * (p2g.mean_abs_cos + g2p.mean_abs_cos);
    m.f_half = f_score(p2g.fraction_within_half, g2p.fraction_within_half);
    m.f_one = f_score(p2g.fraction_within_one, g2p.fraction_within_one);
    return m;
}

double correspondence_error(std::span<const std::vector<Vec3>> pred_track,
                            std::span<const std::vector<Vec3>> gt_track) {
    if (pred_track.size() != gt_track.size()) {
        throw InputError("track frame counts differ");
    }
    if (pred_track.empty()) throw InputError("empty tracks");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < pred_track.size(); ++t) {
        if (pred_track[t].size() != gt_track[t].size()) {
            throw InputError("track point counts differ at frame " + std::to_string(t));
        }
        for (std::size_t i = 0; i < pred_track[t].size(); ++i) {
            acc += (pred_track[t][i] - gt_track[t][i]).norm();
            ++count;
        }
    }
    if (count == 0) throw InputError("tracks contain no points");
    return acc / static_cast<double>(count);
}

SequenceMetrics summarize(std::vector<FrameMetrics> frames) {
    SequenceMetrics out;
    if (frames.empty()) throw InputError("no frame metrics to summarize");
    FrameMetrics mean;
    double corr_acc = 0.0;
    int corr_count = 0;
    for (const auto& f : frames) {
        mean.cd += f.cd;
        mean.nc += f.nc;
        mean.f_half += f.f_half;
        mean.f_one += f.f_one;
        if (f.corr) {
            corr_acc += *f.corr;
            ++corr_count;
        }
    }
    const double n = static_cast<double>(frames.size());
    mean.cd /= n;
    mean.cd_scaled = mean.cd * 1e5;
    mean.nc /= n;
    mean.f_half /= n;
    mean.f_one /= n;
    if (corr_count > 0) mean.corr = corr_acc / corr_count;
    out.frames = std::move(frames);
    out.mean = mean;
    return out;
}

}  // namespace defgrid
