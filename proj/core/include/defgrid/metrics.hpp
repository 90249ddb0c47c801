#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "defgrid/geometry.hpp"

namespace defgrid {

struct FrameMetrics {
    double cd = 0.0;         // sum of the two directional mean squared NN distances
    double cd_scaled = 0.0;  // cd * 1e5, the table reporting convention
    double nc = 0.0;         // mean |cos| between sample normals and their NN's normals
    double f_half = 0.0;     // F-score at the 0.5% threshold
    double f_one = 0.0;      // F-score at the 1% threshold
    std::optional<double> corr;
};

struct MetricParams {
    int samples = 100000;
    double tau_half = 0.005;
    double tau_one = 0.01;
    /// Thresholds as a fraction of the unit-box diagonal (sqrt(3)); the
    /// alternative interprets them against the unit edge length.
    bool threshold_on_diagonal = true;
    std::uint64_t seed = 0;
};

/// Maps p to (p - gt_min) / max_extent(gt): the ground-truth mesh lands in
/// [0, 1]^3 and the same transform is applied to the prediction.
NormalizationTransform unit_box_transform(const TriMesh& gt);

FrameMetrics evaluate_frame(const TriMesh& pred, const TriMesh& gt,
                            const MetricParams& params = {});

/// Mean Euclidean distance between predicted and ground-truth positions of the
/// same tracked points, over all frames. Inputs are expected in unit-box units.
double correspondence_error(std::span<const std::vector<Vec3>> pred_track,
                            std::span<const std::vector<Vec3>> gt_track);

struct SequenceMetrics {
    std::vector<FrameMetrics> frames;
    FrameMetrics mean;
};

SequenceMetrics summarize(std::vector<FrameMetrics> frames);

}  // namespace defgrid
