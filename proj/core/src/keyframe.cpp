#include "defgrid/keyframe.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace defgrid {

std::int64_t voxel_occupancy(const PointCloud& cloud, int grid_resolution) {
    const int r = grid_resolution;
    std::vector<bool> occupied(static_cast<std::size_t>(r) * r * r, false);
    std::int64_t count = 0;
    for (const Vec3& p : cloud.points) {
        int c[3];
        for (int a = 0; a < 3; ++a) {
            // half-open bins over [-1, 1), top boundary clamped into the last cell
            const double s = (p[a] + 1.0) * 0.5 * r;
            c[a] = std::clamp(static_cast<int>(std::floor(s)), 0, r - 1);
        }
        const std::size_t lin =
            (static_cast<std::size_t>(c[0]) * r + static_cast<std::size_t>(c[1])) * r +
            static_cast<std::size_t>(c[2]);
        if (!occupied[lin]) {
            occupied[lin] = true;
            ++count;
        }
    }
    return count;
}

KeyframeReport select_keyframe(const PointCloudSequence& seq, int grid_resolution, double gamma) {
    KeyframeReport report;
    const int frames = seq.frame_count();
    const double mid = static_cast<double>(seq.last_frame()) / 2.0;
    report.occupancy.reserve(static_cast<std::size_t>(frames));
    report.weights.reserve(static_cast<std::size_t>(frames));
    report.scores.reserve(static_cast<std::size_t>(frames));

    double best = -1.0;
    for (int t = 0; t < frames; ++t) {
        const std::int64_t occ =
            voxel_occupancy(seq.frames[static_cast<std::size_t>(t)], grid_resolution);
        const double dt = static_cast<double>(t) - mid;
        const double w = std::exp(-gamma * dt * dt);
        const double score = w * static_cast<double>(occ);
        report.occupancy.push_back(occ);
        report.weights.push_back(w);
        report.scores.push_back(score);
        if (score > best) {
            best = score;
            report.chosen = t;
        }
    }
    return report;
}

}  // namespace defgrid
