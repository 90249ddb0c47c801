#pragma once

#include <cstdint>
#include <vector>

#include "defgrid/geometry.hpp"

namespace defgrid {

struct KeyframeReport {
    int chosen = 0;
    std::vector<std::int64_t> occupancy;  // occupied voxels per frame
    std::vector<double> weights;          // exp(-gamma (t - T/2)^2)
    std::vector<double> scores;           // weight * occupancy
};

/// Coverage-weighted keyframe: occupancy counted on a uniform grid over
/// [-1, 1]^3, Gaussian-weighted toward the temporal midpoint; ties take the
/// smallest index.
KeyframeReport select_keyframe(const PointCloudSequence& seq, int grid_resolution = 128,
                               double gamma = 0.001);

/// Occupied-voxel count of one frame on the keyframe grid.
std::int64_t voxel_occupancy(const PointCloud& cloud, int grid_resolution);

}  // namespace defgrid
