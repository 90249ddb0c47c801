#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "defgrid/geometry.hpp"
#include "defgrid/transform.hpp"

namespace defgrid {

/// Temporal direction of a transition grid relative to the keyframe.
enum class TimeDirection : std::uint8_t { Forward = 0, Backward = 1 };

/// One lattice level: 2*level - 1 vertices per axis spanning [-1, 1].
/// Inactive vertices implicitly hold the zero transform (identity motion).
struct GridLevel {
    int level = 1;
    int resolution = 1;
    std::vector<std::int32_t> slot;   // resolution^3 lookup, -1 = inactive
    std::vector<Vec3i> coords;        // slot -> lattice coordinate
    std::vector<Transform6> params;   // one per active vertex

    static GridLevel dense(int level);
    static int resolution_for(int level) { return 2 * level - 1; }

    int active_count() const { return static_cast<int>(params.size()); }
    double spacing() const { return resolution > 1 ? 2.0 / (resolution - 1) : 2.0; }
    std::int32_t slot_at(int i, int j, int k) const {
        return slot[static_cast<std::size_t>((i * resolution + j) * resolution + k)];
    }
    Vec3 vertex_position(const Vec3i& c) const;
};

struct DeformationGrid {
    TimeDirection direction = TimeDirection::Forward;
    std::vector<GridLevel> levels;

    int level_count() const { return static_cast<int>(levels.size()); }
    std::size_t parameter_count() const;
    void zero_params();
};

/// Trilinear stencil of one level at a clamped query point. All weights are
/// kept (partition of unity) even where slots are inactive.
struct LevelStencil {
    int count = 0;
    std::int32_t slots[8];
    double weights[8];
    Vec3 weight_grads[8];  // d w / d position; zero on the single-vertex level
};

LevelStencil make_stencil(const GridLevel& level, const Vec3& clamped);

Vec3 clamp_to_domain(const Vec3& x);

/// Level-averaged trilinear lookup: (1/L) sum_l sum_corners w * T.
/// Positions outside [-1, 1]^3 are clamped before lookup.
Transform6 interpolate(const DeformationGrid& grid, const Vec3& x);

/// One transition step: y = R(z) x + t with (z, t) = interpolate(grid, x).
Vec3 apply_grid_step(const DeformationGrid& grid, const Vec3& x);

/// Chebyshev dilation radius (lattice units) around occupied vertices.
inline constexpr int kPruneDilation = 3;

/// Active set over the union of two frames: a vertex is active iff a point of
/// either cloud falls in its nearest-vertex cell or it lies within
/// kPruneDilation (Chebyshev) of such a vertex.
DeformationGrid build_pruned_pair(int level_count, const PointCloud& a, const PointCloud& b);

/// One grid per transition (t, t+1), t = 0..T-1.
std::vector<DeformationGrid> build_pruned(int level_count, const PointCloudSequence& seq);

struct GridSequence {
    int keyframe = 0;
    int frame_count = 0;                 // frames 0..T, count = T + 1
    std::vector<DeformationGrid> grids;  // forward transitions outward, then backward

    int forward_count() const { return frame_count - 1 - keyframe; }
    int backward_count() const { return keyframe; }
    int transition_count() const { return frame_count - 1; }

    /// Transition grid whose target is frame t (t != keyframe).
    int grid_index_for_frame(int t) const;
    const DeformationGrid& grid_for_frame(int t) const { return grids[static_cast<std::size_t>(grid_index_for_frame(t))]; }
    DeformationGrid& grid_for_frame(int t) { return grids[static_cast<std::size_t>(grid_index_for_frame(t))]; }

    /// Frame adjacent to t on the keyframe side.
    int frame_toward_keyframe(int t) const { return t > keyframe ? t - 1 : t + 1; }

    std::size_t parameter_count() const;
    std::size_t dense_parameter_count() const;
    void zero_params();

    /// Pruned grids for every transition, anchored at the keyframe. With
    /// multi_resolution off a single level at the finest resolution is built.
    static GridSequence build(const PointCloudSequence& seq, int keyframe, int level_count,
                              bool multi_resolution = true);
};

/// Walks one transition at a time from the keyframe toward target_frame,
/// re-interpolating at the already-deformed positions each step.
std::vector<Vec3> deform_points(const GridSequence& grids, std::span<const Vec3> base,
                                int target_frame);

void save_grid_checkpoint(const std::string& path, const GridSequence& grids);
GridSequence load_grid_checkpoint(const std::string& path);

}  // namespace defgrid
