#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defgrid/geometry.hpp"

namespace defgrid {

/// Icosphere with 20 * 4^subdivisions faces (subdivisions = 3 gives 642 vertices).
TriMesh make_icosphere(int subdivisions, double radius);

/// Icosphere with a smooth seeded radial perturbation; the bumps make rigid
/// motion (including spin) observable from surface geometry alone.
TriMesh make_bumpy_sphere(int subdivisions, double radius, double bump_amplitude,
                          std::uint64_t seed);

/// Axis-aligned box surface triangulated with the given segment counts.
TriMesh make_box(const Vec3& half_extents, const Vec3i& segments);

/// Ground-truth frames of an analytically deformed template plus sampled
/// input clouds and material-point trajectories (the mesh vertices).
struct SyntheticScene {
    std::vector<TriMesh> gt_meshes;         // frames 0..T
    std::vector<PointCloud> clouds;         // sampled from each frame's surface
    std::vector<std::vector<Vec3>> tracks;  // gt_meshes[t].vertices
};

/// Rigid motion: per-frame rotation about an axis through the body center
/// plus a per-frame translation, both cumulative.
SyntheticScene make_rigid_sphere_scene(int transitions, int points_per_frame,
                                       double degrees_per_frame, const Vec3& translation_per_frame,
                                       std::uint64_t seed);

/// Smooth angle field along the bar axis: the section at material coordinate
/// s rotates by bend * (t/T) * s about the z-line through the bar's left end.
SyntheticScene make_bending_bar_scene(int transitions, int points_per_frame,
                                      double max_bend_degrees, std::uint64_t seed);

/// Anisotropic per-frame scaling (non-isometric on purpose).
SyntheticScene make_scaling_cube_scene(int transitions, int points_per_frame,
                                       const Vec3& scale_per_frame, std::uint64_t seed);

/// Gaussian noise with sigma = pct/100 of the joint bounding-box diagonal.
void add_noise(std::vector<PointCloud>& clouds, double pct_of_diagonal, std::uint64_t seed);

/// Writes clouds/frame_%04d.xyz, gt/frame_%04d.obj and tracks/frame_%04d.xyz.
void write_scene(const std::string& dir, const SyntheticScene& scene);

}  // namespace defgrid
