#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "defgrid/types.hpp"

namespace defgrid {

struct PointCloud {
    std::vector<Vec3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> pts);

    std::size_t size() const { return points.size(); }
};

/// Affine map into the canonical domain: p -> (p - center) * scale.
struct NormalizationTransform {
    Vec3 center{0.0, 0.0, 0.0};
    double scale = 1.0;

    Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
    Vec3 invert(const Vec3& q) const { return q / scale + center; }
    bool is_identity() const { return scale == 1.0 && center.isZero(0.0); }
};

struct PointCloudSequence {
    std::vector<PointCloud> frames;
    NormalizationTransform normalization;  // identity until normalize_sequence ran

    PointCloudSequence() = default;
    explicit PointCloudSequence(std::vector<PointCloud> frames_in);

    int frame_count() const { return static_cast<int>(frames.size()); }
    /// Index of the last frame (T when frames run 0..T).
    int last_frame() const { return frame_count() - 1; }
};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::pair<int, int>> edges;  // unordered (i < j), each once, sorted

    TriMesh() = default;
    TriMesh(std::vector<Vec3> verts, std::vector<std::array<int, 3>> tris);

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
};

/// Union of triangle edges, each undirected edge exactly once, sorted (i < j).
/// Throws InputError on out-of-range or repeated indices within a triangle.
std::vector<std::pair<int, int>> extract_edges(std::span<const std::array<int, 3>> triangles,
                                               std::size_t vertex_count);

/// Joint-bounding-box normalization: one transform for all frames, centered at
/// the box center, longest axis scaled to span exactly [-1, 1].
std::pair<std::vector<PointCloud>, NormalizationTransform>
normalize_frames(const std::vector<PointCloud>& raw);

std::pair<PointCloudSequence, NormalizationTransform>
normalize_sequence(const PointCloudSequence& raw);

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // unit face normal of the triangle each point came from
};

/// Area-weighted surface sampling, deterministic in the seed.
/// Throws InputError if the mesh has zero total area.
SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

/// Axis-aligned bounding box over a set of points.
struct Bbox {
    Vec3 min, max;
    Vec3 extent() const { return max - min; }
    double longest_extent() const { return extent().maxCoeff(); }
    double diagonal() const { return extent().norm(); }
};
Bbox bounding_box(std::span<const Vec3> points);

}  // namespace defgrid
