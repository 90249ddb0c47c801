#include "defgrid/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "defgrid/rng.hpp"

namespace defgrid {

PointCloud::PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {
    if (points.empty()) throw InputError("point cloud must be non-empty");
}

PointCloudSequence::PointCloudSequence(std::vector<PointCloud> frames_in)
    : frames(std::move(frames_in)) {
    if (frames.size() < 2) throw InputError("point cloud sequence needs at least 2 frames");
}

Bbox bounding_box(std::span<const Vec3> points) {
    if (points.empty()) throw InputError("bounding box of empty point set");
    Bbox box{points[0], points[0]};
    for (const Vec3& p : points) {
        box.min = box.min.cwiseMin(p);
        box.max = box.max.cwiseMax(p);
    }
    return box;
}

std::vector<std::pair<int, int>> extract_edges(std::span<const std::array<int, 3>> triangles,
                                               std::size_t vertex_count) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(triangles.size() * 3);
    const int n = static_cast<int>(vertex_count);
    for (const auto& tri : triangles) {
        for (int v : tri) {
            if (v < 0 || v >= n) throw InputError("triangle index out of range");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw InputError("degenerate triangle with repeated vertex index");
        }
        for (int k = 0; k < 3; ++k) {
            int a = tri[k];
            int b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.emplace_back(a, b);
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

TriMesh::TriMesh(std::vector<Vec3> verts, std::vector<std::array<int, 3>> tris)
    : vertices(std::move(verts)), triangles(std::move(tris)) {
    edges = extract_edges(triangles, vertices.size());
}

std::pair<std::vector<PointCloud>, NormalizationTransform>
normalize_frames(const std::vector<PointCloud>& raw) {
    if (raw.empty()) throw InputError("no frames to normalize");
    for (const auto& f : raw) {
        if (f.points.empty()) throw InputError("cannot normalize an empty frame");
    }

    Vec3 lo = raw[0].points[0], hi = raw[0].points[0];
    for (const auto& frame : raw) {
        for (const Vec3& p : frame.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    }
    NormalizationTransform tf;
    tf.center = 0.5 * (lo + hi);
    const double extent = (hi - lo).maxCoeff();
    tf.scale = extent > 0.0 ? 2.0 / extent : 1.0;

    std::vector<PointCloud> out;
    out.reserve(raw.size());
    for (const auto& frame : raw) {
        std::vector<Vec3> pts;
        pts.reserve(frame.points.size());
        for (const Vec3& p : frame.points) pts.push_back(tf.apply(p));
        out.emplace_back(std::move(pts));
    }
    return {std::move(out), tf};
}

std::pair<PointCloudSequence, NormalizationTransform>
normalize_sequence(const PointCloudSequence& raw) {
    auto [frames, tf] = normalize_frames(raw.frames);
    PointCloudSequence seq(std::move(frames));
    seq.normalization = tf;
    return {std::move(seq), tf};
}

SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (mesh.triangles.empty()) throw InputError("mesh has no triangles to sample");

    std::vector<double> cumulative(mesh.triangles.size());
    std::vector<Vec3> face_normals(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
        const auto& tri = mesh.triangles[f];
        const Vec3 a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3 ab = mesh.vertices[static_cast<std::size_t>(tri[1])] - a;
        const Vec3 ac = mesh.vertices[static_cast<std::size_t>(tri[2])] - a;
        const Vec3 cross = ab.cross(ac);
        const double area2 = cross.norm();
        total += 0.5 * area2;
        cumulative[f] = total;
        face_normals[f] = area2 > 0.0 ? Vec3(cross / area2) : Vec3(0.0, 0.0, 0.0);
    }
    if (!(total > 0.0)) throw InputError("mesh surface area is zero");

    SurfaceSamples out;
    out.points.reserve(n);
    out.normals.reserve(n);
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uniform_unit(gen) * total;
        const std::size_t f = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const std::size_t fi = std::min(f, mesh.triangles.size() - 1);
        const auto& tri = mesh.triangles[fi];
        const Vec3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vec3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vec3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        const double r1 = std::sqrt(uniform_unit(gen));
        const double r2 = uniform_unit(gen);
        out.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
        out.normals.push_back(face_normals[fi]);
    }
    return out;
}

}  // namespace defgrid
