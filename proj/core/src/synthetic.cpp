#include "defgrid/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "defgrid/io.hpp"
#include "defgrid/rng.hpp"
#include "defgrid/transform.hpp"

namespace defgrid {

namespace {

TriMesh subdivide_projected(const TriMesh& mesh, double radius) {
    std::vector<Vec3> verts = mesh.vertices;
    std::vector<std::array<int, 3>> tris;
    tris.reserve(mesh.triangles.size() * 4);
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        Vec3 m = 0.5 * (verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]);
        m = radius * m.normalized();
        const int idx = static_cast<int>(verts.size());
        verts.push_back(m);
        midpoint.emplace(key, idx);
        return idx;
    };
    for (const auto& t : mesh.triangles) {
        const int ab = mid(t[0], t[1]);
        const int bc = mid(t[1], t[2]);
        const int ca = mid(t[2], t[0]);
        tris.push_back({t[0], ab, ca});
        tris.push_back({t[1], bc, ab});
        tris.push_back({t[2], ca, bc});
        tris.push_back({ab, bc, ca});
    }
    return TriMesh(std::move(verts), std::move(tris));
}

}  // namespace

TriMesh make_icosphere(int subdivisions, double radius) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1},
    };
    for (Vec3& v : verts) v = radius * v.normalized();
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    TriMesh mesh(std::move(verts), std::move(tris));
    for (int s = 0; s < subdivisions; ++s) mesh = subdivide_projected(mesh, radius);
    return mesh;
}

TriMesh make_bumpy_sphere(int subdivisions, double radius, double bump_amplitude,
                          std::uint64_t seed) {
    TriMesh sphere = make_icosphere(subdivisions, 1.0);
    std::mt19937_64 gen(seed);
    constexpr int kLobes = 6;
    Vec3 axes[kLobes];
    double freq[kLobes], amp[kLobes], phase[kLobes];
    for (int k = 0; k < kLobes; ++k) {
        Vec3 u(normal_unit(gen), normal_unit(gen), normal_unit(gen));
        axes[k] = u.norm() > 0 ? Vec3(u.normalized()) : Vec3(1, 0, 0);
        freq[k] = uniform_range(gen, 1.5, 3.5);
        amp[k] = uniform_range(gen, 0.5, 1.0);
        phase[k] = uniform_range(gen, 0.0, 6.283185307179586);
    }
    double amp_sum = 0.0;
    for (int k = 0; k < kLobes; ++k) amp_sum += amp[k];

    std::vector<Vec3> verts;
    verts.reserve(sphere.vertices.size());
    for (const Vec3& v : sphere.vertices) {
        const Vec3 d = v.normalized();
        double bump = 0.0;
        for (int k = 0; k < kLobes; ++k) {
            bump += amp[k] * std::sin(freq[k] * d.dot(axes[k]) * 3.0 + phase[k]);
        }
        bump /= amp_sum;
        verts.push_back(radius * (1.0 + bump_amplitude * bump) * d);
    }
    return TriMesh(std::move(verts), sphere.triangles);
}

TriMesh make_box(const Vec3& half_extents, const Vec3i& segments) {
    for (int a = 0; a < 3; ++a) {
        if (segments[a] < 1 || half_extents[a] <= 0.0) throw InputError("bad box parameters");
    }
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    std::map<std::array<long, 3>, int> dedup;

    auto vertex_at = [&](long i, long j, long k) {
        const std::array<long, 3> key = {i, j, k};
        auto it = dedup.find(key);
        if (it != dedup.end()) return it->second;
        const Vec3 p(-half_extents.x() + 2.0 * half_extents.x() * i / segments.x(),
                     -half_extents.y() + 2.0 * half_extents.y() * j / segments.y(),
                     -half_extents.z() + 2.0 * half_extents.z() * k / segments.z());
        const int idx = static_cast<int>(verts.size());
        verts.push_back(p);
        dedup.emplace(key, idx);
        return idx;
    };

    // axis = face normal direction, sign = which side; (u, v) run over the face
    auto emit_face = [&](int axis, int sign) {
        const int ua = (axis + 1) % 3;
        const int va = (axis + 2) % 3;
        const long nu = segments[ua], nv = segments[va];
        for (long u = 0; u < nu; ++u) {
            for (long v = 0; v < nv; ++v) {
                long c[4][3];
                for (int corner = 0; corner < 4; ++corner) {
                    const long du = corner == 1 || corner == 2 ? 1 : 0;
                    const long dv = corner >= 2 ? 1 : 0;
                    c[corner][axis] = sign > 0 ? segments[axis] : 0;
                    c[corner][ua] = u + du;
                    c[corner][va] = v + dv;
                }
                const int v0 = vertex_at(c[0][0], c[0][1], c[0][2]);
                const int v1 = vertex_at(c[1][0], c[1][1], c[1][2]);
                const int v2 = vertex_at(c[2][0], c[2][1], c[2][2]);
                const int v3 = vertex_at(c[3][0], c[3][1], c[3][2]);
                if (sign > 0) {
                    tris.push_back({v0, v1, v2});
                    tris.push_back({v0, v2, v3});
                } else {
                    tris.push_back({v0, v2, v1});
                    tris.push_back({v0, v3, v2});
                }
            }
        }
    };
    for (int axis = 0; axis < 3; ++axis) {
        emit_face(axis, +1);
        emit_face(axis, -1);
    }
    return TriMesh(std::move(verts), std::move(tris));
}

namespace {

SyntheticScene scene_from_frames(std::vector<TriMesh> frames, int points_per_frame,
                                 std::uint64_t seed) {
    SyntheticScene scene;
    scene.gt_meshes = std::move(frames);
    scene.clouds.reserve(scene.gt_meshes.size());
    scene.tracks.reserve(scene.gt_meshes.size());
    for (std::size_t t = 0; t < scene.gt_meshes.size(); ++t) {
        const std::uint64_t frame_seed = seed ^ (0x9E3779B97F4A7C15ull * (t + 1));
        auto samples = sample_surface(scene.gt_meshes[t],
                                      static_cast<std::size_t>(points_per_frame), frame_seed);
        scene.clouds.emplace_back(std::move(samples.points));
        scene.tracks.push_back(scene.gt_meshes[t].vertices);
    }
    return scene;
}

}  // namespace

SyntheticScene make_rigid_sphere_scene(int transitions, int points_per_frame,
                                       double degrees_per_frame, const Vec3& translation_per_frame,
                                       std::uint64_t seed) {
    if (transitions < 1 || points_per_frame < 1) throw InputError("bad scene parameters");
    // Small body relative to its travel: the joint bounding box is dominated
    // by the motion, leaving the transformation grids room to prune.
    const TriMesh base = make_bumpy_sphere(/*subdivisions=*/3, /*radius=*/0.08,
                                           /*bump_amplitude=*/0.12, seed);
    const double step_rad = degrees_per_frame * M_PI / 180.0;
    const Vec3 axis = Vec3(0.3, 1.0, 0.2).normalized();

    std::vector<TriMesh> frames;
    frames.reserve(static_cast<std::size_t>(transitions) + 1);
    for (int t = 0; t <= transitions; ++t) {
        const Mat3 rot = Eigen::AngleAxisd(step_rad * t, axis).toRotationMatrix();
        const Vec3 shift = static_cast<double>(t) * translation_per_frame;
        std::vector<Vec3> verts;
        verts.reserve(base.vertices.size());
        for (const Vec3& v : base.vertices) verts.push_back(rot * v + shift);
        frames.emplace_back(std::move(verts), base.triangles);
    }
    return scene_from_frames(std::move(frames), points_per_frame, seed);
}

SyntheticScene make_bending_bar_scene(int transitions, int points_per_frame,
                                      double max_bend_degrees, std::uint64_t seed) {
    if (transitions < 1 || points_per_frame < 1) throw InputError("bad scene parameters");
    const Vec3 half(0.6, 0.1, 0.1);
    const TriMesh base = make_box(half, Vec3i(24, 4, 4));
    const double bend_rad = max_bend_degrees * M_PI / 180.0;
    const Vec3 pivot(-half.x(), 0.0, 0.0);

    std::vector<TriMesh> frames;
    frames.reserve(static_cast<std::size_t>(transitions) + 1);
    for (int t = 0; t <= transitions; ++t) {
        const double progress = static_cast<double>(t) / transitions;
        std::vector<Vec3> verts;
        verts.reserve(base.vertices.size());
        for (const Vec3& v : base.vertices) {
            const double s = (v.x() + half.x()) / (2.0 * half.x());
            const double angle = bend_rad * progress * s;
            const Vec3 rel = v - pivot;
            const double c = std::cos(angle), sn = std::sin(angle);
            verts.emplace_back(pivot.x() + c * rel.x() - sn * rel.y(),
                               pivot.y() + sn * rel.x() + c * rel.y(), v.z());
        }
        frames.emplace_back(std::move(verts), base.triangles);
    }
    return scene_from_frames(std::move(frames), points_per_frame, seed);
}

SyntheticScene make_scaling_cube_scene(int transitions, int points_per_frame,
                                       const Vec3& scale_per_frame, std::uint64_t seed) {
    if (transitions < 1 || points_per_frame < 1) throw InputError("bad scene parameters");
    const TriMesh base = make_box(Vec3(0.5, 0.5, 0.5), Vec3i(6, 6, 6));

    std::vector<TriMesh> frames;
    frames.reserve(static_cast<std::size_t>(transitions) + 1);
    for (int t = 0; t <= transitions; ++t) {
        Vec3 s(std::pow(scale_per_frame.x(), t), std::pow(scale_per_frame.y(), t),
               std::pow(scale_per_frame.z(), t));
        std::vector<Vec3> verts;
        verts.reserve(base.vertices.size());
        for (const Vec3& v : base.vertices) verts.push_back(v.cwiseProduct(s));
        frames.emplace_back(std::move(verts), base.triangles);
    }
    return scene_from_frames(std::move(frames), points_per_frame, seed);
}

void add_noise(std::vector<PointCloud>& clouds, double pct_of_diagonal, std::uint64_t seed) {
    if (pct_of_diagonal <= 0.0) return;
    std::vector<Vec3> all;
    for (const auto& c : clouds) all.insert(all.end(), c.points.begin(), c.points.end());
    const double sigma = pct_of_diagonal / 100.0 * bounding_box(all).diagonal();
    std::mt19937_64 gen(seed);
    for (auto& cloud : clouds) {
        for (Vec3& p : cloud.points) {
            p += sigma * Vec3(normal_unit(gen), normal_unit(gen), normal_unit(gen));
        }
    }
}

void write_scene(const std::string& dir, const SyntheticScene& scene) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "clouds");
    fs::create_directories(fs::path(dir) / "gt");
    fs::create_directories(fs::path(dir) / "tracks");
    char name[64];
    for (std::size_t t = 0; t < scene.gt_meshes.size(); ++t) {
        std::snprintf(name, sizeof(name), "frame_%04zu", t);
        write_xyz((fs::path(dir) / "clouds" / (std::string(name) + ".xyz")).string(),
                  scene.clouds[t].points);
        write_obj((fs::path(dir) / "gt" / (std::string(name) + ".obj")).string(),
                  scene.gt_meshes[t]);
        write_xyz((fs::path(dir) / "tracks" / (std::string(name) + ".xyz")).string(),
                  scene.tracks[t]);
    }
}

}  // namespace defgrid
