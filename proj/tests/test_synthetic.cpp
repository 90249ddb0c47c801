#include <doctest.h>

#include <cmath>

#include "defgrid/objective.hpp"
#include "defgrid/synthetic.hpp"
#include "support/oracles.hpp"

using namespace defgrid;

TEST_CASE("icosphere subdivision counts follow the closed form") {
    for (int s = 0; s <= 3; ++s) {
        const TriMesh mesh = make_icosphere(s, 1.0);
        const std::size_t faces = 20u << (2 * s);
        CHECK(mesh.triangle_count() == faces);
        CHECK(mesh.vertex_count() == 2 + faces / 2);
        for (const Vec3& v : mesh.vertices) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("bumpy spheres keep the vertex budget and break symmetry") {
    const TriMesh mesh = make_bumpy_sphere(3, 0.08, 0.12, 11);
    CHECK(mesh.vertex_count() == 642);
    double lo = 1e9, hi = 0;
    for (const Vec3& v : mesh.vertices) {
        lo = std::min(lo, v.norm());
        hi = std::max(hi, v.norm());
    }
    CHECK(hi > lo * 1.05);  // radial variation present
    CHECK(hi <= 0.08 * 1.13);
    CHECK(lo >= 0.08 * 0.87);
}

TEST_CASE("box meshes are closed and non-degenerate") {
    const TriMesh box = make_box(Vec3(0.6, 0.1, 0.1), Vec3i(24, 4, 4));
    // closed 2-manifold: E = 3F/2 and V - E + F = 2
    CHECK(box.edges.size() * 2 == box.triangle_count() * 3);
    CHECK(static_cast<long>(box.vertex_count()) -
              static_cast<long>(box.edges.size()) +
              static_cast<long>(box.triangle_count()) ==
          2);
}

TEST_CASE("rigid sphere scenes preserve edge lengths to 1e-12") {
    const SyntheticScene scene = make_rigid_sphere_scene(8, 100, 5.0, Vec3(0.02, 0, 0), 7);
    REQUIRE(scene.gt_meshes.size() == 9);
    const TriMesh& base = scene.gt_meshes[0];
    for (const auto& frame : scene.gt_meshes) {
        for (const auto& [i, j] : base.edges) {
            const double l0 = (base.vertices[i] - base.vertices[j]).norm();
            const double lt = (frame.vertices[i] - frame.vertices[j]).norm();
            CHECK(std::abs(lt - l0) < 1e-12);
        }
    }
}

TEST_CASE("scene generation is deterministic in the seed") {
    const SyntheticScene a = make_rigid_sphere_scene(3, 50, 5.0, Vec3(0.02, 0, 0), 42);
    const SyntheticScene b = make_rigid_sphere_scene(3, 50, 5.0, Vec3(0.02, 0, 0), 42);
    for (std::size_t t = 0; t < a.clouds.size(); ++t) {
        REQUIRE(a.clouds[t].size() == b.clouds[t].size());
        for (std::size_t i = 0; i < a.clouds[t].size(); ++i) {
            CHECK(a.clouds[t].points[i] == b.clouds[t].points[i]);
        }
    }
}

TEST_CASE("scaling cube isometry matches the closed form under uniform scaling") {
    const double s = 1.1;
    const SyntheticScene scene = make_scaling_cube_scene(4, 50, Vec3(s, s, s), 3);
    const TriMesh& base = scene.gt_meshes[0];

    std::vector<std::vector<Vec3>> positions;
    for (const auto& m : scene.gt_meshes) positions.push_back(m.vertices);
    const double got = isometry_from_positions(base, positions, 0);

    double edge_sum = 0.0;
    for (const auto& [i, j] : base.edges) {
        edge_sum += (base.vertices[i] - base.vertices[j]).norm();
    }
    double expected = 0.0;
    for (int t = 1; t <= 4; ++t) expected += (s - 1.0) * std::pow(s, t - 1) * edge_sum;
    expected /= 4.0 * static_cast<double>(base.edges.size());
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got > 0.0);
}

TEST_CASE("bending bars bend progressively along the axis") {
    const SyntheticScene scene = make_bending_bar_scene(8, 100, 45.0, 5);
    const TriMesh& base = scene.gt_meshes[0];
    const TriMesh& last = scene.gt_meshes[8];
    // the left end stays put, the right tip moves
    double left_motion = 0, right_motion = 0;
    for (std::size_t i = 0; i < base.vertex_count(); ++i) {
        const double shift = (last.vertices[i] - base.vertices[i]).norm();
        if (base.vertices[i].x() < -0.55) left_motion = std::max(left_motion, shift);
        if (base.vertices[i].x() > 0.55) right_motion = std::max(right_motion, shift);
    }
    CHECK(left_motion < 0.05);
    CHECK(right_motion > 0.5);
    // z is untouched by the planar bend
    for (std::size_t i = 0; i < base.vertex_count(); ++i) {
        CHECK(last.vertices[i].z() == base.vertices[i].z());
    }
}

TEST_CASE("noise injection scales with the bounding-box diagonal") {
    const SyntheticScene scene = make_rigid_sphere_scene(2, 400, 5.0, Vec3(0.02, 0, 0), 9);
    auto noisy = scene.clouds;
    add_noise(noisy, 0.5, 21);

    std::vector<Vec3> all;
    for (const auto& c : scene.clouds) all.insert(all.end(), c.points.begin(), c.points.end());
    const double diag = bounding_box(all).diagonal();
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < noisy.size(); ++t) {
        for (std::size_t i = 0; i < noisy[t].size(); ++i) {
            acc += (noisy[t].points[i] - scene.clouds[t].points[i]).squaredNorm();
            ++n;
        }
    }
    const double rms = std::sqrt(acc / static_cast<double>(n));
    // per-coordinate sigma 0.005 * diag means rms displacement sqrt(3) sigma
    CHECK(rms == doctest::Approx(std::sqrt(3.0) * 0.005 * diag).epsilon(0.05));
    add_noise(noisy, 0.0, 22);  // no-op
}

TEST_CASE("track frames mirror ground-truth vertices") {
    const SyntheticScene scene = make_bending_bar_scene(3, 60, 30.0, 13);
    for (std::size_t t = 0; t < scene.gt_meshes.size(); ++t) {
        REQUIRE(scene.tracks[t].size() == scene.gt_meshes[t].vertex_count());
        for (std::size_t i = 0; i < scene.tracks[t].size(); ++i) {
            CHECK(scene.tracks[t][i] == scene.gt_meshes[t].vertices[i]);
        }
    }
}
