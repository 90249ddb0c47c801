#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "defgrid/grid.hpp"
#include "defgrid/rng.hpp"
#include "defgrid/synthetic.hpp"
#include "support/oracles.hpp"

using namespace defgrid;

namespace {

PointCloudSequence two_frames(std::vector<Vec3> a, std::vector<Vec3> b) {
    std::vector<PointCloud> frames;
    frames.emplace_back(std::move(a));
    frames.emplace_back(std::move(b));
    return PointCloudSequence(std::move(frames));
}

}  // namespace

TEST_CASE("cayley of zero is the identity") {
    CHECK(cayley_rotation(Vec3::Zero()) == Mat3::Identity());
}

TEST_CASE("cayley of (0,0,1) is a 90 degree rotation about +z") {
    const Mat3 r = cayley_rotation(Vec3(0, 0, 1));
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cayley is orthogonal with unit determinant for large z") {
    std::mt19937_64 gen(17);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 z(uniform_range(gen, -10, 10), uniform_range(gen, -10, 10),
                     uniform_range(gen, -10, 10));
        const Mat3 r = cayley_rotation(z);
        CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("apply_transform examples") {
    CHECK(apply_transform(Transform6{}, Vec3(0.3, -0.1, 0.9)) == Vec3(0.3, -0.1, 0.9));
    CHECK(apply_transform(Transform6(Vec3::Zero(), Vec3(1, 0, 0)), Vec3::Zero()) ==
          Vec3(1, 0, 0));
    const Vec3 rotated = apply_transform(Transform6(Vec3(0, 0, 1), Vec3::Zero()), Vec3(1, 0, 0));
    CHECK((rotated - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("level resolutions follow 2l-1 and level one is global") {
    for (int l = 1; l <= 10; ++l) {
        CHECK(GridLevel::resolution_for(l) == 2 * l - 1);
    }
    const GridLevel one = GridLevel::dense(1);
    CHECK(one.resolution == 1);
    CHECK(one.active_count() == 1);
}

TEST_CASE("interpolation with all-zero parameters is the identity motion") {
    const auto seq = two_frames(test::random_points(100, -0.9, 0.9, 1),
                                test::random_points(100, -0.9, 0.9, 2));
    const auto grids = build_pruned(4, seq);
    std::mt19937_64 gen(3);
    for (int i = 0; i < 100; ++i) {
        const Vec3 x(uniform_range(gen, -1, 1), uniform_range(gen, -1, 1),
                     uniform_range(gen, -1, 1));
        const Transform6 tf = interpolate(grids[0], x);
        CHECK(tf.is_zero());
        CHECK(apply_grid_step(grids[0], x) == x);
    }
}

TEST_CASE("interpolation at an active lattice vertex uses weight one per level") {
    DeformationGrid grid;
    grid.levels.push_back(GridLevel::dense(1));
    grid.levels.push_back(GridLevel::dense(2));
    // vertex (1,1,1) of level 2 is the domain center, like level 1's vertex
    grid.levels[0].params[0] = Transform6(Vec3(0.1, 0, 0), Vec3(0, 0.2, 0));
    const int slot = grid.levels[1].slot_at(1, 1, 1);
    grid.levels[1].params[static_cast<std::size_t>(slot)] =
        Transform6(Vec3(0, 0.3, 0), Vec3(0.4, 0, 0));

    const Transform6 tf = interpolate(grid, Vec3(0, 0, 0));
    CHECK(tf.z == Vec3(0.05, 0.15, 0));
    CHECK(tf.t == Vec3(0.2, 0.1, 0));
}

TEST_CASE("interpolation at a cell center averages the 8 corners") {
    DeformationGrid grid;
    grid.levels.push_back(GridLevel::dense(1));
    grid.levels.push_back(GridLevel::dense(2));
    std::mt19937_64 gen(5);
    Transform6 expected_l2;
    for (int i = 0; i <= 1; ++i) {
        for (int j = 0; j <= 1; ++j) {
            for (int k = 0; k <= 1; ++k) {
                Transform6 p;
                for (int c = 0; c < 6; ++c) p.channel(c) = uniform_range(gen, -1, 1);
                const int slot = grid.levels[1].slot_at(i, j, k);
                grid.levels[1].params[static_cast<std::size_t>(slot)] = p;
                expected_l2 += 0.125 * p;
            }
        }
    }
    // center of the cell spanned by vertices (0,0,0)..(1,1,1) of the r=3 lattice
    const Vec3 x(-0.5, -0.5, -0.5);
    const Transform6 tf = interpolate(grid, x);
    CHECK((tf.z - 0.5 * expected_l2.z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tf.t - 0.5 * expected_l2.t).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("partition of unity holds over clamped random queries") {
    const auto seq = two_frames(test::random_points(500, -1, 1, 8),
                                test::random_points(500, -1, 1, 9));
    const auto grids = build_pruned(10, seq);
    std::mt19937_64 gen(10);
    for (int q = 0; q < 10000; ++q) {
        const Vec3 x(uniform_range(gen, -1.5, 1.5), uniform_range(gen, -1.5, 1.5),
                     uniform_range(gen, -1.5, 1.5));
        const Vec3 xc = clamp_to_domain(x);
        for (const auto& level : grids[0].levels) {
            const LevelStencil st = make_stencil(level, xc);
            double sum = 0.0;
            for (int c = 0; c < st.count; ++c) sum += st.weights[c];
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("level one is always fully active after pruning") {
    const auto seq = two_frames({{0.9, 0.9, 0.9}}, {{-0.9, -0.9, -0.9}});
    const auto grids = build_pruned(3, seq);
    CHECK(grids[0].levels[0].active_count() == 1);
}

TEST_CASE("a single point activates the clipped 7x7x7 chebyshev ball") {
    const auto seq = two_frames({{0.0, 0.0, 0.0}}, {{0.0, 0.0, 0.0}});
    const auto grids = build_pruned(10, seq);
    const GridLevel& finest = grids[0].levels[9];
    REQUIRE(finest.resolution == 19);

    // enumeration oracle: the point rounds to vertex (9,9,9); actives are all
    // vertices within chebyshev distance 3
    int oracle = 0;
    for (int i = 0; i < 19; ++i) {
        for (int j = 0; j < 19; ++j) {
            for (int k = 0; k < 19; ++k) {
                if (std::abs(i - 9) <= 3 && std::abs(j - 9) <= 3 && std::abs(k - 9) <= 3) {
                    ++oracle;
                    CHECK(finest.slot_at(i, j, k) >= 0);
                } else {
                    CHECK(finest.slot_at(i, j, k) < 0);
                }
            }
        }
    }
    CHECK(oracle == 343);
    CHECK(finest.active_count() == 343);
}

TEST_CASE("a boundary point's dilation ball is clipped") {
    const auto seq = two_frames({{-1.0, -1.0, -1.0}}, {{-1.0, -1.0, -1.0}});
    const auto grids = build_pruned(10, seq);
    const GridLevel& finest = grids[0].levels[9];
    CHECK(finest.active_count() == 4 * 4 * 4);
}

TEST_CASE("sphere cloud at L=10 prunes to under 70 percent of dense") {
    const auto cloud = test::sphere_points(5000, 0.5, 33);
    const auto seq = two_frames(cloud, cloud);
    const auto grids = build_pruned(10, seq);
    std::size_t active = 0, dense = 0;
    for (const auto& level : grids[0].levels) {
        active += static_cast<std::size_t>(level.active_count());
        dense += static_cast<std::size_t>(level.resolution) * level.resolution * level.resolution;
    }
    const double fraction = static_cast<double>(active) / static_cast<double>(dense);
    MESSAGE("active fraction: ", fraction);
    CHECK(fraction <= 0.70);
}

TEST_CASE("grid sequence indexing covers every transition once") {
    std::vector<PointCloud> frames;
    for (int f = 0; f < 5; ++f) frames.emplace_back(test::random_points(20, -0.5, 0.5, 40 + f));
    PointCloudSequence seq(std::move(frames));
    const GridSequence gs = GridSequence::build(seq, 2, 2);
    CHECK(gs.forward_count() == 2);
    CHECK(gs.backward_count() == 2);
    CHECK(gs.grid_index_for_frame(3) == 0);
    CHECK(gs.grid_index_for_frame(4) == 1);
    CHECK(gs.grid_index_for_frame(1) == 2);
    CHECK(gs.grid_index_for_frame(0) == 3);
    CHECK_THROWS_AS(gs.grid_index_for_frame(2), InputError);
    CHECK_THROWS_AS(gs.grid_index_for_frame(5), InputError);
    CHECK(gs.grids[0].direction == TimeDirection::Forward);
    CHECK(gs.grids[2].direction == TimeDirection::Backward);
}

TEST_CASE("deform to the keyframe returns the base points unchanged") {
    std::vector<PointCloud> frames;
    for (int f = 0; f < 3; ++f) frames.emplace_back(test::random_points(20, -0.5, 0.5, 50 + f));
    PointCloudSequence seq(std::move(frames));
    GridSequence gs = GridSequence::build(seq, 1, 2);
    const auto base = test::random_points(10, -0.5, 0.5, 60);
    const auto out = deform_points(gs, base, 1);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(out[i] == base[i]);
    CHECK_THROWS_AS(deform_points(gs, base, 3), InputError);
    CHECK_THROWS_AS(deform_points(gs, base, -1), InputError);
}

TEST_CASE("chained level-one rigid motions match the matrix product oracle") {
    std::vector<PointCloud> frames;
    for (int f = 0; f < 3; ++f) frames.emplace_back(test::random_points(30, -0.4, 0.4, 70 + f));
    PointCloudSequence seq(std::move(frames));
    GridSequence gs = GridSequence::build(seq, 0, 1);

    const Transform6 m1(Vec3(0.05, -0.02, 0.04), Vec3(0.1, 0.0, -0.05));
    const Transform6 m2(Vec3(-0.03, 0.06, 0.01), Vec3(-0.02, 0.08, 0.03));
    gs.grids[0].levels[0].params[0] = m1;
    gs.grids[1].levels[0].params[0] = m2;

    const TriMesh ico = make_icosphere(2, 0.3);
    const auto deformed = deform_points(gs, ico.vertices, 2);
    const Mat3 r1 = cayley_rotation(m1.z);
    const Mat3 r2 = cayley_rotation(m2.z);
    for (std::size_t i = 0; i < ico.vertices.size(); ++i) {
        const Vec3 expected = r2 * (r1 * ico.vertices[i] + m1.t) + m2.t;
        CHECK((deformed[i] - expected).norm() < 1e-9);
    }
}

TEST_CASE("recursion consistency: full walk equals stepwise walk bitwise") {
    std::vector<PointCloud> frames;
    for (int f = 0; f < 4; ++f) frames.emplace_back(test::random_points(40, -0.6, 0.6, 80 + f));
    PointCloudSequence seq(std::move(frames));
    GridSequence gs = GridSequence::build(seq, 0, 3);
    std::mt19937_64 gen(90);
    for (auto& grid : gs.grids) {
        for (auto& level : grid.levels) {
            for (auto& p : level.params) {
                for (int c = 0; c < 6; ++c) p.channel(c) = uniform_range(gen, -0.2, 0.2);
            }
        }
    }
    const auto base = test::random_points(25, -0.5, 0.5, 91);
    const auto direct = deform_points(gs, base, 3);
    auto stepwise = deform_points(gs, base, 2);
    const DeformationGrid& last = gs.grid_for_frame(3);
    for (Vec3& p : stepwise) p = apply_grid_step(last, p);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(direct[i] == stepwise[i]);
}

TEST_CASE("perturbing one vertex parameter only affects its one-cell support") {
    const auto seq = two_frames(test::random_points(400, -1, 1, 100),
                                test::random_points(400, -1, 1, 101));
    auto grids = build_pruned(3, seq);
    DeformationGrid& grid = grids[0];
    GridLevel& level = grid.levels[2];  // r = 5
    REQUIRE(level.resolution == 5);
    const int slot = level.slot_at(2, 2, 2);
    REQUIRE(slot >= 0);

    std::mt19937_64 gen(102);
    std::vector<Vec3> queries;
    for (int q = 0; q < 2000; ++q) {
        queries.emplace_back(uniform_range(gen, -1, 1), uniform_range(gen, -1, 1),
                             uniform_range(gen, -1, 1));
    }
    std::vector<Transform6> before;
    before.reserve(queries.size());
    for (const Vec3& q : queries) before.push_back(interpolate(grid, q));

    level.params[static_cast<std::size_t>(slot)] = Transform6(Vec3(0.5, 0, 0), Vec3(0, 0, 0.5));
    const double h = level.spacing();
    const Vec3 vpos = level.vertex_position(Vec3i(2, 2, 2));
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const Transform6 after = interpolate(grid, queries[i]);
        const bool in_support = (queries[i] - vpos).cwiseAbs().maxCoeff() < h;
        const bool changed = !(after.z == before[i].z && after.t == before[i].t);
        if (!in_support) CHECK_FALSE(changed);
    }
}

TEST_CASE("grid checkpoints round trip") {
    std::vector<PointCloud> frames;
    for (int f = 0; f < 3; ++f) frames.emplace_back(test::random_points(50, -0.8, 0.8, 110 + f));
    PointCloudSequence seq(std::move(frames));
    GridSequence gs = GridSequence::build(seq, 1, 4);
    std::mt19937_64 gen(111);
    for (auto& grid : gs.grids) {
        for (auto& level : grid.levels) {
            for (auto& p : level.params) {
                for (int c = 0; c < 6; ++c) p.channel(c) = uniform_range(gen, -1, 1);
            }
        }
    }
    const std::string path =
        (std::filesystem::temp_directory_path() / "defgrid_ckpt_test.bin").string();
    save_grid_checkpoint(path, gs);
    const GridSequence loaded = load_grid_checkpoint(path);
    CHECK(loaded.keyframe == gs.keyframe);
    CHECK(loaded.frame_count == gs.frame_count);
    REQUIRE(loaded.grids.size() == gs.grids.size());
    for (std::size_t g = 0; g < gs.grids.size(); ++g) {
        CHECK(loaded.grids[g].direction == gs.grids[g].direction);
        REQUIRE(loaded.grids[g].levels.size() == gs.grids[g].levels.size());
        for (std::size_t l = 0; l < gs.grids[g].levels.size(); ++l) {
            const auto& a = loaded.grids[g].levels[l];
            const auto& b = gs.grids[g].levels[l];
            CHECK(a.resolution == b.resolution);
            CHECK(a.slot == b.slot);
            REQUIRE(a.params.size() == b.params.size());
            for (std::size_t s = 0; s < a.params.size(); ++s) {
                CHECK(a.params[s].z == b.params[s].z);
                CHECK(a.params[s].t == b.params[s].t);
            }
        }
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_grid_checkpoint("/nonexistent/checkpoint.bin"), InputError);
}
