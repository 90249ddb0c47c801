#include <doctest.h>

#include "defgrid/nn_index.hpp"
#include "support/oracles.hpp"

using namespace defgrid;

TEST_CASE("a one-point index answers every query with that point") {
    const std::vector<Vec3> pts{{0.5, -0.25, 1.0}};
    const NnIndex index(pts);
    for (const Vec3& q : test::random_points(50, -2, 2, 1)) {
        const auto r = index.nearest(q);
        CHECK(r.index == 0);
        CHECK(r.sq_dist == (q - pts[0]).squaredNorm());
    }
}

TEST_CASE("grid of 1000 points matches brute force on random queries") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            for (int k = 0; k < 10; ++k) pts.emplace_back(i * 0.1, j * 0.1, k * 0.1);
        }
    }
    const NnIndex index(pts);
    for (const Vec3& q : test::random_points(100, -0.2, 1.1, 7)) {
        const auto [bi, bd] = test::brute_force_nn(pts, q);
        const auto r = index.nearest(q);
        CHECK(r.index == bi);
        CHECK(r.sq_dist == bd);
    }
}

TEST_CASE("duplicate points return distance zero and a valid index") {
    std::vector<Vec3> pts(20, Vec3(0.3, 0.3, 0.3));
    const NnIndex index(pts);
    const auto r = index.nearest(Vec3(0.3, 0.3, 0.3));
    CHECK(r.sq_dist == 0.0);
    CHECK(r.index == 0);  // ties resolve to the smallest index
}

TEST_CASE("equidistant query resolves to the smaller index") {
    std::vector<Vec3> pts(10, Vec3(9, 9, 9));
    pts[3] = Vec3(1, 0, 0);
    pts[7] = Vec3(-1, 0, 0);
    const NnIndex index(pts);
    const auto r = index.nearest(Vec3(0, 0, 0));
    CHECK(r.index == 3);
    CHECK(r.sq_dist == 1.0);
}

TEST_CASE("5000 random points and queries match brute force exactly") {
    const auto pts = test::random_points(5000, -1, 1, 21);
    const NnIndex index(pts);
    for (const Vec3& q : test::random_points(5000, -1.2, 1.2, 22)) {
        const auto [bi, bd] = test::brute_force_nn(pts, q);
        const auto r = index.nearest(q);
        CHECK(r.index == bi);
        CHECK(r.sq_dist == bd);
    }
}

TEST_CASE("clustered clouds with exact duplicates stay exact") {
    auto pts = test::random_points(64, -0.1, 0.1, 5);
    auto dup = pts;
    pts.insert(pts.end(), dup.begin(), dup.end());
    const NnIndex index(pts);
    for (const Vec3& q : test::random_points(500, -0.3, 0.3, 6)) {
        const auto [bi, bd] = test::brute_force_nn(pts, q);
        const auto r = index.nearest(q);
        CHECK(r.index == bi);
        CHECK(r.sq_dist == bd);
    }
}

TEST_CASE("building over an empty cloud is rejected") {
    CHECK_THROWS_AS(NnIndex(std::vector<Vec3>{}), InputError);
}
