#include <doctest.h>

#include "defgrid/laplacian.hpp"
#include "defgrid/rng.hpp"
#include "defgrid/synthetic.hpp"
#include "support/oracles.hpp"

using namespace defgrid;

namespace {

Eigen::MatrixXd random_gradient(int n, int channels, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Eigen::MatrixXd g(n, channels);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) g(i, c) = uniform_range(gen, -1, 1);
    }
    return g;
}

}  // namespace

TEST_CASE("single node operator is a pure identity scaling") {
    const GridLevel one = GridLevel::dense(1);
    const LaplacianOperator op = build_grid_laplacian(one, 0.25);
    CHECK(op.node_count() == 1);
    CHECK(op.laplacian().coeff(0, 0) == 0.0);
    Eigen::MatrixXd g(1, 6);
    g << 1, -2, 3, -4, 5, -6;
    CHECK((op.smooth(g) - g).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("two adjacent vertices produce the path Laplacian") {
    const std::vector<std::pair<int, int>> edges{{0, 1}};
    const LaplacianOperator op(2, edges, 1.0);
    CHECK(op.laplacian().coeff(0, 0) == 1.0);
    CHECK(op.laplacian().coeff(0, 1) == -1.0);
    CHECK(op.laplacian().coeff(1, 0) == -1.0);
    CHECK(op.laplacian().coeff(1, 1) == 1.0);
}

TEST_CASE("strong smoothing drives an opposing pair toward its mean") {
    const std::vector<std::pair<int, int>> edges{{0, 1}};
    const LaplacianOperator op(2, edges, 1e6);
    Eigen::MatrixXd g(2, 1);
    g << 1.0, -1.0;
    const Eigen::MatrixXd x = op.smooth(g);
    CHECK(std::abs(x(0, 0)) < 1e-5);
    CHECK(std::abs(x(0, 0) + x(1, 0)) < 1e-12);  // mean preserved
}

TEST_CASE("triangle mesh Laplacian matches the closed form") {
    const TriMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    const LaplacianOperator op = build_mesh_laplacian(tri, 16.0);
    Eigen::MatrixXd expected(3, 3);
    expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    CHECK((Eigen::MatrixXd(op.laplacian()) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("row sums vanish and the matrix is symmetric on a pruned level") {
    const auto pts = test::sphere_points(1000, 0.6, 3);
    std::vector<PointCloud> frames{PointCloud(pts), PointCloud(pts)};
    const auto grids = build_pruned(6, PointCloudSequence(std::move(frames)));
    const GridLevel& level = grids[0].levels[5];
    const LaplacianOperator op = build_grid_laplacian(level, 0.5);
    const Eigen::MatrixXd dense(op.laplacian());
    CHECK(dense.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("5x5x5 lattice smoothing matches the dense oracle to 1e-10") {
    const GridLevel level = GridLevel::dense(3);
    REQUIRE(level.resolution == 5);
    const LaplacianOperator op = build_grid_laplacian(level, 0.25);
    const Eigen::MatrixXd g = random_gradient(op.node_count(), 6, 11);
    const Eigen::MatrixXd x = op.smooth(g);
    const Eigen::MatrixXd oracle = test::dense_squared_solve(Eigen::MatrixXd(op.laplacian()),
                                                             0.25, g);
    CHECK((x - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("icosphere mesh smoothing at lambda 16 matches the dense oracle") {
    const TriMesh mesh = make_icosphere(3, 1.0);
    REQUIRE(mesh.vertex_count() == 642);
    const LaplacianOperator op = build_mesh_laplacian(mesh, 16.0);
    const Eigen::MatrixXd g = random_gradient(642, 3, 12);
    const Eigen::MatrixXd x = op.smooth(g);
    const Eigen::MatrixXd oracle =
        test::dense_squared_solve(Eigen::MatrixXd(op.laplacian()), 16.0, g);
    CHECK((x - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("constant gradients pass through unchanged") {
    const GridLevel level = GridLevel::dense(3);
    const LaplacianOperator op = build_grid_laplacian(level, 7.5);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Constant(op.node_count(), 6, -0.83);
    CHECK((op.smooth(g) - g).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("smoothing preserves per-component means and never expands the norm") {
    const GridLevel level = GridLevel::dense(4);
    const LaplacianOperator op = build_grid_laplacian(level, 2.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd g = random_gradient(op.node_count(), 6, 100 + seed);
        const Eigen::MatrixXd x = op.smooth(g);
        // the lattice is connected, so the global mean per channel is invariant
        CHECK((x.colwise().mean() - g.colwise().mean()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(x.norm() <= g.norm());
    }
}

TEST_CASE("vanishing lambda approaches the identity") {
    const GridLevel level = GridLevel::dense(3);
    const LaplacianOperator op = build_grid_laplacian(level, 1e-12);
    const Eigen::MatrixXd g = random_gradient(op.node_count(), 6, 21);
    const Eigen::MatrixXd x = op.smooth(g);
    CHECK((x - g).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("factorizations happen once per operator, not per smooth") {
    const GridLevel level = GridLevel::dense(2);
    const LaplacianOperator op = build_grid_laplacian(level, 0.25);
    const auto count_before = LaplacianOperator::factorization_count();
    const Eigen::MatrixXd g = random_gradient(op.node_count(), 6, 31);
    for (int i = 0; i < 50; ++i) op.smooth(g);
    CHECK(LaplacianOperator::factorization_count() == count_before);
}

TEST_CASE("dimension mismatches are rejected") {
    const GridLevel level = GridLevel::dense(2);
    const LaplacianOperator op = build_grid_laplacian(level, 0.25);
    CHECK_THROWS_AS(op.smooth(Eigen::MatrixXd::Zero(5, 6)), InputError);
    CHECK_THROWS_AS(LaplacianOperator(3, std::vector<std::pair<int, int>>{{0, 3}}, 1.0),
                    InputError);
    CHECK_THROWS_AS(build_grid_laplacian(level, 0.0), InputError);
}

TEST_CASE("disconnected graphs stay solvable through the identity shift") {
    const std::vector<std::pair<int, int>> edges{{0, 1}};  // node 2 isolated
    const LaplacianOperator op(3, edges, 4.0);
    Eigen::MatrixXd g(3, 1);
    g << 0.5, -0.5, 0.7;
    const Eigen::MatrixXd x = op.smooth(g);
    CHECK(x(2, 0) == doctest::Approx(0.7));  // isolated node untouched
    CHECK(std::abs(x(0, 0) + x(1, 0)) < 1e-12);
}
