#include "fixtures.hpp"

#include "itdre/errors.hpp"
#include "itdre/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace itdre;

namespace {

std::vector<double> pt(std::initializer_list<double> v) { return {v}; }

}  // namespace

TEST(Gaussian, Examples) {
    EXPECT_DOUBLE_EQ(gaussian_eval(pt({0.3, -1.0, 2.0}), pt({0.3, -1.0, 2.0}), 1.0), 1.0);
    EXPECT_NEAR(gaussian_eval(pt({0.0}), pt({1.0}), 1.0), 0.60653066, 1e-8);
    EXPECT_DOUBLE_EQ(gaussian_eval(pt({0.0, 0.0}), pt({3.0, 4.0}), 5.0), std::exp(-0.5));
}

TEST(Gaussian, RejectsBadInput) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(gaussian_eval(pt({nan}), pt({0.0}), 1.0), InvalidInput);
    EXPECT_THROW(gaussian_eval(pt({0.0}), pt({INFINITY}), 1.0), InvalidInput);
    EXPECT_THROW(KernelSpec::gaussian(0.0), InvalidInput);
    EXPECT_THROW(KernelSpec::gaussian(-1.0), InvalidInput);
}

TEST(Gaussian, Bounded) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> x = {normal(rng), normal(rng)};
        const std::vector<double> y = {normal(rng), normal(rng)};
        const double k = gaussian_eval(x, y, 0.7);
        EXPECT_GT(k, 0.0);
        EXPECT_LT(k, 1.0);
    }
}

TEST(MedianBandwidth, Examples) {
    EXPECT_DOUBLE_EQ(median_bandwidth(make_points({{0.0}, {1.0}, {3.0}})), 2.0);
    EXPECT_DOUBLE_EQ(median_bandwidth(make_points({{0.0}, {2.0}})), 2.0);
    EXPECT_DOUBLE_EQ(median_bandwidth(make_points({{0.0, 0.0}, {3.0, 4.0}, {0.0, 0.0}})), 5.0);
    // distances 1 2 3 4 6 7: even count averages the middle pair
    EXPECT_DOUBLE_EQ(median_bandwidth(make_points({{0.0}, {1.0}, {3.0}, {7.0}})), 3.5);
}

TEST(MedianBandwidth, Degenerate) {
    EXPECT_THROW(median_bandwidth(make_points({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}})), DegenerateBandwidth);
    // distances {0,0,0,1,1,1}
    EXPECT_DOUBLE_EQ(median_bandwidth(make_points({{0.0}, {0.0}, {0.0}, {1.0}})), 0.5);
    EXPECT_THROW(median_bandwidth(make_points({{0.0}, {0.0}, {0.0}, {0.0}, {1.0}})), DegenerateBandwidth);
}

TEST(Sobolev, Examples) {
    EXPECT_NEAR(sobolev_eval(0.3, 0.3, 2), 1.0 + std::numbers::pi * std::numbers::pi / 3.0, 1e-12);
    EXPECT_NEAR(sobolev_eval(0.75, 0.25, 2), 1.0 - std::numbers::pi * std::numbers::pi / 6.0, 1e-12);
    EXPECT_NEAR(sobolev_eval(0.0, 0.0, 2), fixtures::sobolev_series(0.0, 2), 1e-8);
}

TEST(Sobolev, Periodic) {
    for (int order : {2, 4, 6, 8, 10}) {
        for (double x : {0.0, 0.13, 0.5, 0.91}) {
            EXPECT_NEAR(sobolev_eval(x + 1.0, 0.37, order), sobolev_eval(x, 0.37, order), 1e-12);
            EXPECT_NEAR(sobolev_eval(x, 0.37 - 1.0, order), sobolev_eval(x, 0.37, order), 1e-12);
        }
    }
}

TEST(Sobolev, MatchesSeries) {
    for (int order : {2, 4, 6}) {
        double worst = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double d = i / 100.0;
            worst = std::max(worst, std::abs(sobolev_eval(d, 0.0, order) - fixtures::sobolev_series(d, order)));
        }
        EXPECT_LE(worst, 1e-6) << "order " << order;
    }
}

TEST(Sobolev, HigherOrdersAgainstSeries) {
    for (int order : {8, 10}) {
        for (double d : {0.0, 0.2, 0.5, 0.77}) {
            EXPECT_NEAR(sobolev_eval(d, 0.0, order), fixtures::sobolev_series(d, order, 2000), 1e-10);
        }
    }
}

TEST(Sobolev, RejectsUnsupportedOrder) {
    EXPECT_THROW(sobolev_eval(0.1, 0.2, 3), UnsupportedOrder);
    EXPECT_THROW(sobolev_eval(0.1, 0.2, 0), UnsupportedOrder);
    EXPECT_THROW(sobolev_eval(0.1, 0.2, 12), UnsupportedOrder);
    EXPECT_THROW(KernelSpec::periodic_sobolev(5), UnsupportedOrder);
}

TEST(Bernoulli, LowOrders) {
    for (double x : {0.0, 0.25, 0.6, 1.0}) {
        EXPECT_NEAR(bernoulli_polynomial(0, x), 1.0, 1e-15);
        EXPECT_NEAR(bernoulli_polynomial(1, x), x - 0.5, 1e-15);
        EXPECT_NEAR(bernoulli_polynomial(2, x), x * x - x + 1.0 / 6.0, 1e-15);
        EXPECT_NEAR(bernoulli_polynomial(4, x), x * x * x * x - 2 * x * x * x + x * x - 1.0 / 30.0, 1e-14);
    }
}

TEST(Kernel, Symmetry) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    const KernelSpec g = KernelSpec::gaussian(1.3);
    const KernelSpec s = KernelSpec::periodic_sobolev(4);
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> x = {normal(rng), normal(rng), normal(rng)};
        const std::vector<double> y = {normal(rng), normal(rng), normal(rng)};
        EXPECT_NEAR(g(x, y), g(y, x), 1e-12);
        const std::vector<double> a = {unit(rng)};
        const std::vector<double> b = {unit(rng)};
        EXPECT_NEAR(s(a, b), s(b, a), 1e-12);
    }
}

TEST(Gram, Examples) {
    const Points x = make_points({{0.0}, {1.0}});
    const Eigen::MatrixXd k = gram(KernelSpec::gaussian(1.0), x, x);
    EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(k(1, 1), 1.0);
    EXPECT_NEAR(k(0, 1), std::exp(-0.5), 1e-15);
    EXPECT_NEAR(k(1, 0), std::exp(-0.5), 1e-15);
    const Eigen::MatrixXd one = gram(KernelSpec::gaussian(2.0), make_points({{4.0, 4.0}}));
    ASSERT_EQ(one.rows(), 1);
    EXPECT_DOUBLE_EQ(one(0, 0), 1.0);
}

TEST(Gram, EntriesMatchKernel) {
    const Points a = fixtures::random_points(7, 3, 1);
    const Points b = fixtures::random_points(4, 3, 2);
    const KernelSpec k = KernelSpec::gaussian(0.9);
    const Eigen::MatrixXd m = gram(k, a, b);
    ASSERT_EQ(m.rows(), 7);
    ASSERT_EQ(m.cols(), 4);
    for (Eigen::Index i = 0; i < 7; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
            const Eigen::RowVectorXd ai = a.row(i);
            const Eigen::RowVectorXd bj = b.row(j);
            const double d2 = (ai - bj).squaredNorm();
            EXPECT_NEAR(m(i, j), std::exp(-d2 / (2 * 0.81)), 1e-15);
        }
    }
}

TEST(Gram, DimensionMismatch) {
    EXPECT_THROW(gram(KernelSpec::gaussian(1.0), fixtures::random_points(3, 2, 1), fixtures::random_points(3, 3, 1)),
                 InvalidInput);
    EXPECT_THROW(gram(KernelSpec::periodic_sobolev(2), fixtures::random_points(3, 2, 1)), InvalidInput);
}

TEST(Gram, PositiveSemiDefinite) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Points x = fixtures::random_points(50, 2, seed);
        const Eigen::MatrixXd k = gram(KernelSpec::gaussian(median_bandwidth(x)), x);
        EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        const double smallest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().minCoeff();
        EXPECT_GE(smallest, -1e-8 * k.trace());
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit;
    Points u(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) {
        u(i, 0) = unit(rng);
    }
    const Eigen::MatrixXd s = gram(KernelSpec::periodic_sobolev(2), u);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff(), -1e-8 * s.trace());
}
