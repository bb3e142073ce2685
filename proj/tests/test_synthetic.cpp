#include "fixtures.hpp"

#include "itdre/errors.hpp"
#include "itdre/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace itdre;

namespace {

GaussianMixture standard_normal(int d) {
    return GaussianMixture({1.0}, {Eigen::VectorXd::Zero(d)}, {Eigen::MatrixXd::Identity(d, d)});
}

double ks_statistic(std::vector<double> draws, const RegularityProblem& pr, const std::vector<double>& cdf) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double x = draws[i];
        const auto it = std::upper_bound(pr.grid.begin(), pr.grid.end(), x);
        const std::size_t j = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - pr.grid.begin(), 1),
                                                    pr.grid.size() - 1);
        const double frac = (x - pr.grid[j - 1]) / (pr.grid[j] - pr.grid[j - 1]);
        const double f = cdf[j - 1] + frac * (cdf[j] - cdf[j - 1]);
        d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    return d;
}

std::vector<double> column(const Points& x) {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = x(i, 0);
    }
    return out;
}

}  // namespace

TEST(Mixture, DensityExamples) {
    for (int d : {1, 3, 50}) {
        const auto gm = standard_normal(d);
        const std::vector<double> x(static_cast<std::size_t>(d), 0.0);
        EXPECT_NEAR(gm.density(x), std::pow(2 * std::numbers::pi, -d / 2.0), 1e-12 * std::pow(2 * std::numbers::pi, -d / 2.0));
    }
    const Eigen::VectorXd mu = Eigen::VectorXd::Constant(2, 0.3);
    const Eigen::MatrixXd cov = (Eigen::MatrixXd(2, 2) << 2.0, 0.4, 0.4, 1.0).finished();
    const GaussianMixture one({1.0}, {mu}, {cov});
    const GaussianMixture two({0.5, 0.5}, {mu, mu}, {cov, cov});
    const std::vector<double> x = {1.1, -0.7};
    EXPECT_NEAR(two.density(x), one.density(x), 1e-15);

    const GaussianMixture pair({0.5, 0.5}, {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)},
                               {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)});
    EXPECT_NEAR(pair.density(std::vector<double>{0.5}), 0.35206533, 1e-8);
}

TEST(Mixture, LogDensityFarInTail) {
    const auto gm = standard_normal(2);
    EXPECT_NEAR(gm.log_density(std::vector<double>{40.0, 0.0}), -800.0 - std::log(2 * std::numbers::pi), 1e-9);
}

TEST(Mixture, RejectsBadParameters) {
    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(GaussianMixture({0.5, 0.4}, {mu, mu}, {id, id}), InvalidInput);
    EXPECT_THROW(GaussianMixture({1.2, -0.2}, {mu, mu}, {id, id}), InvalidInput);
    EXPECT_THROW(GaussianMixture({1.0}, {mu}, {(Eigen::MatrixXd(2, 2) << 1, 0.5, 0.4, 1).finished()}), InvalidInput);
    EXPECT_THROW(GaussianMixture({1.0}, {mu}, {(Eigen::MatrixXd(2, 2) << 1, 2, 2, 1).finished()}), InvalidInput);
    EXPECT_THROW(GaussianMixture({}, {}, {}), InvalidInput);
    EXPECT_THROW(standard_normal(2).density(std::vector<double>{0.0}), InvalidInput);
}

TEST(Mixture, Sampling) {
    const Eigen::VectorXd mu = (Eigen::VectorXd(2) << 1.5, -0.5).finished();
    const Eigen::MatrixXd cov = (Eigen::MatrixXd(2, 2) << 4.0, 0.0, 0.0, 0.25).finished();
    const GaussianMixture gm({1.0}, {mu}, {cov});
    EXPECT_EQ(gm.sample(0, 1).rows(), 0);
    const Points a = gm.sample(100000, 42);
    const Points b = gm.sample(100000, 42);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == gm.sample(100000, 43));
    const Eigen::RowVectorXd mean = a.colwise().mean();
    EXPECT_LE(std::abs(mean(0) - 1.5), 4 * 2.0 / std::sqrt(1e5));
    EXPECT_LE(std::abs(mean(1) + 0.5), 4 * 0.5 / std::sqrt(1e5));
}

TEST(Mixture, ComponentFrequencies) {
    const GaussianMixture gm({0.2, 0.8}, {Eigen::VectorXd::Constant(1, -50.0), Eigen::VectorXd::Constant(1, 50.0)},
                             {Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)});
    const Points x = gm.sample(20000, 3);
    const double left = static_cast<double>((x.col(0).array() < 0).count()) / 20000.0;
    EXPECT_NEAR(left, 0.2, 4 * std::sqrt(0.2 * 0.8 / 20000));
}

TEST(Geometric, ComponentCounts) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pr = make_geometric_problem(seed);
        EXPECT_EQ(pr.dimension(), 50);
        EXPECT_EQ(pr.p.components() + pr.q.components(), 4u);
        EXPECT_GE(pr.p.components(), 1u);
        EXPECT_LE(pr.p.components(), 3u);
        for (const auto& m : pr.p.means()) {
            EXPECT_GE(m.minCoeff(), 0.0);
            EXPECT_LE(m.maxCoeff(), 0.5);
        }
    }
}

TEST(Geometric, RatioFiniteAndPositive) {
    const auto pr = make_geometric_problem(9, 10);
    const Points x = itdre::fixtures::random_points(200, 10, 1, 0.25, 2.0);
    const Eigen::VectorXd r = pr.exact_ratios(x);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        EXPECT_TRUE(std::isfinite(r(i)));
        EXPECT_GT(r(i), 0.0);
    }
    const MixturePairProblem same{pr.q, pr.q, 0};
    EXPECT_LE((same.exact_ratios(x).array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Geometric, Deterministic) {
    const auto a = make_geometric_problem(5, 10);
    const auto b = make_geometric_problem(5, 10);
    EXPECT_EQ(a.p.weights(), b.p.weights());
    EXPECT_TRUE(a.q.covariances()[0] == b.q.covariances()[0]);
}

TEST(Mixture, ImportanceSamplingIdentity) {
    // d = 10 ratios are too heavy tailed for a sample standard error check
    const std::vector<MixturePairProblem> problems = {make_geometric_problem(2, 2), make_saturation_problem(1),
                                                      make_saturation_problem(3)};
    for (const auto& pr : problems) {
        const Points x = pr.q.sample(100000, 77);
        const Eigen::VectorXd r = pr.exact_ratios(x);
        const double mean = r.mean();
        const double sd = std::sqrt((r.array() - mean).square().sum() / (r.size() - 1));
        EXPECT_LE(std::abs(mean - 1.0), 3 * sd / std::sqrt(1e5)) << "dimension " << pr.dimension();
    }
}

TEST(Saturation, ComponentCounts) {
    for (int k : {1, 2, 3}) {
        const auto pr = make_saturation_problem(k);
        EXPECT_EQ(pr.p.components(), static_cast<std::size_t>(k));
        EXPECT_EQ(pr.q.components(), 1u);
        EXPECT_EQ(pr.dimension(), 1);
    }
    EXPECT_THROW(make_saturation_problem(0), InvalidInput);
    EXPECT_THROW(make_saturation_problem(4), InvalidInput);
}

TEST(Regularity, BetaIdentityAndNormalization) {
    const auto pr = make_regularity_problem(2, 1.25);
    EXPECT_EQ(pr.score_order, 4);
    ASSERT_EQ(pr.grid.size(), 4096u);
    EXPECT_GT(pr.pi, 0.0);
    EXPECT_LT(pr.pi, 1.0);
    for (std::size_t i = 0; i < pr.grid.size(); ++i) {
        EXPECT_GT(pr.eta[i], 0.0);
        EXPECT_LT(pr.eta[i], 1.0);
        const double expected = (1 - pr.pi) / pr.pi * pr.eta[i] / (1 - pr.eta[i]);
        EXPECT_NEAR(pr.beta[i], expected, 1e-12 * expected);
        EXPECT_NEAR(pr.f_h[i], sobolev_eval(0.0, pr.grid[i], 4), 1e-14);
    }
    EXPECT_NEAR(trapezoid(pr, pr.p), 1.0, 1e-6);
    EXPECT_NEAR(trapezoid(pr, pr.q), 1.0, 1e-6);
}

TEST(Regularity, SymmetricHook) {
    const auto pr = make_regularity_problem_from_score([](double) { return 0.0; }, 2, 1.25);
    EXPECT_NEAR(pr.pi, 0.5, 1e-15);
    for (double b : pr.beta) {
        EXPECT_NEAR(b, 1.0, 1e-15);
    }
}

TEST(Regularity, OrderRounding) {
    EXPECT_EQ(regularity_score_order(2, 1.25), 4);
    EXPECT_EQ(regularity_score_order(2, 0.25), 2);
    EXPECT_EQ(regularity_score_order(4, 1.0), 6);
    EXPECT_THROW(regularity_score_order(3, 1.0), UnsupportedOrder);
    EXPECT_THROW(regularity_score_order(2, 8.0), UnsupportedOrder);
    EXPECT_THROW(regularity_score_order(2, -1.0), InvalidInput);
    try {
        make_regularity_problem(5, 1.0);
        FAIL();
    } catch (const UnsupportedOrder& e) {
        EXPECT_NE(std::string(e.what()).find("alpha=5"), std::string::npos);
    }
    EXPECT_THROW(make_regularity_problem(2, 1.25, 511), InvalidInput);
}

TEST(Regularity, BayesOptimalScore) {
    const auto pr = make_regularity_problem(2, 1.25);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t i = 0; i < pr.grid.size(); i += pr.grid.size() / 50) {
        const double eta = pr.eta[i];
        const auto risk = [&](double z) {
            return eta * loss_eval(LossFamily::lr, 1, z) + (1 - eta) * loss_eval(LossFamily::lr, -1, z);
        };
        double a = -10.0;
        double b = 10.0;
        while (b - a > 1e-9) {
            const double c = b - gr * (b - a);
            const double d = a + gr * (b - a);
            if (risk(c) < risk(d)) {
                b = d;
            } else {
                a = c;
            }
        }
        EXPECT_NEAR(0.5 * (a + b), pr.f_h[i], 1e-4);
    }
}

TEST(Regularity, Sampling) {
    const auto pr = make_regularity_problem(2, 1.25);
    const auto [xp, xq] = sample_regularity(pr, 10000, 10000, 8);
    EXPECT_EQ(xp.rows(), 10000);
    EXPECT_EQ(xp.cols(), 1);
    EXPECT_LE(ks_statistic(column(xp), pr, pr.p_cdf), 1.95 / 100.0);
    EXPECT_LE(ks_statistic(column(xq), pr, pr.q_cdf), 1.95 / 100.0);
    const auto [xp2, xq2] = sample_regularity(pr, 10000, 10000, 8);
    EXPECT_TRUE(xp == xp2);
    EXPECT_TRUE(xq == xq2);
    const auto [e1, e2] = sample_regularity(pr, 0, 0, 8);
    EXPECT_EQ(e1.rows(), 0);
    EXPECT_EQ(e2.rows(), 0);
    EXPECT_GE(xp.minCoeff(), 0.0);
    EXPECT_LE(xp.maxCoeff(), 1.0);
}

TEST(AdjustedLink, ReducesAtHalf) {
    const auto pr = make_regularity_problem_from_score([](double) { return 0.0; }, 2, 1.25);
    for (LossFamily f : {LossFamily::lr, LossFamily::exp}) {
        for (double v = -5.0; v <= 5.0; v += 0.25) {
            EXPECT_NEAR(adjusted_inv_link(pr, f, v), inv_link(f, v), 1e-15);
        }
    }
}

TEST(AdjustedLink, BaseRateScoreGivesUnitRatio) {
    const auto pr = make_regularity_problem(2, 1.25);
    ASSERT_GT(std::abs(pr.pi - 0.5), 1e-3);
    for (LossFamily f : kAllFamilies) {
        const double v = link(f, pr.pi);
        EXPECT_NEAR(adjusted_ratio(pr, f, v), 1.0, 1e-10) << to_string(f);
        const double s = adjusted_inv_link(pr, f, v);
        EXPECT_NEAR(s / (1 - s), 1.0, 1e-10);
    }
    // the Bayes LR score f_H maps to beta through the adjusted link
    for (std::size_t i = 0; i < pr.grid.size(); i += 97) {
        EXPECT_NEAR(adjusted_ratio(pr, LossFamily::lr, pr.f_h[i]), pr.beta[i], 1e-10 * pr.beta[i]);
    }
}

TEST(AdjustedLink, Monotone) {
    const auto pr = make_regularity_problem(2, 1.25);
    for (LossFamily f : {LossFamily::lr, LossFamily::exp}) {
        double last = -1.0;
        for (int i = 0; i <= 1000; ++i) {
            const double s = adjusted_inv_link(pr, f, -10.0 + 0.02 * i);
            EXPECT_GE(s, last);
            EXPECT_GE(s, 0.0);
            EXPECT_LE(s, 1.0);
            last = s;
        }
    }
}

TEST(L1Error, Examples) {
    const auto pr = make_regularity_problem(2, 1.25);
    EXPECT_DOUBLE_EQ(l1_ratio_error(pr, pr.beta), 0.0);
    std::vector<double> shifted = pr.beta;
    for (double& b : shifted) {
        b += 0.3;
    }
    EXPECT_NEAR(l1_ratio_error(pr, shifted), 0.3, 1e-12);
    EXPECT_THROW(l1_ratio_error(pr, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST(L1Error, GridRefinement) {
    const auto coarse = make_regularity_problem(2, 1.25, 4096);
    const auto fine = make_regularity_problem(2, 1.25, 8191);
    const auto [xp, xq] = sample_regularity(coarse, 150, 150, 2);
    const auto fit = fit_cg(xp, xq, LossFamily::lr, KernelSpec::periodic_sobolev(2), 0.01, 2);
    EXPECT_NEAR(l1_ratio_error(coarse, fit.model()), l1_ratio_error(fine, fit.model()), 1e-4);
    EXPECT_GT(l1_ratio_error(coarse, fit.model()), 0.0);
    EXPECT_THROW(l1_ratio_error(coarse, fit_kulsif(make_points({{0.1, 0.2}}), make_points({{0.3, 0.1}}),
                                                   KernelSpec::gaussian(1.0), 1.0, 1)
                                            .model()),
                 InvalidInput);
}

TEST(Seeds, DeriveSeed) {
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}
