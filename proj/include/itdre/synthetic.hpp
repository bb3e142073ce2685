#pragma once

#include "itdre/kernels.hpp"
#include "itdre/losses.hpp"
#include "itdre/solver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace itdre {

/// Finite Gaussian mixture with exact (log-)density and seeded sampling.
class GaussianMixture {
public:
    /// Weights must be nonnegative and sum to 1 within 1e-12; each covariance
    /// must be symmetric and Cholesky-factorizable.
    GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                    std::vector<Eigen::MatrixXd> covariances);

    Eigen::Index dimension() const noexcept { return dimension_; }
    std::size_t components() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<Eigen::VectorXd>& means() const noexcept { return means_; }
    const std::vector<Eigen::MatrixXd>& covariances() const noexcept { return covariances_; }

    /// log sum_j w_j N(x; mu_j, Sigma_j), accumulated with log-sum-exp.
    double log_density(std::span<const double> x) const;
    double density(std::span<const double> x) const;
    Eigen::VectorXd log_densities(const Points& x) const;

    /// Categorical component draw, then mu + L z. Deterministic in the seed.
    Points sample(std::size_t count, std::uint64_t seed) const;

private:
    std::vector<double> weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covariances_;
    std::vector<Eigen::MatrixXd> chol_;
    std::vector<double> log_norm_;
    Eigen::Index dimension_ = 0;
};

/// Numerator P (label +1) and denominator Q (label -1) with beta = p / q known.
struct MixturePairProblem {
    GaussianMixture p;
    GaussianMixture q;
    std::uint64_t seed = 0;

    Eigen::Index dimension() const noexcept { return p.dimension(); }
    double log_ratio(std::span<const double> x) const;
    double exact_ratio(std::span<const double> x) const;
    Eigen::VectorXd exact_ratios(const Points& x) const;
};

/// Random pair in the geometric-figures style: n ~ U{1,2,3} components for P
/// and 4 - n for Q, means uniform in [0, 0.5]^d, weights U[0,1] normalized,
/// covariances A A^T / d + 0.1 I with standard-normal A.
MixturePairProblem make_geometric_problem(std::uint64_t seed, int dimension = 50);

/// 1-D pair for the saturation study: P has `components` equal-weight unit
/// variance components with centers evenly spread over [-1, 1] (0 for one
/// component), Q = N(0, 1.5^2).
MixturePairProblem make_saturation_problem(int components);

/// Known-regularity benchmark on [0, 1] with uniform marginal:
/// eta(x) = 1 / (1 + exp(-f_H(x))), f_H(x) = h_order(0, x),
/// p = eta / pi, q = (1 - eta) / (1 - pi), beta = p / q.
struct RegularityProblem {
    int alpha = 2;
    double r = 0.0;
    /// Even order of the kernel generating f_H; 0 when f_H is supplied directly.
    int score_order = 0;
    double pi = 0.5;
    std::vector<double> grid;
    std::vector<double> f_h;
    std::vector<double> eta;
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> beta;
    /// Normalized cumulative trapezoid integrals of p and q on the grid.
    std::vector<double> p_cdf;
    std::vector<double> q_cdf;

    double step() const { return grid[1] - grid[0]; }
};

/// (r + 1/2) alpha + 1/2 rounded to the nearest even integer.
int regularity_score_order(int alpha, double r);

RegularityProblem make_regularity_problem(int alpha, double r, std::size_t grid_size = 4096);
/// Same construction with an arbitrary score function in place of f_H.
RegularityProblem make_regularity_problem_from_score(const std::function<double(double)>& f_h, int alpha, double r,
                                                     std::size_t grid_size = 4096);

/// Inverse-CDF draws from p and q using the piecewise-linear grid CDFs.
std::pair<Points, Points> sample_regularity(const RegularityProblem& problem, std::size_t count_p,
                                            std::size_t count_q, std::uint64_t seed);

/// Prior-adjusted inverse link: (1 - pi) s / (s (1 - 2 pi) + pi) with s = Psi^{-1}(v).
double adjusted_inv_link(const RegularityProblem& problem, LossFamily family, double v);
/// Ratio through the adjusted link; equals ((1 - pi) / pi) g(v).
double adjusted_ratio(const RegularityProblem& problem, LossFamily family, double v);

enum class LinkMode { plain, prior_adjusted };

/// Trapezoid L1([0,1]) distance between beta and the model's ratio on the grid.
double l1_ratio_error(const RegularityProblem& problem, const RatioModel& model,
                      LinkMode mode = LinkMode::prior_adjusted);
double l1_ratio_error(const RegularityProblem& problem, std::span<const double> ratio_on_grid);

/// Trapezoid integral of values sampled on the problem grid.
double trapezoid(const RegularityProblem& problem, std::span<const double> values);

}  // namespace itdre

namespace itdre {

/// Deterministic seed mixing (splitmix64 over the parts).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace itdre
