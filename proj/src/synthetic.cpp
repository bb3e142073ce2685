#include "itdre/synthetic.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace itdre {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::vector<double> normalized_cdf(const std::vector<double>& density, double h) {
    std::vector<double> cdf(density.size(), 0.0);
    for (std::size_t i = 1; i < density.size(); ++i) {
        cdf[i] = cdf[i - 1] + 0.5 * h * (density[i - 1] + density[i]);
    }
    const double total = cdf.back();
    for (double& c : cdf) {
        c /= total;
    }
    cdf.back() = 1.0;
    return cdf;
}

Points inverse_cdf_draws(const std::vector<double>& grid, const std::vector<double>& cdf, std::size_t count,
                         std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Points out(static_cast<Eigen::Index>(count), 1);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = unif(rng);
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
        hi = std::clamp<std::size_t>(hi, 1, cdf.size() - 1);
        const std::size_t lo = hi - 1;
        const double width = cdf[hi] - cdf[lo];
        const double frac = width > 0.0 ? (u - cdf[lo]) / width : 0.5;
        out(static_cast<Eigen::Index>(i), 0) = grid[lo] + frac * (grid[hi] - grid[lo]);
    }
    return out;
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
    if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covariances_.size()) {
        throw InvalidInput("gaussian mixture: weights, means and covariances must be nonempty and equally long");
    }
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InvalidInput("gaussian mixture: weights must be finite and nonnegative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidInput(fmt::format("gaussian mixture: weights sum to {} instead of 1", sum));
    }
    dimension_ = means_.front().size();
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        const Eigen::MatrixXd& cov = covariances_[j];
        if (means_[j].size() != dimension_ || cov.rows() != dimension_ || cov.cols() != dimension_) {
            throw InvalidInput(fmt::format("gaussian mixture: component {} has inconsistent dimension", j));
        }
        if (!means_[j].allFinite() || !cov.allFinite()) {
            throw InvalidInput(fmt::format("gaussian mixture: component {} has non-finite parameters", j));
        }
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
            throw InvalidInput(fmt::format("gaussian mixture: covariance {} is not symmetric", j));
        }
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw InvalidInput(fmt::format("gaussian mixture: covariance {} is not positive definite", j));
        }
        Eigen::MatrixXd l = llt.matrixL();
        const double log_det = 2.0 * l.diagonal().array().log().sum();
        chol_.push_back(std::move(l));
        log_norm_.push_back(-0.5 * (static_cast<double>(dimension_) * std::log(2.0 * std::numbers::pi) + log_det));
    }
}

double GaussianMixture::log_density(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dimension_) {
        throw InvalidInput(fmt::format("mixture density: point dimension {} != {}", x.size(), dimension_));
    }
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), dimension_);
    std::vector<double> terms;
    terms.reserve(weights_.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        if (weights_[j] == 0.0) {
            continue;
        }
        const Eigen::VectorXd z = chol_[j].triangularView<Eigen::Lower>().solve(xv - means_[j]);
        const double t = std::log(weights_[j]) + log_norm_[j] - 0.5 * z.squaredNorm();
        terms.push_back(t);
        top = std::max(top, t);
    }
    double acc = 0.0;
    for (double t : terms) {
        acc += std::exp(t - top);
    }
    return top + std::log(acc);
}

double GaussianMixture::density(std::span<const double> x) const {
    return std::exp(log_density(x));
}

Eigen::VectorXd GaussianMixture::log_densities(const Points& x) const {
    Eigen::VectorXd out(x.rows());
    const auto dim = static_cast<std::size_t>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[i] = log_density(std::span<const double>(x.row(i).data(), dim));
    }
    return out;
}

Points GaussianMixture::sample(std::size_t count, std::uint64_t seed) const {
    auto rng = make_engine(seed, 0x6d6978);
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    Points out(static_cast<Eigen::Index>(count), dimension_);
    Eigen::VectorXd z(dimension_);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = pick(rng);
        for (Eigen::Index k = 0; k < dimension_; ++k) {
            z[k] = normal(rng);
        }
        out.row(static_cast<Eigen::Index>(i)) = (means_[j] + chol_[j] * z).transpose();
    }
    return out;
}

double MixturePairProblem::log_ratio(std::span<const double> x) const {
    return p.log_density(x) - q.log_density(x);
}

double MixturePairProblem::exact_ratio(std::span<const double> x) const {
    return std::exp(log_ratio(x));
}

Eigen::VectorXd MixturePairProblem::exact_ratios(const Points& x) const {
    return (p.log_densities(x) - q.log_densities(x)).array().exp().matrix();
}

MixturePairProblem make_geometric_problem(std::uint64_t seed, int dimension) {
    if (dimension < 1) {
        throw InvalidInput("geometric problem: dimension must be >= 1");
    }
    auto rng = make_engine(seed, 0x67656f);
    std::uniform_int_distribution<int> count_dist(1, 3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> mean_dist(0.0, 0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index d = dimension;

    auto make_mixture = [&](int components) {
        std::vector<double> w(static_cast<std::size_t>(components));
        for (double& v : w) {
            v = unit(rng);
        }
        double total = 0.0;
        for (double v : w) {
            total += v;
        }
        if (!(total > 0.0)) {
            std::fill(w.begin(), w.end(), 1.0);
            total = static_cast<double>(components);
        }
        for (double& v : w) {
            v /= total;
        }
        // renormalize so the sum is exactly representable close to 1
        double s = 0.0;
        for (std::size_t j = 0; j + 1 < w.size(); ++j) {
            s += w[j];
        }
        w.back() = 1.0 - s;

        std::vector<Eigen::VectorXd> means;
        std::vector<Eigen::MatrixXd> covs;
        for (int c = 0; c < components; ++c) {
            Eigen::VectorXd mu(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                mu[k] = mean_dist(rng);
            }
            Eigen::MatrixXd a(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                for (Eigen::Index k = 0; k < d; ++k) {
                    a(i, k) = normal(rng);
                }
            }
            Eigen::MatrixXd cov = a * a.transpose() / static_cast<double>(d);
            cov = 0.5 * (cov + cov.transpose()).eval();
            cov.diagonal().array() += 0.1;
            means.push_back(std::move(mu));
            covs.push_back(std::move(cov));
        }
        return GaussianMixture(std::move(w), std::move(means), std::move(covs));
    };

    const int n_p = count_dist(rng);
    GaussianMixture p = make_mixture(n_p);
    GaussianMixture q = make_mixture(4 - n_p);
    return MixturePairProblem{std::move(p), std::move(q), seed};
}

MixturePairProblem make_saturation_problem(int components) {
    if (components < 1 || components > 3) {
        throw InvalidInput(fmt::format("saturation problem: component count {} outside {{1, 2, 3}}", components));
    }
    static const std::vector<std::vector<double>> kCenters = {{0.0}, {-1.0, 1.0}, {-1.0, 0.0, 1.0}};
    const auto& centers = kCenters[static_cast<std::size_t>(components - 1)];
    std::vector<double> w(centers.size(), 1.0 / static_cast<double>(centers.size()));
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < w.size(); ++j) {
        s += w[j];
    }
    w.back() = 1.0 - s;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (double c : centers) {
        means.push_back(Eigen::VectorXd::Constant(1, c));
        covs.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0));
    }
    GaussianMixture p(std::move(w), std::move(means), std::move(covs));
    GaussianMixture q({1.0}, {Eigen::VectorXd::Zero(1)}, {Eigen::MatrixXd::Constant(1, 1, 2.25)});
    return MixturePairProblem{std::move(p), std::move(q), static_cast<std::uint64_t>(components)};
}

int regularity_score_order(int alpha, double r) {
    if (alpha < 2 || alpha % 2 != 0) {
        throw UnsupportedOrder(fmt::format("regularity problem (alpha={}, r={}): alpha must be an even integer >= 2",
                                           alpha, r));
    }
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw InvalidInput(fmt::format("regularity problem (alpha={}, r={}): r must be positive", alpha, r));
    }
    const double raw = (r + 0.5) * alpha + 0.5;
    const int order = 2 * static_cast<int>(std::lround(raw / 2.0));
    if (order < 2 || order > 10) {
        throw UnsupportedOrder(fmt::format(
            "regularity problem (alpha={}, r={}): score kernel order {} (from {}) is not a supported even order",
            alpha, r, order, raw));
    }
    return order;
}

RegularityProblem make_regularity_problem_from_score(const std::function<double(double)>& f_h, int alpha, double r,
                                                     std::size_t grid_size) {
    if (grid_size < 512) {
        throw InvalidInput(fmt::format("regularity problem: grid size {} below the minimum 512", grid_size));
    }
    RegularityProblem prob;
    prob.alpha = alpha;
    prob.r = r;
    prob.grid.resize(grid_size);
    prob.f_h.resize(grid_size);
    prob.eta.resize(grid_size);
    const double h = 1.0 / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double x = static_cast<double>(i) * h;
        prob.grid[i] = x;
        prob.f_h[i] = f_h(x);
        prob.eta[i] = 1.0 / (1.0 + std::exp(-prob.f_h[i]));
        if (!(prob.eta[i] > 0.0 && prob.eta[i] < 1.0)) {
            throw InvalidInput("regularity problem: class posterior left (0, 1)");
        }
    }
    prob.pi = trapezoid(prob, prob.eta);
    prob.p.resize(grid_size);
    prob.q.resize(grid_size);
    prob.beta.resize(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i) {
        prob.p[i] = prob.eta[i] / prob.pi;
        prob.q[i] = (1.0 - prob.eta[i]) / (1.0 - prob.pi);
        prob.beta[i] = prob.p[i] / prob.q[i];
    }
    prob.p_cdf = normalized_cdf(prob.p, h);
    prob.q_cdf = normalized_cdf(prob.q, h);
    return prob;
}

RegularityProblem make_regularity_problem(int alpha, double r, std::size_t grid_size) {
    const int order = regularity_score_order(alpha, r);
    RegularityProblem prob = make_regularity_problem_from_score(
        [order](double x) { return sobolev_eval(0.0, x, order); }, alpha, r, grid_size);
    prob.score_order = order;
    return prob;
}

std::pair<Points, Points> sample_regularity(const RegularityProblem& problem, std::size_t count_p,
                                            std::size_t count_q, std::uint64_t seed) {
    auto rng_p = make_engine(seed, 1);
    auto rng_q = make_engine(seed, 2);
    return {inverse_cdf_draws(problem.grid, problem.p_cdf, count_p, rng_p),
            inverse_cdf_draws(problem.grid, problem.q_cdf, count_q, rng_q)};
}

double adjusted_inv_link(const RegularityProblem& problem, LossFamily family, double v) {
    const double pi = problem.pi;
    const double s = inv_link(family, v);
    return (1.0 - pi) * s / (s * (1.0 - 2.0 * pi) + pi);
}

double adjusted_ratio(const RegularityProblem& problem, LossFamily family, double v) {
    return (1.0 - problem.pi) / problem.pi * ratio_from_score(family, v);
}

double trapezoid(const RegularityProblem& problem, std::span<const double> values) {
    if (values.size() != problem.grid.size()) {
        throw InvalidInput("trapezoid: values do not match the grid");
    }
    double s = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        s += 0.5 * (values[i - 1] + values[i]) * (problem.grid[i] - problem.grid[i - 1]);
    }
    return s;
}

double l1_ratio_error(const RegularityProblem& problem, std::span<const double> ratio_on_grid) {
    if (ratio_on_grid.size() != problem.grid.size()) {
        throw InvalidInput("l1_ratio_error: ratio values do not match the grid");
    }
    std::vector<double> diff(ratio_on_grid.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = std::abs(problem.beta[i] - ratio_on_grid[i]);
    }
    return trapezoid(problem, diff);
}

double l1_ratio_error(const RegularityProblem& problem, const RatioModel& model, LinkMode mode) {
    if (model.dimension() != 1) {
        throw InvalidInput("l1_ratio_error: model must be trained on 1-D data");
    }
    Points x(static_cast<Eigen::Index>(problem.grid.size()), 1);
    for (std::size_t i = 0; i < problem.grid.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = problem.grid[i];
    }
    const Eigen::VectorXd scores = model.predict_scores(x);
    std::vector<double> ratio(problem.grid.size());
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        const double v = scores[static_cast<Eigen::Index>(i)];
        ratio[i] = mode == LinkMode::prior_adjusted ? adjusted_ratio(problem, model.family(), v)
                                                    : ratio_from_score(model.family(), v);
    }
    return l1_ratio_error(problem, ratio);
}

}  // namespace itdre

namespace itdre {

namespace {
std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = splitmix(base);
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    return splitmix(h ^ c);
}

}  // namespace itdre
