#include "itdre/experiments.hpp"

#include "itdre/csv.hpp"
#include "itdre/errors.hpp"
#include "itdre/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace itdre {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Nearest-rank percentile of a sorted vector.
double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        return kNaN;
    }
    const auto idx = static_cast<std::size_t>(std::clamp(
        std::ceil(q * static_cast<double>(sorted.size())) - 1.0, 0.0, static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
}

MethodStats stats(const std::vector<double>& v) {
    return {mean_of(v), sd_of(v), static_cast<int>(v.size())};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidInput(fmt::format("cannot write {}", path.string()));
    }
    return out;
}

std::string cell_value(bool ok, double v) {
    return ok ? format_double(v) : std::string("missing");
}

nlohmann::json families_json(const std::vector<LossFamily>& fs) {
    nlohmann::json a = nlohmann::json::array();
    for (auto f : fs) {
        a.push_back(std::string(to_string(f)));
    }
    return a;
}

}  // namespace

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> s(count);
    for (std::size_t i = 0; i < count; ++i) {
        s[i] = first + i;
    }
    return s;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return kNaN;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidInput("line fit: need at least two matching points");
    }
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InvalidInput("line fit: all x values coincide");
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i) {
        f.residuals.push_back(y[i] - (f.intercept + f.slope * x[i]));
    }
    return f;
}

// ---- rate study -----------------------------------------------------------

void RateStudyConfig::validate() const {
    if (sizes.size() < 4) {
        throw InvalidConfig("rate study: at least four sample sizes are needed for a slope");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 4 || (i > 0 && sizes[i] <= sizes[i - 1])) {
            throw InvalidConfig("rate study: sizes must be increasing and at least 4");
        }
    }
    if (seeds.size() < 5) {
        throw InvalidConfig("rate study: at least five seeds are needed");
    }
    if (t_values.empty() || c_values.empty()) {
        throw InvalidConfig("rate study: t and c lists must be nonempty");
    }
    for (int t : t_values) {
        if (t < 1) {
            throw InvalidConfig("rate study: t values must be >= 1");
        }
    }
    for (double c : c_values) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw InvalidConfig("rate study: c values must be positive");
        }
    }
    if (grid_size < 512) {
        throw InvalidConfig("rate study: grid size must be >= 512");
    }
    if (bootstrap_resamples < 0) {
        throw InvalidConfig("rate study: bootstrap resamples must be >= 0");
    }
    regularity_score_order(alpha, r);
}

double rate_lambda(const RateStudyConfig& config, int size, double c) {
    const double exponent = -static_cast<double>(config.alpha) / (1.0 + config.alpha * (2.0 * config.r + 1.0));
    return c * std::pow(static_cast<double>(size), exponent);
}

const RateCurve& RateStudyResult::best_for(int t) const {
    for (const auto& c : best) {
        if (c.t == t) {
            return c;
        }
    }
    throw InvalidInput(fmt::format("rate study: no curve for t = {}", t));
}

RateStudyResult run_rate_study(const RateStudyConfig& config) {
    config.validate();
    const RegularityProblem problem = make_regularity_problem(config.alpha, config.r, config.grid_size);
    const KernelSpec kernel = KernelSpec::periodic_sobolev(config.alpha);
    const int t_max = *std::max_element(config.t_values.begin(), config.t_values.end());
    const std::size_t n_size = config.sizes.size();
    const std::size_t n_seed = config.seeds.size();
    const std::size_t n_c = config.c_values.size();
    const std::size_t n_t = config.t_values.size();

    Points grid_points(static_cast<Eigen::Index>(problem.grid.size()), 1);
    for (std::size_t i = 0; i < problem.grid.size(); ++i) {
        grid_points(static_cast<Eigen::Index>(i), 0) = problem.grid[i];
    }

    // cells[((size * seeds + seed) * c + ci) * t + ti]
    std::vector<RateCell> cells(n_size * n_seed * n_c * n_t);
    parallel_for(n_size * n_seed, [&](std::size_t task) {
        const std::size_t si = task / n_seed;
        const std::size_t ei = task % n_seed;
        const int size = config.sizes[si];
        const std::uint64_t seed = config.seeds[ei];
        const auto count_p = static_cast<std::size_t>(std::llround(problem.pi * size));
        const auto [x_p, x_q] =
            sample_regularity(problem, count_p, static_cast<std::size_t>(size) - count_p, derive_seed(seed, 0x72617465, static_cast<std::uint64_t>(size)));
        std::optional<TrainingSet> train;
        std::optional<Eigen::MatrixXd> k_grid;
        std::string setup_error;
        try {
            train.emplace(x_p, x_q, kernel);
            k_grid = gram(kernel, grid_points, *train->anchors());
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (std::size_t ci = 0; ci < n_c; ++ci) {
            const double c = config.c_values[ci];
            const std::size_t base = ((si * n_seed + ei) * n_c + ci) * n_t;
            for (std::size_t ti = 0; ti < n_t; ++ti) {
                cells[base + ti] = RateCell{size, config.t_values[ti], c, seed, kNaN, false, setup_error};
            }
            if (!train) {
                continue;
            }
            try {
                const FitResult res = fit(*train, config.family, rate_lambda(config, size, c), t_max, config.cg);
                for (std::size_t ti = 0; ti < n_t; ++ti) {
                    const RatioModel& m = res.path[static_cast<std::size_t>(config.t_values[ti] - 1)];
                    const Eigen::VectorXd scores = *k_grid * m.coeffs();
                    std::vector<double> ratio(problem.grid.size());
                    for (std::size_t i = 0; i < ratio.size(); ++i) {
                        const double v = scores[static_cast<Eigen::Index>(i)];
                        ratio[i] = config.link == LinkMode::prior_adjusted ? adjusted_ratio(problem, config.family, v)
                                                                           : ratio_from_score(config.family, v);
                    }
                    const double err = l1_ratio_error(problem, ratio);
                    auto& cell = cells[base + ti];
                    if (std::isfinite(err)) {
                        cell.error = err;
                        cell.ok = true;
                    } else {
                        cell.message = "non-finite error";
                    }
                }
            } catch (const std::exception& e) {
                for (std::size_t ti = 0; ti < n_t; ++ti) {
                    cells[base + ti].message = e.what();
                }
            }
        }
    });

    auto cell_at = [&](std::size_t si, std::size_t ei, std::size_t ci, std::size_t ti) -> const RateCell& {
        return cells[((si * n_seed + ei) * n_c + ci) * n_t + ti];
    };
    std::vector<double> log_sizes;
    for (int s : config.sizes) {
        log_sizes.push_back(std::log(static_cast<double>(s)));
    }

    auto curve_means = [&](std::size_t ci, std::size_t ti, const std::vector<std::size_t>& seed_idx,
                           std::vector<double>& means, std::vector<double>* errs, std::vector<int>* counts) {
        bool complete = true;
        means.assign(n_size, kNaN);
        for (std::size_t si = 0; si < n_size; ++si) {
            std::vector<double> v;
            for (std::size_t ei : seed_idx) {
                const RateCell& cell = cell_at(si, ei, ci, ti);
                if (cell.ok) {
                    v.push_back(cell.error);
                }
            }
            if (v.empty()) {
                complete = false;
                continue;
            }
            means[si] = mean_of(v);
            if (errs) {
                errs->push_back(sd_of(v) / std::sqrt(static_cast<double>(v.size())));
            }
            if (counts) {
                counts->push_back(static_cast<int>(v.size()));
            }
        }
        return complete;
    };

    std::vector<std::size_t> all_seeds(n_seed);
    for (std::size_t i = 0; i < n_seed; ++i) {
        all_seeds[i] = i;
    }

    RateStudyResult result;
    result.config = config;
    result.cells = cells;
    for (std::size_t ti = 0; ti < n_t; ++ti) {
        std::optional<std::size_t> best_curve;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t ci = 0; ci < n_c; ++ci) {
            RateCurve curve;
            curve.t = config.t_values[ti];
            curve.c = config.c_values[ci];
            curve.complete = curve_means(ci, ti, all_seeds, curve.means, &curve.std_errors, &curve.counts);
            if (curve.complete) {
                std::vector<double> log_means;
                double score = 0.0;
                for (double m : curve.means) {
                    log_means.push_back(std::log(m));
                    score += std::log(m);
                }
                curve.fit = least_squares_line(log_sizes, log_means);
                if (score < best_score) {
                    best_score = score;
                    best_curve = result.curves.size();
                }
            }
            result.curves.push_back(std::move(curve));
        }
        if (!best_curve) {
            RateCurve missing;
            missing.t = config.t_values[ti];
            missing.c = kNaN;
            missing.fit.slope = kNaN;
            missing.fit.intercept = kNaN;
            missing.ci_low = kNaN;
            missing.ci_high = kNaN;
            result.best.push_back(missing);
            continue;
        }
        RateCurve chosen = result.curves[*best_curve];
        const std::size_t ci = *best_curve % n_c;
        std::seed_seq seq{static_cast<std::uint32_t>(config.bootstrap_seed),
                          static_cast<std::uint32_t>(config.bootstrap_seed >> 32),
                          static_cast<std::uint32_t>(chosen.t)};
        std::mt19937_64 rng(seq);
        std::vector<double> slopes;
        for (int b = 0; b < config.bootstrap_resamples; ++b) {
            std::vector<std::size_t> idx(n_seed);
            for (auto& i : idx) {
                i = static_cast<std::size_t>(rng() % n_seed);
            }
            std::vector<double> means;
            if (!curve_means(ci, ti, idx, means, nullptr, nullptr)) {
                continue;
            }
            std::vector<double> log_means;
            for (double m : means) {
                log_means.push_back(std::log(m));
            }
            slopes.push_back(least_squares_line(log_sizes, log_means).slope);
        }
        std::sort(slopes.begin(), slopes.end());
        chosen.ci_low = percentile(slopes, 0.025);
        chosen.ci_high = percentile(slopes, 0.975);
        result.best.push_back(std::move(chosen));
    }
    return result;
}

// ---- geometric benchmark ----------------------------------------------------

void GeometricConfig::validate() const {
    if (dataset_count < 1) {
        throw InvalidConfig("benchmark: dataset count must be >= 1");
    }
    if (sample_count < 100) {
        throw InvalidConfig("benchmark: sample count must be >= 100");
    }
    if (seeds.empty()) {
        throw InvalidConfig("benchmark: at least one seed is needed");
    }
    if (dimension < 1) {
        throw InvalidConfig("benchmark: dimension must be >= 1");
    }
    if (families.empty()) {
        throw InvalidConfig("benchmark: at least one loss family is needed");
    }
    if (fractions.size() != 3) {
        throw InvalidConfig("benchmark: the split needs train/val/test fractions");
    }
    SelectionConfig{lambda_grid, t_grid, fractions, 0, cg}.validate();
}

double GeometricResult::average(LossFamily family, bool iterated) const {
    std::vector<double> v;
    for (const auto& row : rows) {
        if (row.family == family) {
            const MethodStats& s = iterated ? row.iter : row.noniter;
            if (s.count > 0) {
                v.push_back(s.mean);
            }
        }
    }
    return mean_of(v);
}

double twice_bregman(LossFamily family, const MixturePairProblem& problem, const RatioModel& model,
                     const Points& q_test) {
    const Eigen::VectorXd truth = problem.exact_ratios(q_test);
    const Eigen::VectorXd est = model.predict_ratios(q_test);
    return 2.0 * bregman_error_mc(family, as_span(truth), as_span(est));
}

GeometricResult run_geometric_benchmark(const GeometricConfig& config) {
    config.validate();
    const std::size_t n_d = static_cast<std::size_t>(config.dataset_count);
    const std::size_t n_s = config.seeds.size();
    const std::size_t n_f = config.families.size();
    std::vector<GeometricCell> cells(n_d * n_s * n_f);

    parallel_for(n_d * n_s, [&](std::size_t task) {
        const std::size_t di = task / n_s;
        const std::size_t si = task % n_s;
        const std::uint64_t seed = config.seeds[si];
        const auto base = task * n_f;
        for (std::size_t fi = 0; fi < n_f; ++fi) {
            cells[base + fi] = GeometricCell{static_cast<int>(di), seed, config.families[fi], false, "", kNaN, kNaN,
                                             kNaN, kNaN, 0};
        }
        try {
            const MixturePairProblem problem =
                make_geometric_problem(derive_seed(config.dataset_seed, di), config.dimension);
            const auto n = static_cast<std::size_t>(config.sample_count);
            const Points x_p = problem.p.sample(n, derive_seed(seed, di, 1));
            const Points x_q = problem.q.sample(n, derive_seed(seed, di, 2));
            const SelectionConfig sel{config.lambda_grid, config.t_grid, config.fractions, seed, config.cg};
            const SplitData split = split_data(x_p, x_q, sel);
            const KernelSpec kernel = KernelSpec::gaussian(median_bandwidth(stack(split.p_train, split.q_train)));
            for (std::size_t fi = 0; fi < n_f; ++fi) {
                GeometricCell& cell = cells[base + fi];
                try {
                    const GridEvaluation grid = evaluate_grid(split, cell.family, kernel, sel);
                    const SelectionResult non = pick(grid, {1});
                    const SelectionResult it = pick(grid);
                    cell.noniter_error = twice_bregman(cell.family, problem, non.model, split.q_test);
                    cell.iter_error = twice_bregman(cell.family, problem, it.model, split.q_test);
                    cell.noniter_lambda = non.best_lambda;
                    cell.iter_lambda = it.best_lambda;
                    cell.iter_t = it.best_t;
                    cell.ok = std::isfinite(cell.noniter_error) && std::isfinite(cell.iter_error);
                    if (!cell.ok) {
                        cell.message = "non-finite test error";
                    }
                } catch (const std::exception& e) {
                    cell.message = e.what();
                }
            }
        } catch (const std::exception& e) {
            for (std::size_t fi = 0; fi < n_f; ++fi) {
                cells[base + fi].message = e.what();
            }
        }
    });

    GeometricResult result;
    result.config = config;
    result.cells = cells;
    for (std::size_t di = 0; di < n_d; ++di) {
        for (std::size_t fi = 0; fi < n_f; ++fi) {
            std::vector<double> non;
            std::vector<double> it;
            int failures = 0;
            for (std::size_t si = 0; si < n_s; ++si) {
                const GeometricCell& c = cells[(di * n_s + si) * n_f + fi];
                if (c.ok) {
                    non.push_back(c.noniter_error);
                    it.push_back(c.iter_error);
                } else {
                    ++failures;
                }
            }
            result.rows.push_back({static_cast<int>(di), config.families[fi], stats(non), stats(it), failures});
        }
    }
    return result;
}

// ---- mixture saturation study ---------------------------------------------

void SaturationConfig::validate() const {
    if (components.empty()) {
        throw InvalidConfig("saturation study: component list is empty");
    }
    for (int c : components) {
        if (c < 1 || c > 3) {
            throw InvalidConfig(fmt::format("saturation study: component count {} outside {{1, 2, 3}}", c));
        }
    }
    if (sizes.empty()) {
        throw InvalidConfig("saturation study: size list is empty");
    }
    for (int s : sizes) {
        if (s < 10) {
            throw InvalidConfig("saturation study: sizes must be >= 10");
        }
    }
    if (seeds.empty()) {
        throw InvalidConfig("saturation study: at least one seed is needed");
    }
    if (fractions.size() != 3) {
        throw InvalidConfig("saturation study: the split needs train/val/test fractions");
    }
    if (bootstrap_resamples < 0) {
        throw InvalidConfig("saturation study: bootstrap resamples must be >= 0");
    }
    if (std::find(t_grid.begin(), t_grid.end(), 1) == t_grid.end()) {
        throw InvalidConfig("saturation study: the t grid must contain 1");
    }
    SelectionConfig{lambda_grid, t_grid, fractions, 0, {}}.validate();
}

std::vector<double> saturation_lambda_grid() {
    std::vector<double> out;
    for (int e = -24; e <= 8; ++e) {
        out.push_back(std::pow(10.0, e / 4.0));
    }
    return out;
}

double SaturationResult::mean_improvement(int components, SaturationProtocol protocol) const {
    std::vector<double> v;
    for (const auto& c : cells) {
        if (c.components == components && c.ok) {
            v.push_back(protocol == SaturationProtocol::validation ? c.noniter_error - c.iter_error
                                                                   : c.tuned_noniter_error - c.tuned_iter_error);
        }
    }
    return mean_of(v);
}

namespace {

/// Trapezoid nodes on [-8, 8] with the kernel columns of one anchor set, so
/// every model on those anchors is scored with a matrix-vector product.
struct Quadrature1d {
    Eigen::MatrixXd cross;
    Eigen::VectorXd weight;  // trapezoid weight times q
    Eigen::VectorXd truth;
};

Quadrature1d make_quadrature_1d(const MixturePairProblem& problem, const KernelSpec& kernel, const Points& anchors) {
    const QuadratureGrid quad = QuadratureGrid::trapezoid(-8.0, 8.0, 4001);
    Points x(static_cast<Eigen::Index>(quad.nodes.size()), 1);
    for (std::size_t i = 0; i < quad.nodes.size(); ++i) {
        x(static_cast<Eigen::Index>(i), 0) = quad.nodes[i];
    }
    Quadrature1d out;
    out.cross = gram(kernel, x, anchors);
    out.truth = problem.exact_ratios(x);
    const Eigen::VectorXd log_q = problem.q.log_densities(x);
    out.weight.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out.weight(i) = quad.weights[static_cast<std::size_t>(i)] * std::exp(log_q(i));
    }
    return out;
}

double twice_bregman_on(const Quadrature1d& qd, const RatioModel& model) {
    const Eigen::VectorXd scores = qd.cross * model.coeffs();
    double s = 0.0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        s += qd.weight(i) * bregman_pointwise(model.family(), qd.truth(i), ratio_from_score(model.family(), scores(i)));
    }
    return 2.0 * s;
}

struct Bootstrap {
    double low = kNaN;
    double high = kNaN;
};

Bootstrap bootstrap_mean(const std::vector<double>& v, int resamples, std::seed_seq& seq) {
    std::mt19937_64 rng(seq);
    std::vector<double> boot;
    if (!v.empty()) {
        for (int b = 0; b < resamples; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                acc += v[static_cast<std::size_t>(rng() % v.size())];
            }
            boot.push_back(acc / static_cast<double>(v.size()));
        }
    }
    std::sort(boot.begin(), boot.end());
    return {percentile(boot, 0.025), percentile(boot, 0.975)};
}

}  // namespace

double twice_bregman_1d(const MixturePairProblem& problem, const RatioModel& model) {
    return twice_bregman_on(make_quadrature_1d(problem, model.kernel(), model.anchors()), model);
}

SaturationResult run_mixture_saturation_study(const SaturationConfig& config) {
    config.validate();
    const std::size_t n_c = config.components.size();
    const std::size_t n_z = config.sizes.size();
    const std::size_t n_s = config.seeds.size();
    const int t_max = *std::max_element(config.t_grid.begin(), config.t_grid.end());
    std::vector<SaturationCell> cells(n_c * n_z * n_s);

    parallel_for(cells.size(), [&](std::size_t task) {
        const std::size_t ci = task / (n_z * n_s);
        const std::size_t zi = (task / n_s) % n_z;
        const std::size_t si = task % n_s;
        SaturationCell& cell = cells[task];
        cell = SaturationCell{config.components[ci], config.sizes[zi], config.seeds[si], false, "", kNaN, kNaN,
                              kNaN, kNaN, 0, kNaN, kNaN, kNaN, kNaN};
        try {
            const MixturePairProblem problem = make_saturation_problem(cell.components);
            const auto n = static_cast<std::size_t>(cell.size);
            const auto tag = static_cast<std::uint64_t>(cell.components * 100000 + cell.size);
            const Points x_p = problem.p.sample(n, derive_seed(cell.seed, tag, 1));
            const Points x_q = problem.q.sample(n, derive_seed(cell.seed, tag, 2));
            const SelectionConfig sel{config.lambda_grid, config.t_grid, config.fractions, cell.seed, {}};
            const SplitData split = split_data(x_p, x_q, sel);
            const KernelSpec kernel = KernelSpec::gaussian(median_bandwidth(stack(split.p_train, split.q_train)));
            const GridEvaluation grid = evaluate_grid(split, LossFamily::kulsif, kernel, sel);
            const SelectionResult non = pick(grid, {1});
            const SelectionResult it = pick(grid);
            const Quadrature1d qd = make_quadrature_1d(problem, kernel, non.model.anchors());
            cell.noniter_error = twice_bregman_on(qd, non.model);
            cell.iter_error = twice_bregman_on(qd, it.model);
            cell.noniter_lambda = non.best_lambda;
            cell.iter_lambda = it.best_lambda;
            cell.iter_t = it.best_t;
            for (std::size_t i = 0; i < grid.points.size(); ++i) {
                const GridPoint& gp = grid.points[i];
                if (!gp.ok || (gp.t != 1 && gp.t != t_max)) {
                    continue;
                }
                const double err = twice_bregman_on(qd, *grid.models[i]);
                if (gp.t == 1 && !(err >= cell.tuned_noniter_error)) {
                    cell.tuned_noniter_error = err;
                    cell.tuned_noniter_lambda = gp.lambda;
                }
                if (gp.t == t_max && !(err >= cell.tuned_iter_error)) {
                    cell.tuned_iter_error = err;
                    cell.tuned_iter_lambda = gp.lambda;
                }
            }
            cell.ok = std::isfinite(cell.noniter_error) && std::isfinite(cell.iter_error) &&
                      std::isfinite(cell.tuned_noniter_error) && std::isfinite(cell.tuned_iter_error);
            if (!cell.ok) {
                cell.message = "non-finite test error";
            }
        } catch (const std::exception& e) {
            cell.message = e.what();
        }
    });

    SaturationResult result;
    result.config = config;
    result.cells = cells;
    for (std::size_t ci = 0; ci < n_c; ++ci) {
        for (std::size_t zi = 0; zi < n_z; ++zi) {
            std::vector<double> non;
            std::vector<double> it;
            std::vector<double> gain;
            std::vector<double> t_non;
            std::vector<double> t_it;
            std::vector<double> t_gain;
            for (std::size_t si = 0; si < n_s; ++si) {
                const SaturationCell& c = cells[(ci * n_z + zi) * n_s + si];
                if (c.ok) {
                    non.push_back(c.noniter_error);
                    it.push_back(c.iter_error);
                    gain.push_back(c.noniter_error - c.iter_error);
                    t_non.push_back(c.tuned_noniter_error);
                    t_it.push_back(c.tuned_iter_error);
                    t_gain.push_back(c.tuned_noniter_error - c.tuned_iter_error);
                }
            }
            SaturationSummary s;
            s.components = config.components[ci];
            s.size = config.sizes[zi];
            s.noniter = stats(non);
            s.iter = stats(it);
            s.mean_improvement = mean_of(gain);
            s.tuned_noniter = stats(t_non);
            s.tuned_iter = stats(t_it);
            s.tuned_mean_improvement = mean_of(t_gain);
            std::seed_seq seq{static_cast<std::uint32_t>(config.bootstrap_seed),
                              static_cast<std::uint32_t>(s.components), static_cast<std::uint32_t>(s.size)};
            const Bootstrap b = bootstrap_mean(gain, config.bootstrap_resamples, seq);
            s.ci_low = b.low;
            s.ci_high = b.high;
            std::seed_seq seq_tuned{static_cast<std::uint32_t>(config.bootstrap_seed),
                                    static_cast<std::uint32_t>(s.components), static_cast<std::uint32_t>(s.size),
                                    1u};
            const Bootstrap bt = bootstrap_mean(t_gain, config.bootstrap_resamples, seq_tuned);
            s.tuned_ci_low = bt.low;
            s.tuned_ci_high = bt.high;
            result.summaries.push_back(s);
        }
    }
    return result;
}

// ---- serialization ---------------------------------------------------------

nlohmann::json to_json(const RateStudyConfig& c) {
    return {{"alpha", c.alpha},
            {"r", c.r},
            {"t_values", c.t_values},
            {"sizes", c.sizes},
            {"seeds", c.seeds},
            {"c_values", c.c_values},
            {"grid_size", c.grid_size},
            {"family", std::string(to_string(c.family))},
            {"link", c.link == LinkMode::prior_adjusted ? "prior_adjusted" : "plain"},
            {"target_eps", c.cg.target_eps},
            {"max_cg_iterations", c.cg.max_cg_iterations},
            {"weighting", std::string(to_string(c.cg.weighting))},
            {"bootstrap_resamples", c.bootstrap_resamples},
            {"bootstrap_seed", c.bootstrap_seed}};
}

nlohmann::json to_json(const GeometricConfig& c) {
    return {{"dataset_count", c.dataset_count},
            {"sample_count", c.sample_count},
            {"seeds", c.seeds},
            {"dimension", c.dimension},
            {"dataset_seed", c.dataset_seed},
            {"families", families_json(c.families)},
            {"lambda_grid", c.lambda_grid},
            {"t_grid", c.t_grid},
            {"fractions", c.fractions},
            {"target_eps", c.cg.target_eps},
            {"max_cg_iterations", c.cg.max_cg_iterations},
            {"weighting", std::string(to_string(c.cg.weighting))}};
}

nlohmann::json to_json(const SaturationConfig& c) {
    return {{"components", c.components},
            {"sizes", c.sizes},
            {"seeds", c.seeds},
            {"lambda_grid", c.lambda_grid},
            {"t_grid", c.t_grid},
            {"fractions", c.fractions},
            {"bootstrap_resamples", c.bootstrap_resamples},
            {"bootstrap_seed", c.bootstrap_seed}};
}

nlohmann::json rate_slopes_json(const RateStudyResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    nlohmann::json curves = nlohmann::json::array();
    auto curve_json = [&](const RateCurve& c, bool with_ci) {
        nlohmann::json means = nlohmann::json::array();
        for (double m : c.means) {
            means.push_back(num(m));
        }
        nlohmann::json j = {{"t", c.t},
                            {"c", num(c.c)},
                            {"sizes", r.config.sizes},
                            {"mean_error", means},
                            {"std_error", c.std_errors},
                            {"slope", c.complete ? num(c.fit.slope) : nlohmann::json()},
                            {"intercept", c.complete ? num(c.fit.intercept) : nlohmann::json()},
                            {"residuals", c.fit.residuals}};
        if (with_ci) {
            j["slope_ci95"] = {num(c.ci_low), num(c.ci_high)};
        }
        return j;
    };
    for (const auto& c : r.curves) {
        curves.push_back(curve_json(c, false));
    }
    nlohmann::json best = nlohmann::json::array();
    for (const auto& c : r.best) {
        best.push_back(curve_json(c, true));
    }
    int missing = 0;
    for (const auto& c : r.cells) {
        missing += c.ok ? 0 : 1;
    }
    return {{"config", to_json(r.config)}, {"best_per_t", best}, {"curves", curves}, {"missing_cells", missing}};
}

nlohmann::json saturation_summary_json(const SaturationResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : r.summaries) {
        rows.push_back({{"components", s.components},
                        {"size", s.size},
                        {"noniter_mean", s.noniter.mean},
                        {"noniter_sd", s.noniter.sd},
                        {"iter_mean", s.iter.mean},
                        {"iter_sd", s.iter.sd},
                        {"seeds_ok", s.iter.count},
                        {"mean_improvement", s.mean_improvement},
                        {"improvement_ci95", {s.ci_low, s.ci_high}},
                        {"tuned_noniter_mean", s.tuned_noniter.mean},
                        {"tuned_noniter_sd", s.tuned_noniter.sd},
                        {"tuned_iter_mean", s.tuned_iter.mean},
                        {"tuned_iter_sd", s.tuned_iter.sd},
                        {"tuned_mean_improvement", s.tuned_mean_improvement},
                        {"tuned_improvement_ci95", {s.tuned_ci_low, s.tuned_ci_high}}});
    }
    return {{"config", to_json(r.config)}, {"summary", rows}};
}

void write_rate_study(const RateStudyResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto out = open_out(dir / "rate_study.csv");
    out << "size,t,c,seed,error\n";
    for (const auto& c : r.cells) {
        out << c.size << ',' << c.t << ',' << format_double(c.c) << ',' << c.seed << ',' << cell_value(c.ok, c.error)
            << '\n';
    }
    write_json(dir / "rate_slopes.json", rate_slopes_json(r));
    write_json(dir / "rate_study.manifest.json",
               {{"generator", "rate-study"}, {"config", to_json(r.config)}, {"seeds", r.config.seeds},
                {"outputs", {"rate_study.csv", "rate_slopes.json"}}});
}

void write_geometric(const GeometricResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& fams = r.config.families;
    {
        auto out = open_out(dir / "geometric_table.csv");
        out << "dataset";
        for (auto f : fams) {
            const auto name = to_string(f);
            out << ',' << name << "_mean," << name << "_sd," << name << "_iter_mean," << name << "_iter_sd";
        }
        out << '\n';
        for (int d = 0; d < r.config.dataset_count; ++d) {
            out << d;
            for (auto f : fams) {
                for (const auto& row : r.rows) {
                    if (row.dataset == d && row.family == f) {
                        const bool ok = row.iter.count > 0;
                        out << ',' << cell_value(ok, row.noniter.mean) << ',' << cell_value(ok, row.noniter.sd) << ','
                            << cell_value(ok, row.iter.mean) << ',' << cell_value(ok, row.iter.sd);
                    }
                }
            }
            out << '\n';
        }
        out << "Avg";
        for (auto f : fams) {
            const double a = r.average(f, false);
            const double b = r.average(f, true);
            out << ',' << cell_value(std::isfinite(a), a) << ",," << cell_value(std::isfinite(b), b) << ',';
        }
        out << '\n';
    }
    {
        auto out = open_out(dir / "geometric_cells.csv");
        out << "dataset,seed,family,ok,noniter_lambda,noniter_error,iter_lambda,iter_t,iter_error\n";
        for (const auto& c : r.cells) {
            out << c.dataset << ',' << c.seed << ',' << to_string(c.family) << ',' << (c.ok ? 1 : 0) << ','
                << cell_value(c.ok, c.noniter_lambda) << ',' << cell_value(c.ok, c.noniter_error) << ','
                << cell_value(c.ok, c.iter_lambda) << ',' << c.iter_t << ',' << cell_value(c.ok, c.iter_error) << '\n';
        }
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& c : r.cells) {
        if (!c.ok) {
            failures.push_back({{"dataset", c.dataset}, {"seed", c.seed}, {"family", std::string(to_string(c.family))},
                                {"error", c.message}});
        }
    }
    write_json(dir / "geometric_table.manifest.json",
               {{"generator", "benchmark"}, {"config", to_json(r.config)}, {"seeds", r.config.seeds},
                {"failures", failures}, {"outputs", {"geometric_table.csv", "geometric_cells.csv"}}});
}

void write_saturation(const SaturationResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto out = open_out(dir / "saturation_study.csv");
    out << "components,size,seed,ok,noniter_lambda,noniter_error,iter_lambda,iter_t,iter_error,improvement,"
           "tuned_noniter_lambda,tuned_noniter_error,tuned_iter_lambda,tuned_iter_error,tuned_improvement\n";
    for (const auto& c : r.cells) {
        out << c.components << ',' << c.size << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ','
            << cell_value(c.ok, c.noniter_lambda) << ',' << cell_value(c.ok, c.noniter_error) << ','
            << cell_value(c.ok, c.iter_lambda) << ',' << c.iter_t << ',' << cell_value(c.ok, c.iter_error) << ','
            << cell_value(c.ok, c.noniter_error - c.iter_error) << ',' << cell_value(c.ok, c.tuned_noniter_lambda)
            << ',' << cell_value(c.ok, c.tuned_noniter_error) << ',' << cell_value(c.ok, c.tuned_iter_lambda) << ','
            << cell_value(c.ok, c.tuned_iter_error) << ','
            << cell_value(c.ok, c.tuned_noniter_error - c.tuned_iter_error) << '\n';
    }
    write_json(dir / "saturation_summary.json", saturation_summary_json(r));
    write_json(dir / "saturation_study.manifest.json",
               {{"generator", "saturation-study"}, {"config", to_json(r.config)}, {"seeds", r.config.seeds},
                {"outputs", {"saturation_study.csv", "saturation_summary.json"}}});
}

}  // namespace itdre
