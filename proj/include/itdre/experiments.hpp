#pragma once

#include "itdre/losses.hpp"
#include "itdre/selection.hpp"
#include "itdre/solver.hpp"
#include "itdre/synthetic.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace itdre {

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

/// Least-squares line y = intercept + slope x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> residuals;
};
LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);

// ---- rate study -----------------------------------------------------------

struct RateStudyConfig {
    int alpha = 2;
    double r = 1.25;
    std::vector<int> t_values = {1, 8};
    std::vector<int> sizes = {250, 500, 1000, 2000, 4000};
    std::vector<std::uint64_t> seeds = seed_range(0, 10);
    /// lambda = c N^{-alpha / (1 + alpha (2r + 1))} for each c.
    std::vector<double> c_values = {0.1, 1.0, 10.0};
    std::size_t grid_size = 4096;
    LossFamily family = LossFamily::lr;
    LinkMode link = LinkMode::prior_adjusted;
    CgOptions cg;
    int bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0;

    void validate() const;
};

double rate_lambda(const RateStudyConfig& config, int size, double c);

struct RateCell {
    int size = 0;
    int t = 0;
    double c = 0.0;
    std::uint64_t seed = 0;
    double error = 0.0;
    bool ok = false;
    std::string message;
};

/// Mean L1 error per size for one (t, c), standard errors over seeds.
struct RateCurve {
    int t = 0;
    double c = 0.0;
    std::vector<double> means;
    std::vector<double> std_errors;
    std::vector<int> counts;
    bool complete = false;
    LineFit fit;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct RateStudyResult {
    RateStudyConfig config;
    std::vector<RateCell> cells;
    /// Every (t, c) curve.
    std::vector<RateCurve> curves;
    /// Per t, the c whose curve has the smallest summed log error.
    std::vector<RateCurve> best;

    const RateCurve& best_for(int t) const;
};

RateStudyResult run_rate_study(const RateStudyConfig& config);

// ---- geometric benchmark ----------------------------------------------------

struct GeometricConfig {
    int dataset_count = 5;
    int sample_count = 1000;
    std::vector<std::uint64_t> seeds = seed_range(0, 5);
    int dimension = 10;
    std::uint64_t dataset_seed = 0;
    std::vector<LossFamily> families = {LossFamily::kulsif};
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
    std::vector<double> fractions = {0.64, 0.16, 0.20};
    CgOptions cg;

    void validate() const;
};

struct GeometricCell {
    int dataset = 0;
    std::uint64_t seed = 0;
    LossFamily family = LossFamily::kulsif;
    bool ok = false;
    std::string message;
    double noniter_error = 0.0;
    double iter_error = 0.0;
    double noniter_lambda = 0.0;
    double iter_lambda = 0.0;
    int iter_t = 0;
};

struct MethodStats {
    double mean = 0.0;
    double sd = 0.0;
    int count = 0;
};

struct BenchmarkTableRow {
    int dataset = 0;
    LossFamily family = LossFamily::kulsif;
    MethodStats noniter;
    MethodStats iter;
    int failures = 0;
};

struct GeometricResult {
    GeometricConfig config;
    std::vector<GeometricCell> cells;
    std::vector<BenchmarkTableRow> rows;

    /// Mean over datasets of the per-dataset means.
    double average(LossFamily family, bool iterated) const;
};

/// Twice the Monte-Carlo Bregman error over Q test draws.
double twice_bregman(LossFamily family, const MixturePairProblem& problem, const RatioModel& model,
                     const Points& q_test);

GeometricResult run_geometric_benchmark(const GeometricConfig& config);

// ---- mixture saturation study ---------------------------------------------

/// 10^-6, 10^-5.75, ..., 10^2.
std::vector<double> saturation_lambda_grid();

struct SaturationConfig {
    std::vector<int> components = {1, 2, 3};
    std::vector<int> sizes = {200, 400, 800};
    std::vector<std::uint64_t> seeds = seed_range(0, 10);
    std::vector<double> lambda_grid = saturation_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
    std::vector<double> fractions = {0.64, 0.16, 0.20};
    int bootstrap_resamples = 200;
    std::uint64_t bootstrap_seed = 0;

    void validate() const;
};

struct SaturationCell {
    int components = 0;
    int size = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string message;
    double noniter_error = 0.0;
    double iter_error = 0.0;
    double noniter_lambda = 0.0;
    double iter_lambda = 0.0;
    int iter_t = 0;
    /// Same fits with lambda tuned against the exact ratio: t = 1 against
    /// t = max(t_grid), each at its own best lambda.
    double tuned_noniter_error = 0.0;
    double tuned_iter_error = 0.0;
    double tuned_noniter_lambda = 0.0;
    double tuned_iter_lambda = 0.0;
};

/// How the hyperparameters of the two compared methods are chosen.
enum class SaturationProtocol { validation, tuned };

struct SaturationSummary {
    int components = 0;
    int size = 0;
    MethodStats noniter;
    MethodStats iter;
    double mean_improvement = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    MethodStats tuned_noniter;
    MethodStats tuned_iter;
    double tuned_mean_improvement = 0.0;
    double tuned_ci_low = 0.0;
    double tuned_ci_high = 0.0;
};

struct SaturationResult {
    SaturationConfig config;
    std::vector<SaturationCell> cells;
    std::vector<SaturationSummary> summaries;

    /// Improvement (non-iterated minus iterated) averaged over sizes and seeds.
    double mean_improvement(int components, SaturationProtocol protocol = SaturationProtocol::validation) const;
};

/// Twice the Bregman error of a KuLSIF model against the exact 1-D ratio,
/// by trapezoid quadrature of the Q-weighted integrand on [-8, 8].
double twice_bregman_1d(const MixturePairProblem& problem, const RatioModel& model);

SaturationResult run_mixture_saturation_study(const SaturationConfig& config);

// ---- serialization ---------------------------------------------------------

nlohmann::json to_json(const RateStudyConfig& c);
nlohmann::json to_json(const GeometricConfig& c);
nlohmann::json to_json(const SaturationConfig& c);
nlohmann::json rate_slopes_json(const RateStudyResult& r);
nlohmann::json saturation_summary_json(const SaturationResult& r);

/// rate_study.csv, rate_slopes.json and rate_study.manifest.json.
void write_rate_study(const RateStudyResult& r, const std::filesystem::path& dir);
/// geometric_table.csv, geometric_cells.csv and geometric_table.manifest.json.
void write_geometric(const GeometricResult& r, const std::filesystem::path& dir);
/// saturation_study.csv, saturation_summary.json and saturation_study.manifest.json.
void write_saturation(const SaturationResult& r, const std::filesystem::path& dir);

}  // namespace itdre
