// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "fixtures.hpp"

#include "itdre/ensemble.hpp"
#include "itdre/experiments.hpp"
#include "itdre/kernels.hpp"
#include "itdre/losses.hpp"
#include "itdre/solver.hpp"
#include "itdre/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace itdre;

namespace {

constexpr LossFamily kFamilies[] = {LossFamily::kulsif, LossFamily::lr, LossFamily::exp, LossFamily::sq};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool report(int id, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    fmt::print("criterion {}: {} {} [{:.2f} s]\n", id, o.pass ? "PASS" : "FAIL", o.detail, seconds_since(start));
    std::fflush(stdout);
    return o.pass;
}

Outcome closed_form_vs_cg() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Points xp = fixtures::random_points(50, 2, 100 + seed);
        const Points xq = fixtures::random_points(50, 2, 200 + seed, 0.5);
        const TrainingSet data(xp, xq, KernelSpec::gaussian(median_bandwidth(stack(xp, xq))));
        for (double lambda : {1e-2, 1.0}) {
            for (int t : {1, 3}) {
                const FitResult cf = fit_kulsif(data, lambda, t);
                const FitResult cg = fit_cg(data, LossFamily::kulsif, lambda, t);
                Eigen::VectorXd prev_cf = Eigen::VectorXd::Zero(data.size());
                Eigen::VectorXd prev_cg = Eigen::VectorXd::Zero(data.size());
                for (int k = 0; k < t; ++k) {
                    const auto& a_cf = cf.path[static_cast<std::size_t>(k)].coeffs();
                    const auto& a_cg = cg.path[static_cast<std::size_t>(k)].coeffs();
                    const double j_cf =
                        iterated_objective(data, LossFamily::kulsif, lambda, SampleWeighting::pooled, a_cf, prev_cf);
                    const double j_cg =
                        iterated_objective(data, LossFamily::kulsif, lambda, SampleWeighting::pooled, a_cg, prev_cg);
                    worst = std::max(worst, std::abs(j_cg - j_cf) / std::max(std::abs(j_cf), 1e-300));
                    prev_cf = a_cf;
                    prev_cg = a_cg;
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-6 && elapsed < 10.0,
            fmt::format("worst relative objective gap {:.3g} (tol 1e-6), {:.2f} s (limit 10 s)", worst, elapsed)};
}

Outcome recursion_vs_newton() {
    double worst = 0.0;
    int cases = 0;
    for (Eigen::Index total = 2; total <= 6; ++total) {
        for (Eigen::Index m = 1; m < total; ++m) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const Points xp = fixtures::random_points(m, 2, 300 + 10 * static_cast<std::uint64_t>(total) + seed);
                const Points xq =
                    fixtures::random_points(total - m, 2, 400 + 10 * static_cast<std::uint64_t>(total) + seed, 0.4);
                const KernelSpec kernel = KernelSpec::gaussian(1.0);
                const Eigen::MatrixXd K = gram(kernel, stack(xp, xq), stack(xp, xq));
                for (SampleWeighting w : {SampleWeighting::pooled, SampleWeighting::class_balanced}) {
                    for (double lambda : {0.1, 1.0}) {
                        const FitResult fit = fit_kulsif(xp, xq, kernel, lambda, 3, w);
                        const auto oracle = fixtures::newton_path(K, m, LossFamily::kulsif, lambda, 3, w);
                        for (std::size_t k = 0; k < 3; ++k) {
                            worst = std::max(worst, (fit.path[k].coeffs() - oracle[k]).cwiseAbs().maxCoeff());
                        }
                        ++cases;
                    }
                }
            }
        }
    }
    return {worst <= 1e-8, fmt::format("{} problems with N <= 6, k <= 3, worst coefficient gap {:.3g} (tol 1e-8)",
                                       cases, worst)};
}

Outcome risk_identity() {
    double worst = 0.0;
    for (LossFamily f : kFamilies) {
        for (const auto& s : fixtures::fixture_scores()) {
            worst = std::max(worst, std::abs(fixtures::bregman_identity(f, s, 4096).gap()));
        }
    }
    return {worst <= 1e-3, fmt::format("4 families x 5 scores, worst gap {:.3g} (tol 1e-3)", worst)};
}

Outcome self_concordance() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> score(-6.0, 6.0);
    std::bernoulli_distribution coin(0.5);
    double worst = -1e300;
    for (LossFamily f : kFamilies) {
        for (int i = 0; i < 1000; ++i) {
            const int y = coin(rng) ? 1 : -1;
            const double v = score(rng);
            worst = std::max(worst, std::abs(loss_d3(f, y, v)) - loss_d2(f, y, v));
        }
    }
    return {worst <= 1e-12, fmt::format("4 x 1000 draws, max |l'''| - l'' = {:.3g} (slack 1e-12)", worst)};
}

Outcome rate_study() {
    const auto start = std::chrono::steady_clock::now();
    const RateStudyResult r = run_rate_study(RateStudyConfig{});
    const double elapsed = seconds_since(start);
    const RateCurve& one = r.best_for(1);
    const RateCurve& eight = r.best_for(8);
    const bool complete = one.complete && eight.complete;
    const bool slope = eight.fit.slope < one.fit.slope;
    const bool last = eight.means.back() <= one.means.back();
    return {complete && slope && last && elapsed < 900.0,
            fmt::format("slope t=8 {:.4f} (c={:g}) vs t=1 {:.4f} (c={:g}); error at N=4000 t=8 {:.4g} vs t=1 {:.4g}; "
                        "{:.0f} s (limit 900 s)",
                        eight.fit.slope, eight.c, one.fit.slope, one.c, eight.means.back(), one.means.back(),
                        elapsed)};
}

Outcome saturation_and_benchmark() {
    const auto start = std::chrono::steady_clock::now();
    const SaturationResult sat = run_mixture_saturation_study(SaturationConfig{});
    std::string detail = "saturation improvement (tuned lambda):";
    bool pass = true;
    std::vector<double> tuned;
    for (int k : {1, 2, 3}) {
        const double v = sat.mean_improvement(k, SaturationProtocol::tuned);
        tuned.push_back(v);
        pass = pass && v >= 0.0;
        detail += fmt::format(" k={} {:.3g}", k, v);
    }
    pass = pass && tuned[0] >= tuned[2];
    detail += "; validation-selected:";
    for (int k : {1, 2, 3}) {
        detail += fmt::format(" k={} {:.3g}", k, sat.mean_improvement(k));
    }
    const GeometricResult geo = run_geometric_benchmark(GeometricConfig{});
    const double non = geo.average(LossFamily::kulsif, false);
    const double it = geo.average(LossFamily::kulsif, true);
    pass = pass && it <= non;
    const double elapsed = seconds_since(start);
    pass = pass && elapsed < 1200.0;
    detail += fmt::format("; benchmark iterated {:.5g} vs non-iterated {:.5g}; {:.0f} s (limit 1200 s)", it, non,
                          elapsed);
    return {pass, detail};
}

Outcome ensemble() {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    const Eigen::Index n = 64;
    Eigen::VectorXd y(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = (rng() & 1u) ? 1.0 : -1.0;
        w(i) = u(rng);
    }
    EnsembleProblem perfect;
    perfect.labels = y;
    perfect.candidates = {y};
    perfect.weights = w;
    const EnsembleWeights pw = solve_ensemble(perfect);
    const EnsembleEvaluation pe = evaluate_ensemble(pw, perfect.candidates, perfect.labels);
    double c_gap = 0.0;
    double min_acc = 1.0;
    for (std::size_t i = 0; i < pw.coefficients.size(); ++i) {
        c_gap = std::max(c_gap, std::abs(pw.coefficients[i](0) - 1.0));
        min_acc = std::min(min_acc, pe.accuracy[i]);
    }
    const bool perfect_ok = pw.coefficients.size() == 4 && c_gap <= 1e-10 && min_acc == 1.0;

    EnsembleProblem dup;
    dup.labels = y;
    const Eigen::MatrixXd base = fixtures::random_points(n, 1, 32);
    dup.candidates = {base, base};
    dup.weights = w;
    double dup_gap = 0.0;
    for (const auto& c : solve_ensemble(dup).coefficients) {
        dup_gap = std::max(dup_gap, std::abs(c(0) - c(1)));
    }

    EnsembleProblem mix;
    mix.labels = y;
    for (std::uint64_t s = 0; s < 5; ++s) {
        mix.candidates.push_back(fixtures::random_points(n, 1, 40 + s));
    }
    mix.weights = w;
    const EnsembleWeights a = solve_ensemble(mix);
    double scale_gap = 0.0;
    for (double s : {1e-3, 3.0, 1e3}) {
        EnsembleProblem scaled = mix;
        scaled.weights *= s;
        const EnsembleWeights b = solve_ensemble(scaled);
        for (std::size_t i = 0; i < a.coefficients.size(); ++i) {
            scale_gap = std::max(scale_gap, (a.coefficients[i] - b.coefficients[i]).cwiseAbs().maxCoeff());
        }
    }
    return {perfect_ok && dup_gap <= 1e-8 && scale_gap <= 1e-10,
            fmt::format("perfect |c-1| {:.3g}, min accuracy {:g}; duplicate gap {:.3g} (tol 1e-8); rescaling gap "
                        "{:.3g} (tol 1e-10)",
                        c_gap, min_acc, dup_gap, scale_gap)};
}

Outcome property_suites() {
    const auto start = std::chrono::steady_clock::now();
    const std::string cmd = std::string("\"") + ITDRE_UNIT_TESTS + "\" --gtest_brief=1 > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const double elapsed = seconds_since(start);
    return {status == 0 && elapsed < 120.0,
            fmt::format("unit and property suites exit status {}, {:.1f} s (limit 120 s)", status, elapsed)};
}

}  // namespace

int main() {
    bool all = true;
    all = report(1, closed_form_vs_cg) && all;
    all = report(2, recursion_vs_newton) && all;
    all = report(3, risk_identity) && all;
    all = report(4, self_concordance) && all;
    all = report(5, rate_study) && all;
    all = report(6, saturation_and_benchmark) && all;
    all = report(7, ensemble) && all;
    all = report(8, property_suites) && all;
    fmt::print("acceptance: {}\n", all ? "PASS" : "FAIL");
    return all ? 0 : 1;
}
