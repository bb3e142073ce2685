#include "itdre/selection.hpp"

#include "itdre/errors.hpp"
#include "itdre/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace itdre {

namespace {

Points take_rows(const Points& x, const std::vector<Eigen::Index>& idx, Eigen::Index begin, Eigen::Index count) {
    Points out(count, x.cols());
    for (Eigen::Index i = 0; i < count; ++i) {
        out.row(i) = x.row(idx[static_cast<std::size_t>(begin + i)]);
    }
    return out;
}

std::vector<Points> split_one(const Points& x, const std::vector<double>& fractions, std::uint64_t seed,
                              std::uint64_t stream, const char* name) {
    const auto sizes = split_sizes(x.rows(), fractions);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] <= 0) {
            throw InvalidConfig(fmt::format("split: partition {} of the {} {} points would be empty", k, x.rows(), name));
        }
    }
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::mt19937_64 rng(seq);
    // Fisher-Yates written out so the permutation does not depend on the
    // standard library's shuffle.
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    std::vector<Points> parts;
    Eigen::Index begin = 0;
    for (Eigen::Index s : sizes) {
        parts.push_back(take_rows(x, idx, begin, s));
        begin += s;
    }
    return parts;
}

bool better(const GridPoint& a, std::size_t ia, const GridPoint& b, std::size_t ib) {
    if (a.score != b.score) {
        return a.score < b.score;
    }
    if (a.t != b.t) {
        return a.t < b.t;
    }
    if (a.lambda != b.lambda) {
        return a.lambda < b.lambda;
    }
    return ia < ib;
}

}  // namespace

std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int e = -6; e <= 4; ++e) {
        g.push_back(std::pow(10.0, e));
    }
    return g;
}

std::vector<int> default_t_grid() {
    return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
}

std::vector<int> ensemble_t_grid() {
    return {1, 5, 10};
}

void SelectionConfig::validate() const {
    if (lambda_grid.empty() || t_grid.empty()) {
        throw InvalidConfig("selection: lambda and t grids must be nonempty");
    }
    for (double l : lambda_grid) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw InvalidConfig(fmt::format("selection: lambda {} is not a positive finite value", l));
        }
    }
    for (int t : t_grid) {
        if (t < 1) {
            throw InvalidConfig(fmt::format("selection: t = {} must be >= 1", t));
        }
    }
    if (fractions.size() != 2 && fractions.size() != 3) {
        throw InvalidConfig("selection: split needs two or three fractions");
    }
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) {
            throw InvalidConfig("selection: split fractions must be positive");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidConfig(fmt::format("selection: split fractions sum to {} instead of 1", sum));
    }
}

std::vector<Eigen::Index> split_sizes(Eigen::Index n, const std::vector<double>& fractions) {
    std::vector<Eigen::Index> sizes;
    Eigen::Index used = 0;
    for (std::size_t k = 0; k + 1 < fractions.size(); ++k) {
        const auto s = static_cast<Eigen::Index>(std::llround(fractions[k] * static_cast<double>(n)));
        sizes.push_back(std::min(s, n - used));
        used += sizes.back();
    }
    sizes.push_back(n - used);
    return sizes;
}

SplitData split_data(const Points& x_p, const Points& x_q, const SelectionConfig& config) {
    config.validate();
    if (x_p.cols() != x_q.cols()) {
        throw InvalidInput("split: P and Q dimensions differ");
    }
    auto p = split_one(x_p, config.fractions, config.seed, 1, "P");
    auto q = split_one(x_q, config.fractions, config.seed, 2, "Q");
    SplitData s;
    s.p_train = std::move(p[0]);
    s.p_val = std::move(p[1]);
    s.q_train = std::move(q[0]);
    s.q_val = std::move(q[1]);
    if (p.size() == 3) {
        s.p_test = std::move(p[2]);
        s.q_test = std::move(q[2]);
    } else {
        s.p_test.resize(0, x_p.cols());
        s.q_test.resize(0, x_q.cols());
    }
    return s;
}

GridEvaluation evaluate_grid(const SplitData& split, LossFamily family, const KernelSpec& kernel,
                             const SelectionConfig& config) {
    config.validate();
    const TrainingSet train(split.p_train, split.q_train, kernel);
    const int t_max = *std::max_element(config.t_grid.begin(), config.t_grid.end());
    const std::size_t n_l = config.lambda_grid.size();
    const std::size_t n_t = config.t_grid.size();

    GridEvaluation out;
    out.family = family;
    out.kernel = kernel;
    out.points.resize(n_l * n_t);
    out.models.resize(n_l * n_t);
    out.fit_seconds.assign(n_l, 0.0);

    const Eigen::MatrixXd k_val_p = gram(kernel, split.p_val, *train.anchors());
    const Eigen::MatrixXd k_val_q = gram(kernel, split.q_val, *train.anchors());

    parallel_for(n_l, [&](std::size_t li) {
        const double lambda = config.lambda_grid[li];
        for (std::size_t ti = 0; ti < n_t; ++ti) {
            auto& pt = out.points[li * n_t + ti];
            pt.lambda = lambda;
            pt.t = config.t_grid[ti];
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            const FitResult res = fit(train, family, lambda, t_max, config.cg);
            for (std::size_t ti = 0; ti < n_t; ++ti) {
                auto& pt = out.points[li * n_t + ti];
                const RatioModel& m = res.path[static_cast<std::size_t>(pt.t - 1)];
                const Eigen::VectorXd sp = k_val_p * m.coeffs();
                const Eigen::VectorXd sq = k_val_q * m.coeffs();
                pt.score = empirical_risk(family, std::span<const double>(sp.data(), static_cast<std::size_t>(sp.size())),
                                          std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size())));
                if (std::isfinite(pt.score)) {
                    pt.ok = true;
                    out.models[li * n_t + ti] = m;
                } else {
                    pt.error = "non-finite validation score";
                }
            }
        } catch (const std::exception& e) {
            for (std::size_t ti = 0; ti < n_t; ++ti) {
                out.points[li * n_t + ti].error = e.what();
            }
        }
        out.fit_seconds[li] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return out;
}

SelectionResult pick(const GridEvaluation& grid, const std::vector<int>& allowed_t) {
    std::optional<std::size_t> best;
    std::string failures;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const GridPoint& pt = grid.points[i];
        if (!allowed_t.empty() && std::find(allowed_t.begin(), allowed_t.end(), pt.t) == allowed_t.end()) {
            continue;
        }
        if (!pt.ok) {
            failures += fmt::format("\n  lambda={} t={}: {}", pt.lambda, pt.t, pt.error);
            continue;
        }
        if (!best || better(pt, i, grid.points[*best], *best)) {
            best = i;
        }
    }
    if (!best) {
        throw SelectionFailure("selection: every grid point failed" + failures);
    }
    const GridPoint& b = grid.points[*best];
    SelectionResult r{b.lambda, b.t, b.score, *best, {}, *grid.models[*best], 0, 0.0};
    for (const auto& pt : grid.points) {
        if (allowed_t.empty() || std::find(allowed_t.begin(), allowed_t.end(), pt.t) != allowed_t.end()) {
            r.points.push_back(pt);
        }
    }
    r.wall_seconds = std::accumulate(grid.fit_seconds.begin(), grid.fit_seconds.end(), 0.0);
    return r;
}

SelectionResult select(const Points& x_p, const Points& x_q, LossFamily family, const KernelSpec& kernel,
                       const SelectionConfig& config) {
    const SplitData split = split_data(x_p, x_q, config);
    SelectionResult r = pick(evaluate_grid(split, family, kernel, config));
    r.seed = config.seed;
    return r;
}

nlohmann::json selection_to_json(const SelectionResult& result, bool include_timings) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& pt : result.points) {
        nlohmann::json row = {{"lambda", pt.lambda}, {"t", pt.t}, {"ok", pt.ok}};
        if (pt.ok) {
            row["score"] = pt.score;
        } else {
            row["error"] = pt.error;
        }
        grid.push_back(std::move(row));
    }
    nlohmann::json doc = {
        {"seed", result.seed},
        {"family", std::string(to_string(result.model.family()))},
        {"kernel", result.model.kernel().describe()},
        {"chosen", {{"lambda", result.best_lambda}, {"t", result.best_t}, {"score", result.best_score}}},
        {"grid", grid},
    };
    if (include_timings) {
        doc["wall_seconds"] = result.wall_seconds;
    }
    return doc;
}

}  // namespace itdre
