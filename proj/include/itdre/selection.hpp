#pragma once

#include "itdre/kernels.hpp"
#include "itdre/losses.hpp"
#include "itdre/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace itdre {

/// 1e-6, 1e-5, ..., 1e4.
std::vector<double> default_lambda_grid();
/// 1, 2, ..., 10.
std::vector<int> default_t_grid();
/// 1, 5, 10.
std::vector<int> ensemble_t_grid();

struct SelectionConfig {
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<int> t_grid = default_t_grid();
    /// Two fractions (train/val) or three (train/val/test), summing to 1.
    std::vector<double> fractions = {0.64, 0.16, 0.20};
    std::uint64_t seed = 0;
    CgOptions cg;

    /// Throws InvalidConfig on empty grids, nonpositive entries or bad fractions.
    void validate() const;
};

struct SplitData {
    Points p_train, p_val, p_test;
    Points q_train, q_val, q_test;
};

/// Partition sizes for n points: round(f_i n) for all but the last part,
/// which takes the remainder.
std::vector<Eigen::Index> split_sizes(Eigen::Index n, const std::vector<double>& fractions);

/// Seeded shuffle then contiguous split, done for P and Q independently.
/// Test partitions are empty under a two-way split.
SplitData split_data(const Points& x_p, const Points& x_q, const SelectionConfig& config);

struct GridPoint {
    double lambda = 0.0;
    int t = 0;
    /// Pooled empirical risk on the validation partition.
    double score = 0.0;
    bool ok = false;
    std::string error;
};

/// Every (lambda, t) point of a grid fitted on train and scored on val.
/// One path to max(t_grid) is fitted per lambda; the model for t is the
/// t-th iterate of that path.
struct GridEvaluation {
    LossFamily family = LossFamily::kulsif;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    std::vector<GridPoint> points;  // lambda-major, in grid order
    std::vector<std::optional<RatioModel>> models;
    std::vector<double> fit_seconds;  // per lambda
};

GridEvaluation evaluate_grid(const SplitData& split, LossFamily family, const KernelSpec& kernel,
                             const SelectionConfig& config);

struct SelectionResult {
    double best_lambda = 0.0;
    int best_t = 0;
    double best_score = 0.0;
    std::size_t best_index = 0;
    std::vector<GridPoint> points;
    RatioModel model;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

/// Argmin of the validation score over grid points whose t is in
/// `allowed_t` (all when empty). Ties go to smaller t, then smaller lambda,
/// then the earlier grid index. Throws SelectionFailure when no allowed
/// point succeeded.
SelectionResult pick(const GridEvaluation& grid, const std::vector<int>& allowed_t = {});

/// split_data + evaluate_grid + pick.
SelectionResult select(const Points& x_p, const Points& x_q, LossFamily family, const KernelSpec& kernel,
                       const SelectionConfig& config);

/// {seed, family, kernel, chosen: {lambda, t, score}, grid: [...]} plus
/// wall time when requested.
nlohmann::json selection_to_json(const SelectionResult& result, bool include_timings = false);

}  // namespace itdre
