#pragma once

#include "itdre/solver.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace itdre {

std::vector<double> default_rcond_grid();

/// Which matrix the rcond cutoff is applied to.
enum class Truncation { after_weighting, before_weighting };

std::string_view to_string(Truncation t);
std::optional<Truncation> parse_truncation(std::string_view name);

/// Candidate outputs on n source points. Each candidate is n x k (k = 1 for
/// binary scores, k classes otherwise). Labels are n x k: real targets for
/// k = 1, one-hot rows for k > 1.
struct EnsembleProblem {
    std::vector<std::string> ids;
    std::vector<Eigen::MatrixXd> candidates;
    Eigen::MatrixXd labels;
    Eigen::VectorXd weights;
    std::vector<double> rcond_grid = default_rcond_grid();
    Truncation truncation = Truncation::after_weighting;

    Eigen::Index samples() const noexcept { return labels.rows(); }
    Eigen::Index classes() const noexcept { return labels.cols(); }

    /// Throws InvalidInput on inconsistent shapes or non-finite/negative weights.
    void validate() const;
};

struct EnsembleWeights {
    std::vector<double> rcond;
    std::vector<Eigen::VectorXd> coefficients;
    /// Singular values kept for each rcond.
    std::vector<Eigen::Index> rank;
};

/// Class blocks stacked row-wise: (n k) x l design matrix.
Eigen::MatrixXd design_matrix(const std::vector<Eigen::MatrixXd>& candidates);

/// Per rcond: c = pinv_rho(W^{1/2} F) W^{1/2} y, singular values at or below
/// rho * sigma_max dropped. Throws DegenerateWeights when every weight is 0.
EnsembleWeights solve_ensemble(const EnsembleProblem& problem);

struct EnsembleEvaluation {
    std::vector<double> accuracy;  // per rcond
    double averaged_accuracy = 0.0;
};

/// Sign agreement for k = 1, argmax agreement for k > 1.
EnsembleEvaluation evaluate_ensemble(const EnsembleWeights& weights, const std::vector<Eigen::MatrixXd>& candidates,
                                     const Eigen::MatrixXd& labels);

/// {per_rcond: [{rcond, rank, coefficients, accuracy}], averaged_accuracy}.
nlohmann::json ensemble_to_json(const EnsembleWeights& weights, const EnsembleEvaluation& eval);

/// Files describing one ensemble problem. Weights come from `weights_file`
/// or, when absent, from `ratio_model` evaluated on `features_file`
/// (`sample_id,x1,...,xd`).
struct CandidateFiles {
    std::vector<std::filesystem::path> candidate_files;
    std::filesystem::path labels_file;
    std::optional<std::filesystem::path> weights_file;
    std::optional<std::filesystem::path> features_file;
    std::optional<RatioModel> ratio_model;
    /// When false and no weight source is given, every weight is 1 (target sets).
    bool require_weights = true;
};

/// Joins every file on sample_id in the order of the first candidate file.
/// Ids missing from any file are ParseError(unmatched_id).
EnsembleProblem ingest_candidates(const CandidateFiles& files);

/// Writes candidates c<i>.csv, labels.csv and weights.csv into `dir` and
/// returns the file set that reads them back.
CandidateFiles export_problem(const EnsembleProblem& problem, const std::filesystem::path& dir);

/// One-hot rows from class indices 0..k-1.
Eigen::MatrixXd one_hot(const std::vector<int>& classes, int k);

}  // namespace itdre
