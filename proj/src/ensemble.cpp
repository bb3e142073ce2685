#include "itdre/ensemble.hpp"

#include "itdre/csv.hpp"
#include "itdre/errors.hpp"
#include "itdre/parallel.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_map>

namespace itdre {

namespace {

using Kind = ParseError::Kind;

/// Minimum-norm least squares over singular values above cutoff * sigma_max.
Eigen::VectorXd truncated_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double cutoff,
                                Eigen::Index& rank) {
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    rank = 0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(a.cols());
    if (s.size() == 0 || s[0] == 0.0) {
        return c;
    }
    const double threshold = cutoff * s[0];
    const Eigen::VectorXd ub = svd.matrixU().transpose() * b;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > threshold) {
            c += svd.matrixV().col(i) * (ub[i] / s[i]);
            ++rank;
        }
    }
    return c;
}

Eigen::VectorXd stacked_labels(const Eigen::MatrixXd& labels) {
    Eigen::VectorXd y(labels.size());
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
        y.segment(c * labels.rows(), labels.rows()) = labels.col(c);
    }
    return y;
}

std::unordered_map<std::string, Eigen::Index> index_ids(const IdTable& t, const std::string& file) {
    std::unordered_map<std::string, Eigen::Index> map;
    for (std::size_t r = 0; r < t.ids.size(); ++r) {
        if (!map.emplace(t.ids[r], static_cast<Eigen::Index>(r)).second) {
            throw ParseError(Kind::bad_value, file, r + 1, fmt::format("duplicate sample_id '{}'", t.ids[r]));
        }
    }
    return map;
}

/// Reorders `t` to `ids`; every id must match exactly once.
Eigen::MatrixXd align(const IdTable& t, const std::vector<std::string>& ids, const std::string& file) {
    const auto map = index_ids(t, file);
    if (t.ids.size() != ids.size()) {
        std::unordered_map<std::string, int> wanted;
        for (const auto& id : ids) {
            wanted[id] = 1;
        }
        for (std::size_t r = 0; r < t.ids.size(); ++r) {
            if (!wanted.count(t.ids[r])) {
                throw ParseError(Kind::unmatched_id, file, r + 1, fmt::format("sample_id '{}' not in candidates", t.ids[r]));
            }
        }
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), t.values.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = map.find(ids[i]);
        if (it == map.end()) {
            throw ParseError(Kind::unmatched_id, file, 0,
                             fmt::format("sample_id '{}' (candidate row {}) missing", ids[i], i + 1));
        }
        out.row(static_cast<Eigen::Index>(i)) = t.values.row(it->second);
    }
    return out;
}

}  // namespace

std::vector<double> default_rcond_grid() {
    return {1e-4, 1e-3, 1e-2, 1e-1};
}

std::string_view to_string(Truncation t) {
    return t == Truncation::after_weighting ? "after_weighting" : "before_weighting";
}

std::optional<Truncation> parse_truncation(std::string_view name) {
    if (name == "after_weighting") {
        return Truncation::after_weighting;
    }
    if (name == "before_weighting") {
        return Truncation::before_weighting;
    }
    return std::nullopt;
}

void EnsembleProblem::validate() const {
    const Eigen::Index n = labels.rows();
    const Eigen::Index k = labels.cols();
    if (n < 1 || k < 1 || candidates.empty()) {
        throw InvalidInput("ensemble: need at least one sample, one class column and one candidate");
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].rows() != n || candidates[i].cols() != k) {
            throw InvalidInput(fmt::format("ensemble: candidate {} is {}x{}, expected {}x{}", i, candidates[i].rows(),
                                           candidates[i].cols(), n, k));
        }
        if (!candidates[i].allFinite()) {
            throw InvalidInput(fmt::format("ensemble: candidate {} has non-finite entries", i));
        }
    }
    if (!labels.allFinite()) {
        throw InvalidInput("ensemble: labels have non-finite entries");
    }
    if (weights.size() != n) {
        throw InvalidInput(fmt::format("ensemble: {} weights for {} samples", weights.size(), n));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::isfinite(weights[j]) || weights[j] < 0.0) {
            throw InvalidInput(fmt::format("ensemble: weight {} at row {} is not finite and nonnegative", weights[j], j));
        }
    }
    if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != n) {
        throw InvalidInput("ensemble: id count does not match samples");
    }
    if (rcond_grid.empty()) {
        throw InvalidInput("ensemble: empty rcond grid");
    }
    for (double r : rcond_grid) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw InvalidInput(fmt::format("ensemble: rcond {} must be positive", r));
        }
    }
}

Eigen::MatrixXd design_matrix(const std::vector<Eigen::MatrixXd>& candidates) {
    const Eigen::Index n = candidates.front().rows();
    const Eigen::Index k = candidates.front().cols();
    Eigen::MatrixXd f(n * k, static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (Eigen::Index c = 0; c < k; ++c) {
            f.col(static_cast<Eigen::Index>(i)).segment(c * n, n) = candidates[i].col(c);
        }
    }
    return f;
}

EnsembleWeights solve_ensemble(const EnsembleProblem& problem) {
    problem.validate();
    if (problem.weights.maxCoeff() <= 0.0) {
        throw DegenerateWeights("ensemble: every importance weight is zero");
    }
    const Eigen::Index n = problem.samples();
    const Eigen::Index k = problem.classes();
    const Eigen::MatrixXd f = design_matrix(problem.candidates);
    Eigen::VectorXd sw(n * k);
    for (Eigen::Index c = 0; c < k; ++c) {
        sw.segment(c * n, n) = problem.weights.cwiseSqrt();
    }
    const Eigen::MatrixXd wf = sw.asDiagonal() * f;
    const Eigen::VectorXd wy = sw.cwiseProduct(stacked_labels(problem.labels));

    EnsembleWeights out;
    out.rcond = problem.rcond_grid;
    out.coefficients.resize(out.rcond.size());
    out.rank.resize(out.rcond.size());
    parallel_for(out.rcond.size(), [&](std::size_t i) {
        const double rho = out.rcond[i];
        if (problem.truncation == Truncation::after_weighting) {
            out.coefficients[i] = truncated_solve(wf, wy, rho, out.rank[i]);
            return;
        }
        // Subspace from the unweighted design, weighted fit inside it.
        const Eigen::BDCSVD<Eigen::MatrixXd> svd(f, Eigen::ComputeThinV);
        const Eigen::VectorXd& s = svd.singularValues();
        Eigen::Index r = 0;
        while (r < s.size() && s[0] > 0.0 && s[r] > rho * s[0]) {
            ++r;
        }
        out.rank[i] = r;
        if (r == 0) {
            out.coefficients[i] = Eigen::VectorXd::Zero(f.cols());
            return;
        }
        const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
        Eigen::Index inner_rank = 0;
        const Eigen::VectorXd z = truncated_solve(wf * v, wy, 1e-15, inner_rank);
        out.coefficients[i] = v * z;
    });
    for (std::size_t i = 0; i < out.rcond.size(); ++i) {
        if (!out.coefficients[i].allFinite()) {
            throw NumericalError(fmt::format("ensemble: non-finite coefficients at rcond {}", out.rcond[i]));
        }
    }
    return out;
}

EnsembleEvaluation evaluate_ensemble(const EnsembleWeights& weights, const std::vector<Eigen::MatrixXd>& candidates,
                                     const Eigen::MatrixXd& labels) {
    const Eigen::Index n = labels.rows();
    const Eigen::Index k = labels.cols();
    if (n == 0) {
        throw InvalidInput("ensemble evaluation: empty target set");
    }
    if (candidates.empty()) {
        throw InvalidInput("ensemble evaluation: no candidates");
    }
    for (const auto& c : candidates) {
        if (c.rows() != n || c.cols() != k) {
            throw InvalidInput("ensemble evaluation: candidate shape does not match labels");
        }
    }
    EnsembleEvaluation ev;
    for (const auto& coef : weights.coefficients) {
        if (coef.size() != static_cast<Eigen::Index>(candidates.size())) {
            throw InvalidInput("ensemble evaluation: coefficient count does not match candidates");
        }
        Eigen::MatrixXd pred = Eigen::MatrixXd::Zero(n, k);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            pred += coef[static_cast<Eigen::Index>(i)] * candidates[i];
        }
        Eigen::Index correct = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (k == 1) {
                correct += (pred(j, 0) >= 0.0) == (labels(j, 0) >= 0.0) ? 1 : 0;
            } else {
                Eigen::Index a = 0;
                Eigen::Index b = 0;
                pred.row(j).maxCoeff(&a);
                labels.row(j).maxCoeff(&b);
                correct += a == b ? 1 : 0;
            }
        }
        ev.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    double sum = 0.0;
    for (double a : ev.accuracy) {
        sum += a;
    }
    ev.averaged_accuracy = ev.accuracy.empty() ? 0.0 : sum / static_cast<double>(ev.accuracy.size());
    return ev;
}

nlohmann::json ensemble_to_json(const EnsembleWeights& weights, const EnsembleEvaluation& eval) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < weights.rcond.size(); ++i) {
        const auto& c = weights.coefficients[i];
        per.push_back({{"rcond", weights.rcond[i]},
                       {"rank", weights.rank[i]},
                       {"coefficients", std::vector<double>(c.data(), c.data() + c.size())},
                       {"accuracy", i < eval.accuracy.size() ? nlohmann::json(eval.accuracy[i]) : nlohmann::json()}});
    }
    return {{"per_rcond", per}, {"averaged_accuracy", eval.averaged_accuracy}};
}

Eigen::MatrixXd one_hot(const std::vector<int>& classes, int k) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), k);
    for (std::size_t j = 0; j < classes.size(); ++j) {
        if (classes[j] < 0 || classes[j] >= k) {
            throw InvalidInput(fmt::format("one_hot: class {} outside [0, {})", classes[j], k));
        }
        y(static_cast<Eigen::Index>(j), classes[j]) = 1.0;
    }
    return y;
}

EnsembleProblem ingest_candidates(const CandidateFiles& files) {
    if (files.candidate_files.empty()) {
        throw InvalidInput("ensemble: no candidate files");
    }
    EnsembleProblem prob;
    const std::string first_name = files.candidate_files.front().string();
    const IdTable first = read_id_table(files.candidate_files.front());
    index_ids(first, first_name);
    prob.ids = first.ids;
    const Eigen::Index k = first.values.cols();
    prob.candidates.push_back(first.values);
    for (std::size_t i = 1; i < files.candidate_files.size(); ++i) {
        const std::string name = files.candidate_files[i].string();
        const IdTable t = read_id_table(files.candidate_files[i]);
        if (t.values.cols() != k) {
            throw ParseError(Kind::shape_mismatch, name, 0,
                             fmt::format("{} class columns, first candidate has {}", t.values.cols(), k));
        }
        prob.candidates.push_back(align(t, prob.ids, name));
    }

    const std::string label_name = files.labels_file.string();
    const IdTable lab = read_id_table(files.labels_file, "sample_id", {"label"});
    const Eigen::MatrixXd raw = align(lab, prob.ids, label_name);
    if (k == 1) {
        prob.labels = raw;
    } else {
        const auto map = index_ids(lab, label_name);
        std::vector<int> cls(prob.ids.size());
        for (std::size_t j = 0; j < prob.ids.size(); ++j) {
            const double v = raw(static_cast<Eigen::Index>(j), 0);
            if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(k)) {
                throw ParseError(Kind::bad_value, label_name, static_cast<std::size_t>(map.at(prob.ids[j])) + 1,
                                 fmt::format("label {} is not a class index in [0, {})", v, k));
            }
            cls[j] = static_cast<int>(v);
        }
        prob.labels = one_hot(cls, static_cast<int>(k));
    }

    if (files.weights_file) {
        const std::string name = files.weights_file->string();
        const IdTable w = read_id_table(*files.weights_file, "sample_id", {"weight"});
        for (std::size_t r = 0; r < w.ids.size(); ++r) {
            if (w.values(static_cast<Eigen::Index>(r), 0) < 0.0) {
                throw ParseError(Kind::negative_weight, name, r + 1,
                                 fmt::format("negative weight {}", w.values(static_cast<Eigen::Index>(r), 0)));
            }
        }
        prob.weights = align(w, prob.ids, name).col(0);
    } else if (files.ratio_model && files.features_file) {
        const std::string name = files.features_file->string();
        const IdTable feat = read_id_table(*files.features_file);
        if (feat.values.cols() != files.ratio_model->dimension()) {
            throw ParseError(Kind::shape_mismatch, name, 0,
                             fmt::format("{} feature columns, model expects {}", feat.values.cols(),
                                         files.ratio_model->dimension()));
        }
        const Points x = align(feat, prob.ids, name);
        prob.weights = files.ratio_model->predict_ratios(x);
    } else if (!files.require_weights) {
        prob.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(prob.ids.size()));
    } else {
        throw InvalidInput("ensemble: need a weights file or a ratio model with a features file");
    }
    prob.validate();
    return prob;
}

CandidateFiles export_problem(const EnsembleProblem& problem, const std::filesystem::path& dir) {
    problem.validate();
    std::filesystem::create_directories(dir);
    std::vector<std::string> ids = problem.ids;
    if (ids.empty()) {
        for (Eigen::Index j = 0; j < problem.samples(); ++j) {
            ids.push_back(fmt::format("s{}", j));
        }
    }
    CandidateFiles files;
    std::vector<std::string> cols;
    for (Eigen::Index c = 0; c < problem.classes(); ++c) {
        cols.push_back(fmt::format("c{}", c + 1));
    }
    for (std::size_t i = 0; i < problem.candidates.size(); ++i) {
        const auto path = dir / fmt::format("candidate_{}.csv", i + 1);
        write_id_table(path, IdTable{cols, ids, problem.candidates[i]});
        files.candidate_files.push_back(path);
    }
    Eigen::MatrixXd lab(problem.samples(), 1);
    if (problem.classes() == 1) {
        lab = problem.labels;
    } else {
        for (Eigen::Index j = 0; j < problem.samples(); ++j) {
            Eigen::Index a = 0;
            problem.labels.row(j).maxCoeff(&a);
            lab(j, 0) = static_cast<double>(a);
        }
    }
    files.labels_file = dir / "labels.csv";
    write_id_table(files.labels_file, IdTable{{"label"}, ids, lab});
    files.weights_file = dir / "weights.csv";
    write_id_table(*files.weights_file, IdTable{{"weight"}, ids, problem.weights});
    return files;
}

}  // namespace itdre
