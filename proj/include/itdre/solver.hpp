#pragma once

#include "itdre/kernels.hpp"
#include "itdre/losses.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace itdre {

/// Per-sample weights of the data-fit term.
///   pooled:         1/(m+n) for every sample
///   class_balanced: 1/m for P-draws, 1/n for Q-draws
enum class SampleWeighting { pooled, class_balanced };

std::string_view to_string(SampleWeighting w);
std::optional<SampleWeighting> parse_weighting(std::string_view name);

/// Pooled training data: anchors are the P-draws followed by the Q-draws,
/// with the pooled Gram computed once and shared by every fit on this set.
class TrainingSet {
public:
    TrainingSet(const Points& x_p, const Points& x_q, const KernelSpec& kernel);

    const KernelSpec& kernel() const noexcept { return kernel_; }
    const std::shared_ptr<const Points>& anchors() const noexcept { return anchors_; }
    const Eigen::MatrixXd& gram() const noexcept { return *gram_; }
    Eigen::Index p_count() const noexcept { return p_count_; }
    Eigen::Index q_count() const noexcept { return q_count_; }
    Eigen::Index size() const noexcept { return p_count_ + q_count_; }

    /// +1 for the first p_count() anchors, -1 for the rest.
    int label(Eigen::Index i) const noexcept { return i < p_count_ ? 1 : -1; }
    Eigen::VectorXd sample_weights(SampleWeighting w) const;

private:
    KernelSpec kernel_;
    std::shared_ptr<const Points> anchors_;
    std::shared_ptr<const Eigen::MatrixXd> gram_;
    Eigen::Index p_count_;
    Eigen::Index q_count_;
};

/// Fitted kernel expansion f(x) = sum_i coeffs[i] k(anchors[i], x).
/// Anchors are shared between the models of one iteration path.
class RatioModel {
public:
    RatioModel(KernelSpec kernel, LossFamily family, std::shared_ptr<const Points> anchors, Eigen::VectorXd coeffs,
               double lambda, int iterations, SampleWeighting weighting, Eigen::Index p_count);

    const KernelSpec& kernel() const noexcept { return kernel_; }
    LossFamily family() const noexcept { return family_; }
    const Points& anchors() const noexcept { return *anchors_; }
    const std::shared_ptr<const Points>& shared_anchors() const noexcept { return anchors_; }
    const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
    double lambda() const noexcept { return lambda_; }
    int iterations() const noexcept { return iterations_; }
    SampleWeighting weighting() const noexcept { return weighting_; }
    Eigen::Index dimension() const noexcept { return anchors_->cols(); }

    /// Number of leading anchors that are P-draws.
    Eigen::Index p_count() const noexcept { return p_count_; }
    /// Coefficients over the P-draws (beta in the KuLSIF closed form).
    Eigen::VectorXd p_coeffs() const { return coeffs_.head(p_count_); }
    /// Coefficients over the Q-draws (alpha in the KuLSIF closed form).
    Eigen::VectorXd q_coeffs() const { return coeffs_.tail(coeffs_.size() - p_count_); }

    double predict_score(std::span<const double> x) const;
    Eigen::VectorXd predict_scores(const Points& x) const;
    double predict_ratio(std::span<const double> x) const;
    Eigen::VectorXd predict_ratios(const Points& x) const;

private:
    KernelSpec kernel_;
    LossFamily family_;
    std::shared_ptr<const Points> anchors_;
    Eigen::VectorXd coeffs_;
    double lambda_;
    int iterations_;
    SampleWeighting weighting_;
    Eigen::Index p_count_;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    double tolerance = 0.0;
    int cg_iterations = 0;
    bool hit_cap = false;
    /// Line search could not make progress (rounding floor) before the tolerance.
    bool stalled = false;
};

struct FitReport {
    std::vector<IterationRecord> iterations;
    /// Training points whose SQ score needed clamping in the final model.
    std::uint64_t clamp_events = 0;
    double wall_seconds = 0.0;
};

/// Models after each of the t Tikhonov iterations (path[k-1] is f^{lambda,k}).
struct FitResult {
    std::vector<RatioModel> path;
    FitReport report;

    const RatioModel& model() const { return path.back(); }
};

struct CgOptions {
    double target_eps = 1e-6;
    int max_cg_iterations = 500;
    double c1 = 1e-4;
    double c2 = 0.4;
    SampleWeighting weighting = SampleWeighting::pooled;
};

/// Sub-problem tolerance eps * 1.4^(k - t) / t for k = 1..t.
double subproblem_tolerance(double target_eps, int k, int t);

/// J(a) = sum_i w_i l(y_i, (K a)_i) + lambda/2 (a - a_prev)^T K (a - a_prev).
double iterated_objective(const TrainingSet& data, LossFamily family, double lambda, SampleWeighting weighting,
                          const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev);

/// Euclidean norm of grad J at a.
double iterated_gradient_norm(const TrainingSet& data, LossFamily family, double lambda, SampleWeighting weighting,
                              const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev);

/// Closed-form iterated KuLSIF. Coefficients over P-draws are t*w_p/lambda;
/// the Q-coefficients follow (lambda I + w_q K_qq) alpha^k = lambda alpha^{k-1} - w_q K_qp beta^k.
FitResult fit_kulsif(const TrainingSet& data, double lambda, int t, SampleWeighting weighting = SampleWeighting::pooled);
FitResult fit_kulsif(const Points& x_p, const Points& x_q, const KernelSpec& kernel, double lambda, int t,
                     SampleWeighting weighting = SampleWeighting::pooled);

/// Iterated Tikhonov via preconditioned Polak-Ribiere (PR+) nonlinear CG with a
/// strong-Wolfe line search. Each sub-problem starts from the previous iterate.
FitResult fit_cg(const TrainingSet& data, LossFamily family, double lambda, int t, const CgOptions& options = {});
FitResult fit_cg(const Points& x_p, const Points& x_q, LossFamily family, const KernelSpec& kernel, double lambda,
                 int t, const CgOptions& options = {});

/// Dispatch: KuLSIF goes to the closed form, everything else to CG.
FitResult fit(const TrainingSet& data, LossFamily family, double lambda, int t, const CgOptions& options = {});

}  // namespace itdre
