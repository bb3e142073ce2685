#include "itdre/solver.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <limits>

namespace itdre {

namespace {

void validate_fit_args(double lambda, int t) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidInput(fmt::format("lambda must be positive and finite, got {}", lambda));
    }
    if (t < 1) {
        throw InvalidInput(fmt::format("iteration count must be >= 1, got {}", t));
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::uint64_t count_sq_clamps(const TrainingSet& data, LossFamily family, const Eigen::VectorXd& scores) {
    if (family != LossFamily::sq) {
        return 0;
    }
    std::uint64_t n = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (scores[i] > kSqScoreCap || scores[i] < -1.0) {
            ++n;
        }
    }
    return n;
}

// Data-fit residual r with grad J = K r: r = w .* l'(y, Ka) + lambda (a - a_prev).
Eigen::VectorXd residual(const TrainingSet& data, LossFamily family, double lambda, const Eigen::VectorXd& w,
                         const Eigen::VectorXd& ka, const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev) {
    Eigen::VectorXd r(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        r[i] = w[i] * loss_d1(family, data.label(i), ka[i]) + lambda * (a[i] - a_prev[i]);
    }
    return r;
}

double data_term(const TrainingSet& data, LossFamily family, const Eigen::VectorXd& w, const Eigen::VectorXd& ka) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        s += w[i] * loss_eval(family, data.label(i), ka[i]);
    }
    return s;
}

// Objective restricted to the line a + s d, evaluated in O(N) from Ka, Kd, u = a - a_prev.
class LineFunction {
public:
    LineFunction(const TrainingSet& data, LossFamily family, double lambda, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& ka, const Eigen::VectorXd& kd, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& ku, const Eigen::VectorXd& d)
        : data_(data), family_(family), lambda_(lambda), w_(w), ka_(ka), kd_(kd),
          uku_(u.dot(ku)), ukd_(u.dot(kd)), dkd_(d.dot(kd)) {}

    double value(double s) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < data_.size(); ++i) {
            v += w_[i] * loss_eval(family_, data_.label(i), ka_[i] + s * kd_[i]);
        }
        return v + 0.5 * lambda_ * (uku_ + 2.0 * s * ukd_ + s * s * dkd_);
    }

    double slope(double s) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < data_.size(); ++i) {
            v += w_[i] * loss_d1(family_, data_.label(i), ka_[i] + s * kd_[i]) * kd_[i];
        }
        return v + lambda_ * (ukd_ + s * dkd_);
    }

    double curvature(double s) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < data_.size(); ++i) {
            v += w_[i] * loss_d2(family_, data_.label(i), ka_[i] + s * kd_[i]) * kd_[i] * kd_[i];
        }
        return v + lambda_ * dkd_;
    }

private:
    const TrainingSet& data_;
    LossFamily family_;
    double lambda_;
    const Eigen::VectorXd& w_;
    const Eigen::VectorXd& ka_;
    const Eigen::VectorXd& kd_;
    double uku_;
    double ukd_;
    double dkd_;
};

struct LineSearchResult {
    double step = 0.0;
    bool ok = false;
};

// Strong-Wolfe search specialised to a convex line function: brackets the
// root of the slope, trying 1-D Newton and secant steps before bisection.
LineSearchResult strong_wolfe(const LineFunction& line, double f0, double g0, double c1, double c2, int outer,
                              int inner) {
    constexpr int kMaxTrials = 80;
    // Rounding floor on objective differences; below it only the slope test is meaningful.
    const double noise = 1e-13 * (1.0 + std::abs(f0));

    const double curv0 = line.curvature(0.0);
    double s = (curv0 > 0.0 && std::isfinite(curv0)) ? -g0 / curv0 : 1.0;
    if (!(s > 0.0) || !std::isfinite(s)) {
        s = 1.0;
    }
    double lo = 0.0;
    double lo_slope = g0;
    double hi = std::numeric_limits<double>::infinity();
    double hi_slope = 0.0;
    bool hi_has_slope = false;

    for (int trial = 0; trial < kMaxTrials; ++trial) {
        const double f = line.value(s);
        const double g = std::isfinite(f) ? line.slope(s) : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(f) || !std::isfinite(g)) {
            // overflow (e.g. exponential loss): shrink toward lo
            hi = s;
            hi_has_slope = false;
            s = lo + 0.5 * (s - lo);
            if (!(s > lo)) {
                throw LineSearchFailure(
                    fmt::format("line search: no finite objective along the search direction (iteration {})", outer),
                    outer, inner);
            }
            continue;
        }
        const bool decrease = f <= f0 + c1 * s * g0 || f <= f0 + noise;
        const bool curvature_ok = std::abs(g) <= c2 * std::abs(g0);
        if (decrease && curvature_ok) {
            return {s, true};
        }
        if (!decrease || g > 0.0) {
            hi = s;
            hi_slope = g;
            hi_has_slope = true;
        } else {
            lo = s;
            lo_slope = g;
        }

        double next;
        if (std::isinf(hi)) {
            const double c = line.curvature(s);
            next = (c > 0.0 && std::isfinite(c)) ? s - g / c : 2.0 * s;
            if (!(next > s)) {
                next = 2.0 * s;
            }
            next = std::min(next, 10.0 * s);
        } else {
            const double width = hi - lo;
            next = lo + 0.5 * width;
            if (hi_has_slope && hi_slope > lo_slope) {
                const double secant = lo - lo_slope * width / (hi_slope - lo_slope);
                if (secant > lo + 0.01 * width && secant < hi - 0.01 * width) {
                    next = secant;
                }
            }
            if (!(width > 4.0 * std::numeric_limits<double>::epsilon() * hi)) {
                break;
            }
        }
        s = next;
    }
    if (lo > 0.0) {
        return {lo, true};
    }
    return {0.0, false};
}

void check_kulsif_residual(const Eigen::MatrixXd& system, const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) {
    const double res = (system * x - rhs).norm();
    if (!(res <= 1e-8 * rhs.norm() + std::numeric_limits<double>::min())) {
        throw NumericalError(fmt::format("kulsif solve residual {} exceeds 1e-8 * |rhs| = {}", res, 1e-8 * rhs.norm()));
    }
}

}  // namespace

std::string_view to_string(SampleWeighting w) {
    return w == SampleWeighting::pooled ? "pooled" : "class_balanced";
}

std::optional<SampleWeighting> parse_weighting(std::string_view name) {
    if (name == "pooled") {
        return SampleWeighting::pooled;
    }
    if (name == "class_balanced" || name == "balanced") {
        return SampleWeighting::class_balanced;
    }
    return std::nullopt;
}

TrainingSet::TrainingSet(const Points& x_p, const Points& x_q, const KernelSpec& kernel)
    : kernel_(kernel), p_count_(x_p.rows()), q_count_(x_q.rows()) {
    if (p_count_ < 1 || q_count_ < 1) {
        throw InvalidInput(fmt::format("training set needs at least one draw per class (got {} P, {} Q)", p_count_,
                                       q_count_));
    }
    if (x_p.cols() != x_q.cols()) {
        throw InvalidInput(fmt::format("training set: dimension mismatch {} vs {}", x_p.cols(), x_q.cols()));
    }
    anchors_ = std::make_shared<const Points>(stack(x_p, x_q));
    gram_ = std::make_shared<const Eigen::MatrixXd>(itdre::gram(kernel_, *anchors_));
}

Eigen::VectorXd TrainingSet::sample_weights(SampleWeighting w) const {
    Eigen::VectorXd out(size());
    if (w == SampleWeighting::pooled) {
        out.setConstant(1.0 / static_cast<double>(size()));
    } else {
        out.head(p_count_).setConstant(1.0 / static_cast<double>(p_count_));
        out.tail(q_count_).setConstant(1.0 / static_cast<double>(q_count_));
    }
    return out;
}

RatioModel::RatioModel(KernelSpec kernel, LossFamily family, std::shared_ptr<const Points> anchors,
                       Eigen::VectorXd coeffs, double lambda, int iterations, SampleWeighting weighting,
                       Eigen::Index p_count)
    : kernel_(kernel), family_(family), anchors_(std::move(anchors)), coeffs_(std::move(coeffs)), lambda_(lambda),
      iterations_(iterations), weighting_(weighting), p_count_(p_count) {
    if (!anchors_ || anchors_->rows() != coeffs_.size()) {
        throw InvalidInput("ratio model: coefficient count must equal anchor count");
    }
    if (p_count_ < 0 || p_count_ > coeffs_.size()) {
        throw InvalidInput("ratio model: P-anchor count out of range");
    }
}

double RatioModel::predict_score(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != dimension()) {
        throw InvalidInput(fmt::format("predict: point dimension {} does not match model dimension {}", x.size(),
                                       dimension()));
    }
    const auto dim = static_cast<std::size_t>(dimension());
    double s = 0.0;
    for (Eigen::Index i = 0; i < anchors_->rows(); ++i) {
        if (coeffs_[i] != 0.0) {
            s += coeffs_[i] * kernel_(std::span<const double>(anchors_->row(i).data(), dim), x);
        }
    }
    return s;
}

Eigen::VectorXd RatioModel::predict_scores(const Points& x) const {
    if (x.cols() != dimension()) {
        throw InvalidInput(fmt::format("predict: point dimension {} does not match model dimension {}", x.cols(),
                                       dimension()));
    }
    return gram(kernel_, x, *anchors_) * coeffs_;
}

double RatioModel::predict_ratio(std::span<const double> x) const {
    return ratio_from_score(family_, predict_score(x));
}

Eigen::VectorXd RatioModel::predict_ratios(const Points& x) const {
    Eigen::VectorXd s = predict_scores(x);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        s[i] = ratio_from_score(family_, s[i]);
    }
    return s;
}

double subproblem_tolerance(double target_eps, int k, int t) {
    return target_eps * std::pow(1.4, k - t) / static_cast<double>(t);
}

double iterated_objective(const TrainingSet& data, LossFamily family, double lambda, SampleWeighting weighting,
                          const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev) {
    const Eigen::VectorXd w = data.sample_weights(weighting);
    const Eigen::VectorXd ka = data.gram() * a;
    const Eigen::VectorXd u = a - a_prev;
    return data_term(data, family, w, ka) + 0.5 * lambda * u.dot(data.gram() * u);
}

double iterated_gradient_norm(const TrainingSet& data, LossFamily family, double lambda, SampleWeighting weighting,
                              const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev) {
    const Eigen::VectorXd w = data.sample_weights(weighting);
    const Eigen::VectorXd ka = data.gram() * a;
    return (data.gram() * residual(data, family, lambda, w, ka, a, a_prev)).norm();
}

FitResult fit_kulsif(const TrainingSet& data, double lambda, int t, SampleWeighting weighting) {
    validate_fit_args(lambda, t);
    const auto start = std::chrono::steady_clock::now();
    const Eigen::Index m = data.p_count();
    const Eigen::Index n = data.q_count();
    const Eigen::VectorXd w = data.sample_weights(weighting);
    const double w_p = w[0];
    const double w_q = w[m];

    const Eigen::MatrixXd& k = data.gram();
    Eigen::MatrixXd system = w_q * k.bottomRightCorner(n, n);
    system.diagonal().array() += lambda;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(fmt::format("kulsif: Cholesky of (lambda I + K_qq w_q) failed for lambda={}", lambda));
    }
    const Eigen::VectorXd kqp_ones = k.bottomLeftCorner(n, m).rowwise().sum();

    FitResult result;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd a_prev = Eigen::VectorXd::Zero(m + n);
    for (int iter = 1; iter <= t; ++iter) {
        const double beta = static_cast<double>(iter) * w_p / lambda;
        const Eigen::VectorXd rhs = lambda * alpha - (w_q * beta) * kqp_ones;
        Eigen::VectorXd next = llt.solve(rhs);
        // one step of iterative refinement keeps the residual at the 1e-8 contract for small lambda
        next += llt.solve(rhs - system * next);
        check_kulsif_residual(system, next, rhs);
        alpha = std::move(next);

        Eigen::VectorXd a(m + n);
        a.head(m).setConstant(beta);
        a.tail(n) = alpha;

        IterationRecord rec;
        rec.iteration = iter;
        rec.objective = iterated_objective(data, LossFamily::kulsif, lambda, weighting, a, a_prev);
        rec.gradient_norm = iterated_gradient_norm(data, LossFamily::kulsif, lambda, weighting, a, a_prev);
        result.report.iterations.push_back(rec);
        result.path.emplace_back(data.kernel(), LossFamily::kulsif, data.anchors(), a, lambda, iter, weighting, m);
        a_prev = std::move(a);
    }
    result.report.wall_seconds = seconds_since(start);
    return result;
}

FitResult fit_kulsif(const Points& x_p, const Points& x_q, const KernelSpec& kernel, double lambda, int t,
                     SampleWeighting weighting) {
    return fit_kulsif(TrainingSet(x_p, x_q, kernel), lambda, t, weighting);
}

FitResult fit_cg(const TrainingSet& data, LossFamily family, double lambda, int t, const CgOptions& options) {
    validate_fit_args(lambda, t);
    if (data.size() < 2) {
        throw InvalidInput("fit_cg needs at least two samples");
    }
    if (!(options.target_eps > 0.0)) {
        throw InvalidInput("fit_cg: target_eps must be positive");
    }
    const auto start = std::chrono::steady_clock::now();
    const Eigen::Index n = data.size();
    const Eigen::MatrixXd& k = data.gram();
    const Eigen::VectorXd w = data.sample_weights(options.weighting);

    FitResult result;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ka = Eigen::VectorXd::Zero(n);

    for (int iter = 1; iter <= t; ++iter) {
        const Eigen::VectorXd a_prev = a;
        const Eigen::VectorXd ka_prev = ka;
        const double tol = subproblem_tolerance(options.target_eps, iter, t);

        IterationRecord rec;
        rec.iteration = iter;
        rec.tolerance = tol;

        Eigen::VectorXd r_old, g_old, d, kd;
        double gr_old = 0.0;
        int since_restart = 0;
        int cg = 0;
        double gnorm = 0.0;
        for (;; ++cg) {
            Eigen::VectorXd r = residual(data, family, lambda, w, ka, a, a_prev);
            Eigen::VectorXd g = k * r;
            gnorm = g.norm();
            if (!std::isfinite(gnorm)) {
                throw LineSearchFailure(fmt::format("fit_cg: non-finite gradient at iteration {}", iter), iter, cg);
            }
            if (gnorm <= tol) {
                break;
            }
            if (cg >= options.max_cg_iterations) {
                rec.hit_cap = true;
                break;
            }
            const double gr = g.dot(r);
            bool restart = cg == 0 || since_restart >= n;
            double beta = 0.0;
            if (!restart) {
                beta = g.dot(r - r_old) / gr_old;
                if (!(beta > 0.0)) {
                    restart = true;
                    beta = 0.0;
                }
            }
            if (restart) {
                d = -r;
                kd = -g;
                since_restart = 0;
            } else {
                d = -r + beta * d;
                kd = -g + beta * kd;
            }
            double slope = g.dot(d);
            if (!(slope < 0.0)) {
                d = -r;
                kd = -g;
                slope = -gr;
                since_restart = 0;
            }
            const Eigen::VectorXd u = a - a_prev;
            const Eigen::VectorXd ku = ka - ka_prev;
            const LineFunction line(data, family, lambda, w, ka, kd, u, ku, d);
            const double f0 = line.value(0.0);
            if (!std::isfinite(f0)) {
                throw LineSearchFailure(fmt::format("fit_cg: non-finite objective at iteration {}", iter), iter, cg);
            }
            const LineSearchResult ls = strong_wolfe(line, f0, slope, options.c1, options.c2, iter, cg);
            if (!ls.ok) {
                rec.stalled = true;
                break;
            }
            a += ls.step * d;
            ka += ls.step * kd;
            ++since_restart;
            if (since_restart >= n) {
                ka = k * a;  // drop accumulated drift of the tracked product
            }
            r_old = std::move(r);
            gr_old = gr;
        }
        ka = k * a;
        rec.cg_iterations = cg;
        rec.gradient_norm = iterated_gradient_norm(data, family, lambda, options.weighting, a, a_prev);
        rec.objective = iterated_objective(data, family, lambda, options.weighting, a, a_prev);
        result.report.iterations.push_back(rec);
        result.path.emplace_back(data.kernel(), family, data.anchors(), a, lambda, iter, options.weighting,
                                 data.p_count());
    }
    result.report.clamp_events = count_sq_clamps(data, family, ka);
    result.report.wall_seconds = seconds_since(start);
    return result;
}

FitResult fit_cg(const Points& x_p, const Points& x_q, LossFamily family, const KernelSpec& kernel, double lambda,
                 int t, const CgOptions& options) {
    return fit_cg(TrainingSet(x_p, x_q, kernel), family, lambda, t, options);
}

FitResult fit(const TrainingSet& data, LossFamily family, double lambda, int t, const CgOptions& options) {
    if (family == LossFamily::kulsif) {
        return fit_kulsif(data, lambda, t, options.weighting);
    }
    return fit_cg(data, family, lambda, t, options);
}

}  // namespace itdre
