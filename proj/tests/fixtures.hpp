#pragma once

// Shared oracles for the unit tests and the acceptance binary. Everything here
// is computed independently of the library code paths it is compared against.

#include "itdre/kernels.hpp"
#include "itdre/losses.hpp"
#include "itdre/solver.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace itdre::fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::random_device{}();
        path_ = std::filesystem::temp_directory_path() /
                ("itdre_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline Points random_points(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double shift = 0.0,
                            double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Points out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = shift + scale * normal(rng);
        }
    }
    return out;
}

// Fourier series of the periodic Sobolev kernel, 1 + 2 sum_{l=1}^{n} cos(2 pi l d) / l^alpha,
// Richardson-extrapolated from n and 2n terms so the slowly decaying alpha = 2
// tail near d = 0 is removed. Cosines come from the three-term recurrence.
inline double sobolev_series(double d, int alpha, long terms = 100000) {
    const double c1 = std::cos(2.0 * std::numbers::pi * d);
    double c_prev = 1.0;
    double c_cur = c1;
    double sum = 0.0;
    double at_n = 0.0;
    for (long l = 1; l <= 2 * terms; ++l) {
        double denom = 1.0;
        for (int e = 0; e < alpha; ++e) {
            denom *= static_cast<double>(l);
        }
        sum += c_cur / denom;
        if (l == terms) {
            at_n = sum;
        }
        const double c_next = 2.0 * c1 * c_cur - c_prev;
        c_prev = c_cur;
        c_cur = c_next;
    }
    const double a = 1.0 + 2.0 * at_n;
    const double b = 1.0 + 2.0 * sum;
    return alpha == 2 ? 2.0 * b - a : b;
}

// Known (P, Q) pair on [0, 1] with pi = 1/2.
inline double fixture_p(double x) { return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * x); }
inline double fixture_q(double x) { return 1.0 + 0.4 * std::cos(2.0 * std::numbers::pi * x); }

struct ScoreFunction {
    double offset;
    double amplitude;
    double phase;
    double operator()(double x) const {
        return offset + amplitude * std::sin(2.0 * std::numbers::pi * x + phase);
    }
};

// Ranges stay inside (-1, 1) so every family has a finite ratio.
inline std::vector<ScoreFunction> fixture_scores() {
    return {{0.1, 0.5, 0.0}, {-0.3, 0.4, 1.0}, {0.5, 0.3, 2.0}, {0.0, 0.7, 0.5}, {-0.6, 0.2, 3.0}};
}

struct IdentityGap {
    double half_bregman = 0.0;
    double excess_risk = 0.0;
    double gap() const { return std::abs(half_bregman - excess_risk); }
};

// Both sides of the Bregman/excess-risk identity by trapezoid quadrature on
// `nodes` points of [0, 1]; `phi`/`dphi` is the generator under test.
template <class Phi, class DPhi>
IdentityGap bregman_identity(LossFamily family, const ScoreFunction& f, Phi phi, DPhi dphi, int nodes = 4096) {
    const double h = 1.0 / (nodes - 1);
    IdentityGap out;
    for (int i = 0; i < nodes; ++i) {
        const double x = i * h;
        const double w = (i == 0 || i == nodes - 1) ? 0.5 * h : h;
        const double p = fixture_p(x);
        const double q = fixture_q(x);
        const double beta = p / q;
        const double eta = p / (p + q);
        const double v = f(x);
        const double v_star = link(family, eta);
        const double s = inv_link(family, v);
        const double g = s / (1.0 - s);
        const double b = phi(beta) - phi(g) - dphi(g) * (beta - g);
        out.half_bregman += w * 0.5 * q * b;
        const double r = 0.5 * p * loss_eval(family, 1, v) + 0.5 * q * loss_eval(family, -1, v);
        const double r_star = 0.5 * p * loss_eval(family, 1, v_star) + 0.5 * q * loss_eval(family, -1, v_star);
        out.excess_risk += w * (r - r_star);
    }
    return out;
}

inline IdentityGap bregman_identity(LossFamily family, const ScoreFunction& f, int nodes = 4096) {
    return bregman_identity(
        family, f, [family](double h) { return generator(family, h); },
        [family](double h) { return generator_d1(family, h); }, nodes);
}

inline Eigen::VectorXd oracle_weights(Eigen::Index m, Eigen::Index n, SampleWeighting weighting) {
    Eigen::VectorXd w(m + n);
    if (weighting == SampleWeighting::pooled) {
        w.setConstant(1.0 / static_cast<double>(m + n));
    } else {
        w.head(m).setConstant(1.0 / static_cast<double>(m));
        w.tail(n).setConstant(1.0 / static_cast<double>(n));
    }
    return w;
}

inline double oracle_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, Eigen::Index m, LossFamily family,
                               double lambda, const Eigen::VectorXd& a, const Eigen::VectorXd& a_prev) {
    const Eigen::VectorXd f = K * a;
    double fit = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        fit += w(i) * loss_eval(family, i < m ? 1 : -1, f(i));
    }
    const Eigen::VectorXd d = a - a_prev;
    return fit + 0.5 * lambda * d.dot(K * d);
}

// Damped Newton on the dense iterated objective in extended precision,
// starting from the previous iterate; returns a_1..a_t. The Hessian carries
// K twice, so double precision alone loses too many digits on tiny problems.
inline std::vector<Eigen::VectorXd> newton_path(const Eigen::MatrixXd& K_in, Eigen::Index m, LossFamily family,
                                                double lambda, int t, SampleWeighting weighting) {
    using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const Eigen::Index n_total = K_in.rows();
    const Mat K = K_in.cast<long double>();
    const Vec w = oracle_weights(m, n_total - m, weighting).cast<long double>();
    const long double lam = lambda;
    // KuLSIF is kept exact in long double; other families go through double
    auto derivs = [&](int y, long double f, long double& d1, long double& d2) {
        if (family == LossFamily::kulsif) {
            d1 = y == 1 ? -1.0L : f;
            d2 = y == 1 ? 0.0L : 1.0L;
        } else {
            d1 = loss_d1(family, y, static_cast<double>(f));
            d2 = loss_d2(family, y, static_cast<double>(f));
        }
    };
    auto value = [&](int y, long double f) -> long double {
        if (family == LossFamily::kulsif) {
            return y == 1 ? -f : 0.5L * f * f;
        }
        return loss_eval(family, y, static_cast<double>(f));
    };
    auto objective = [&](const Vec& a, const Vec& prev) {
        const Vec f = K * a;
        long double fit = 0.0L;
        for (Eigen::Index i = 0; i < n_total; ++i) {
            fit += w(i) * value(i < m ? 1 : -1, f(i));
        }
        const Vec d = a - prev;
        return fit + 0.5L * lam * d.dot(K * d);
    };
    std::vector<Eigen::VectorXd> path;
    Vec prev = Vec::Zero(n_total);
    for (int k = 1; k <= t; ++k) {
        Vec a = prev;
        for (int it = 0; it < 100; ++it) {
            const Vec f = K * a;
            Vec d1(n_total);
            Vec d2(n_total);
            for (Eigen::Index i = 0; i < n_total; ++i) {
                derivs(i < m ? 1 : -1, f(i), d1(i), d2(i));
                d1(i) *= w(i);
                d2(i) *= w(i);
            }
            const Vec grad = K * d1 + lam * (K * (a - prev));
            const Mat hess = K * d2.asDiagonal() * K + lam * K;
            const Vec step = hess.fullPivLu().solve(grad);
            const long double j0 = objective(a, prev);
            long double s = 1.0L;
            Vec next = a - step;
            while (objective(next, prev) > j0 + 1e-18L * std::abs(j0) && s > 1e-10L) {
                s *= 0.5L;
                next = a - s * step;
            }
            const long double change = (next - a).norm();
            a = next;
            if (change <= 1e-18L * (1.0L + a.norm())) {
                break;
            }
        }
        path.push_back(a.cast<double>());
        prev = a;
    }
    return path;
}

}  // namespace itdre::fixtures
