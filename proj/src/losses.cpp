#include "itdre/losses.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace itdre {

namespace {

std::atomic<std::uint64_t> g_clamp_events{0};

// log(1 + e^x) without overflow.
double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_label(int y) {
    if (y != 1 && y != -1) {
        throw InvalidInput(fmt::format("label must be +1 or -1, got {}", y));
    }
}

}  // namespace

std::string_view to_string(LossFamily family) {
    switch (family) {
        case LossFamily::kulsif: return "kulsif";
        case LossFamily::lr: return "lr";
        case LossFamily::exp: return "exp";
        case LossFamily::sq: return "sq";
    }
    return "unknown";
}

std::optional<LossFamily> parse_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (LossFamily f : kAllFamilies) {
        if (lower == to_string(f)) {
            return f;
        }
    }
    return std::nullopt;
}

double loss_eval(LossFamily family, int y, double v) {
    check_label(y);
    switch (family) {
        case LossFamily::kulsif: return y == 1 ? -v : 0.5 * v * v;
        case LossFamily::lr: return y == 1 ? softplus(-v) : softplus(v);
        case LossFamily::exp: return y == 1 ? std::exp(-v) : std::exp(v);
        case LossFamily::sq: return y == 1 ? (1.0 - v) * (1.0 - v) : (1.0 + v) * (1.0 + v);
    }
    return 0.0;
}

double loss_d1(LossFamily family, int y, double v) {
    check_label(y);
    switch (family) {
        case LossFamily::kulsif: return y == 1 ? -1.0 : v;
        case LossFamily::lr: return y == 1 ? -sigmoid(-v) : sigmoid(v);
        case LossFamily::exp: return y == 1 ? -std::exp(-v) : std::exp(v);
        case LossFamily::sq: return y == 1 ? -2.0 * (1.0 - v) : 2.0 * (1.0 + v);
    }
    return 0.0;
}

double loss_d2(LossFamily family, int y, double v) {
    check_label(y);
    switch (family) {
        case LossFamily::kulsif: return y == 1 ? 0.0 : 1.0;
        case LossFamily::lr: {
            const double s = sigmoid(v);
            return s * (1.0 - s);
        }
        case LossFamily::exp: return y == 1 ? std::exp(-v) : std::exp(v);
        case LossFamily::sq: return 2.0;
    }
    return 0.0;
}

double loss_d3(LossFamily family, int y, double v) {
    check_label(y);
    switch (family) {
        case LossFamily::kulsif: return 0.0;
        case LossFamily::lr: {
            const double s = sigmoid(v);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
        case LossFamily::exp: return y == 1 ? -std::exp(-v) : std::exp(v);
        case LossFamily::sq: return 0.0;
    }
    return 0.0;
}

double link(LossFamily family, double u) {
    if (!(u > 0.0 && u < 1.0)) {
        throw InvalidInput(fmt::format("link: probability {} outside (0, 1)", u));
    }
    switch (family) {
        case LossFamily::kulsif: return u / (1.0 - u);
        case LossFamily::lr: return std::log(u) - std::log1p(-u);
        case LossFamily::exp: return 0.5 * (std::log(u) - std::log1p(-u));
        case LossFamily::sq: return 2.0 * u - 1.0;
    }
    return 0.0;
}

double inv_link(LossFamily family, double v) {
    switch (family) {
        case LossFamily::kulsif: return v / (1.0 + v);
        case LossFamily::lr: return sigmoid(v);
        case LossFamily::exp: return sigmoid(2.0 * v);
        case LossFamily::sq: return 0.5 * (v + 1.0);
    }
    return 0.0;
}

double ratio_from_score(LossFamily family, double v) {
    switch (family) {
        case LossFamily::kulsif: return v;
        case LossFamily::lr: return std::exp(v);
        case LossFamily::exp: return std::exp(2.0 * v);
        case LossFamily::sq: {
            if (v > kSqScoreCap) {
                g_clamp_events.fetch_add(1, std::memory_order_relaxed);
                v = kSqScoreCap;
            }
            if (v < -1.0) {
                g_clamp_events.fetch_add(1, std::memory_order_relaxed);
                return 0.0;
            }
            return (1.0 + v) / (1.0 - v);
        }
    }
    return 0.0;
}

std::uint64_t clamp_events() noexcept {
    return g_clamp_events.load(std::memory_order_relaxed);
}

void reset_clamp_events() noexcept {
    g_clamp_events.store(0, std::memory_order_relaxed);
}

double generator(LossFamily family, double h) {
    switch (family) {
        case LossFamily::kulsif: return 0.5 * (h - 1.0) * (h - 1.0);
        case LossFamily::lr: return (h > 0.0 ? h * std::log(h) : 0.0) - (1.0 + h) * std::log1p(h);
        case LossFamily::exp: return -2.0 * std::sqrt(h);
        case LossFamily::sq: return 4.0 / (1.0 + h);
    }
    return 0.0;
}

double generator_d1(LossFamily family, double h) {
    switch (family) {
        case LossFamily::kulsif: return h - 1.0;
        case LossFamily::lr: return std::log(h) - std::log1p(h);
        case LossFamily::exp: return -1.0 / std::sqrt(h);
        case LossFamily::sq: return -4.0 / ((1.0 + h) * (1.0 + h));
    }
    return 0.0;
}

double bregman_pointwise(LossFamily family, double beta, double beta_hat) {
    if (!std::isfinite(beta) || !std::isfinite(beta_hat)) {
        throw InvalidInput("bregman: non-finite ratio value");
    }
    switch (family) {
        case LossFamily::kulsif: return 0.5 * (beta - beta_hat) * (beta - beta_hat);
        case LossFamily::lr:
        case LossFamily::exp:
            if (beta < 0.0) {
                throw InvalidInput(fmt::format("bregman ({}): negative true ratio {}", to_string(family), beta));
            }
            beta_hat = std::max(beta_hat, kRatioFloor);
            break;
        case LossFamily::sq:
            if (beta < 0.0 || beta_hat <= -1.0) {
                throw InvalidInput(fmt::format("bregman (sq): ratio pair ({}, {}) outside domain", beta, beta_hat));
            }
            break;
    }
    return generator(family, beta) - generator(family, beta_hat) -
           generator_d1(family, beta_hat) * (beta - beta_hat);
}

QuadratureGrid QuadratureGrid::trapezoid(double lo, double hi, std::size_t count) {
    if (count < 2 || !(hi > lo)) {
        throw InvalidInput("trapezoid grid needs count >= 2 and hi > lo");
    }
    QuadratureGrid g;
    g.nodes.resize(count);
    g.weights.resize(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        g.nodes[i] = lo + step * static_cast<double>(i);
        g.weights[i] = (i == 0 || i + 1 == count) ? 0.5 * step : step;
    }
    return g;
}

double bregman_error(LossFamily family, const std::function<double(double)>& beta_true,
                     const std::function<double(double)>& beta_hat, const std::function<double(double)>& q_density,
                     const QuadratureGrid& grid) {
    double total = 0.0;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        const double x = grid.nodes[i];
        const double q = q_density(x);
        if (q == 0.0) {
            continue;
        }
        total += grid.weights[i] * q * bregman_pointwise(family, beta_true(x), beta_hat(x));
    }
    return total;
}

double bregman_error_mc(LossFamily family, std::span<const double> beta_true, std::span<const double> beta_hat) {
    if (beta_true.size() != beta_hat.size() || beta_true.empty()) {
        throw InvalidInput("bregman_error_mc: need equal-length, nonempty ratio vectors");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < beta_true.size(); ++i) {
        total += bregman_pointwise(family, beta_true[i], beta_hat[i]);
    }
    return total / static_cast<double>(beta_true.size());
}

double empirical_risk(LossFamily family, std::span<const double> scores_p, std::span<const double> scores_q) {
    const std::size_t total = scores_p.size() + scores_q.size();
    if (total == 0) {
        throw InvalidInput("empirical_risk: no scores");
    }
    double sum = 0.0;
    for (double s : scores_p) {
        sum += loss_eval(family, 1, s);
    }
    for (double s : scores_q) {
        sum += loss_eval(family, -1, s);
    }
    return sum / static_cast<double>(total);
}

}  // namespace itdre
