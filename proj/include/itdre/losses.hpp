#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace itdre {

/// Strictly proper composite losses for binary P-vs-Q classification.
/// Label +1 marks numerator (P) draws, -1 denominator (Q) draws.
enum class LossFamily { kulsif, lr, exp, sq };

inline constexpr LossFamily kAllFamilies[] = {LossFamily::kulsif, LossFamily::lr, LossFamily::exp, LossFamily::sq};

std::string_view to_string(LossFamily family);
/// Accepts "kulsif", "lr", "exp", "sq" (case-insensitive).
std::optional<LossFamily> parse_family(std::string_view name);

double loss_eval(LossFamily family, int y, double v);
double loss_d1(LossFamily family, int y, double v);
double loss_d2(LossFamily family, int y, double v);
double loss_d3(LossFamily family, int y, double v);

/// Link Psi: (0,1) -> R mapping the class posterior to the Bayes-optimal score.
double link(LossFamily family, double u);
/// Psi^{-1}. Valid scores: KuLSIF v > 0, SQ -1 < v < 1, LR/Exp all of R.
double inv_link(LossFamily family, double v);

/// Largest SQ score passed to the ratio map; the map has a pole at 1.
inline constexpr double kSqScoreCap = 1.0 - 1e-6;
/// Lower clamp on estimated ratios fed to the LR and Exp generators.
inline constexpr double kRatioFloor = 1e-12;

/// Density-ratio estimate g(v) = Psi^{-1}(v) / (1 - Psi^{-1}(v)).
/// SQ scores above kSqScoreCap are clamped and SQ ratios below zero are
/// clamped to zero; each clamp increments the global counter.
double ratio_from_score(LossFamily family, double v);

/// Process-wide count of SQ clamp events.
std::uint64_t clamp_events() noexcept;
void reset_clamp_events() noexcept;

/// Pointwise Bregman generator phi with F(h) = int phi(h(x)) dQ(x), and phi'.
double generator(LossFamily family, double h);
double generator_d1(LossFamily family, double h);

/// b(beta, beta_hat) = phi(beta) - phi(beta_hat) - phi'(beta_hat)(beta - beta_hat).
/// beta_hat is floored at kRatioFloor for LR/Exp. Throws InvalidInput for a
/// nonpositive beta where phi needs positivity.
double bregman_pointwise(LossFamily family, double beta, double beta_hat);

/// Nodes and trapezoid weights on an interval.
struct QuadratureGrid {
    std::vector<double> nodes;
    std::vector<double> weights;

    static QuadratureGrid trapezoid(double lo, double hi, std::size_t count);
};

/// Quadrature of the Bregman integrand weighted by the Q density.
double bregman_error(LossFamily family, const std::function<double(double)>& beta_true,
                     const std::function<double(double)>& beta_hat, const std::function<double(double)>& q_density,
                     const QuadratureGrid& grid);

/// Monte-Carlo Bregman divergence: mean of b(beta, beta_hat) over Q-draws.
double bregman_error_mc(LossFamily family, std::span<const double> beta_true, std::span<const double> beta_hat);

/// Pooled empirical risk: (sum l(+1, s_p) + sum l(-1, s_q)) / (m + n).
double empirical_risk(LossFamily family, std::span<const double> scores_p, std::span<const double> scores_q);

}  // namespace itdre
