#include "itdre/kernels.hpp"

#include "itdre/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace itdre {

namespace {

constexpr int kMaxBernoulliOrder = 10;

// B_0 .. B_10 with the B_1 = -1/2 convention.
constexpr std::array<double, kMaxBernoulliOrder + 1> kBernoulliNumbers = {
    1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0, 0.0, -1.0 / 30.0, 0.0, 5.0 / 66.0};

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) {
        r *= i;
    }
    return r;
}

void check_finite(std::span<const double> x, const char* what) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw InvalidInput(fmt::format("{}: non-finite coordinate", what));
        }
    }
}

void check_order(int order) {
    if (order < 2 || order % 2 != 0) {
        throw UnsupportedOrder(fmt::format("periodic Sobolev kernel: order {} must be an even integer >= 2", order));
    }
    if (order > kMaxBernoulliOrder) {
        throw UnsupportedOrder(
            fmt::format("periodic Sobolev kernel: order {} exceeds the supported maximum {}", order, kMaxBernoulliOrder));
    }
}

}  // namespace

KernelSpec KernelSpec::gaussian(double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw InvalidInput(fmt::format("gaussian kernel: bandwidth must be positive and finite, got {}", bandwidth));
    }
    return KernelSpec(GaussianKernel{bandwidth});
}

KernelSpec KernelSpec::periodic_sobolev(int order) {
    check_order(order);
    return KernelSpec(PeriodicSobolevKernel{order});
}

double KernelSpec::bandwidth() const {
    if (const auto* g = std::get_if<GaussianKernel>(&variant_)) {
        return g->bandwidth;
    }
    throw InvalidInput("kernel has no bandwidth");
}

int KernelSpec::order() const {
    if (const auto* s = std::get_if<PeriodicSobolevKernel>(&variant_)) {
        return s->order;
    }
    throw InvalidInput("kernel has no order");
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const {
    if (const auto* g = std::get_if<GaussianKernel>(&variant_)) {
        return gaussian_eval(x, y, g->bandwidth);
    }
    if (x.size() != 1 || y.size() != 1) {
        throw InvalidInput("periodic Sobolev kernel is defined on [0, 1] only");
    }
    return sobolev_eval(x[0], y[0], std::get<PeriodicSobolevKernel>(variant_).order);
}

std::string KernelSpec::describe() const {
    if (const auto* g = std::get_if<GaussianKernel>(&variant_)) {
        return fmt::format("gaussian(bandwidth={})", g->bandwidth);
    }
    return fmt::format("periodic_sobolev(order={})", std::get<PeriodicSobolevKernel>(variant_).order);
}

bool operator==(const KernelSpec& a, const KernelSpec& b) {
    if (a.is_gaussian() != b.is_gaussian()) {
        return false;
    }
    return a.is_gaussian() ? a.bandwidth() == b.bandwidth() : a.order() == b.order();
}

double gaussian_eval(std::span<const double> x, std::span<const double> y, double bandwidth) {
    if (x.size() != y.size()) {
        throw InvalidInput(fmt::format("gaussian kernel: dimension mismatch {} vs {}", x.size(), y.size()));
    }
    if (!(bandwidth > 0.0)) {
        throw InvalidInput("gaussian kernel: bandwidth must be positive");
    }
    check_finite(x, "gaussian kernel");
    check_finite(y, "gaussian kernel");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += d * d;
    }
    return std::exp(-sq / (2.0 * bandwidth * bandwidth));
}

double median_bandwidth(const Points& points) {
    const auto n = points.rows();
    if (n < 2) {
        throw InvalidInput("median heuristic needs at least two points");
    }
    if (!points.allFinite()) {
        throw InvalidInput("median heuristic: non-finite coordinate");
    }
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dist.push_back((points.row(i) - points.row(j)).norm());
        }
    }
    const std::size_t count = dist.size();
    const std::size_t mid = count / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (count % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    if (!(median > 0.0)) {
        throw DegenerateBandwidth("median heuristic: median pairwise distance is zero");
    }
    return median;
}

double bernoulli_polynomial(int n, double x) {
    if (n < 0 || n > kMaxBernoulliOrder) {
        throw UnsupportedOrder(fmt::format("Bernoulli polynomial of degree {} not tabulated", n));
    }
    // Horner over the coefficients C(n, j) B_j of x^{n-j}.
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
        acc = acc * x + binomial(n, j) * kBernoulliNumbers[static_cast<std::size_t>(j)];
    }
    return acc;
}

double sobolev_eval(double x, double y, int order) {
    check_order(order);
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw InvalidInput("periodic Sobolev kernel: non-finite argument");
    }
    double frac = (x - y) - std::floor(x - y);
    if (frac >= 1.0) {
        frac = 0.0;
    }
    const int k = order / 2;
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    const double scale = std::pow(2.0 * std::numbers::pi, order) / factorial(order);
    return 1.0 + sign * scale * bernoulli_polynomial(order, frac);
}

Eigen::MatrixXd gram(const KernelSpec& kernel, const Points& rows, const Points& cols) {
    if (rows.cols() != cols.cols()) {
        throw InvalidInput(fmt::format("gram: dimension mismatch {} vs {}", rows.cols(), cols.cols()));
    }
    if (!rows.allFinite() || !cols.allFinite()) {
        throw InvalidInput("gram: non-finite coordinate");
    }
    Eigen::MatrixXd k(rows.rows(), cols.rows());
    const auto dim = static_cast<std::size_t>(rows.cols());
    if (kernel.is_gaussian()) {
        const double inv = 1.0 / (2.0 * kernel.bandwidth() * kernel.bandwidth());
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            for (Eigen::Index j = 0; j < cols.rows(); ++j) {
                k(i, j) = std::exp(-(rows.row(i) - cols.row(j)).squaredNorm() * inv);
            }
        }
        return k;
    }
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        std::span<const double> x(rows.row(i).data(), dim);
        for (Eigen::Index j = 0; j < cols.rows(); ++j) {
            k(i, j) = kernel(x, std::span<const double>(cols.row(j).data(), dim));
        }
    }
    return k;
}

Eigen::MatrixXd gram(const KernelSpec& kernel, const Points& points) {
    if (!points.allFinite()) {
        throw InvalidInput("gram: non-finite coordinate");
    }
    const auto n = points.rows();
    const auto dim = static_cast<std::size_t>(points.cols());
    Eigen::MatrixXd k(n, n);
    if (kernel.is_gaussian()) {
        const double inv = 1.0 / (2.0 * kernel.bandwidth() * kernel.bandwidth());
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i, i) = 1.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = std::exp(-(points.row(i) - points.row(j)).squaredNorm() * inv);
                k(i, j) = v;
                k(j, i) = v;
            }
        }
        return k;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        std::span<const double> x(points.row(i).data(), dim);
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = kernel(x, std::span<const double>(points.row(j).data(), dim));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Points make_points(std::initializer_list<std::initializer_list<double>> rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = n == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
    Points p(n, d);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        if (static_cast<Eigen::Index>(r.size()) != d) {
            throw InvalidInput("make_points: ragged rows");
        }
        Eigen::Index j = 0;
        for (double v : r) {
            p(i, j++) = v;
        }
        ++i;
    }
    return p;
}

Points stack(const Points& a, const Points& b) {
    if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) {
        throw InvalidInput(fmt::format("stack: dimension mismatch {} vs {}", a.cols(), b.cols()));
    }
    Points out(a.rows() + b.rows(), a.rows() > 0 ? a.cols() : b.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
}

}  // namespace itdre
