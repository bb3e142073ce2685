#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <variant>

namespace itdre {

/// Row-major point set: one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GaussianKernel {
    double bandwidth;
};

/// h_alpha(x, y) = 1 + sum_{l != 0} exp(2 pi i l (x - y)) / |l|^alpha on [0, 1].
struct PeriodicSobolevKernel {
    int order;
};

/// Immutable kernel choice. Construction validates parameters.
class KernelSpec {
public:
    static KernelSpec gaussian(double bandwidth);
    static KernelSpec periodic_sobolev(int order);

    bool is_gaussian() const noexcept { return std::holds_alternative<GaussianKernel>(variant_); }
    double bandwidth() const;
    int order() const;

    double operator()(std::span<const double> x, std::span<const double> y) const;

    std::string describe() const;

    friend bool operator==(const KernelSpec& a, const KernelSpec& b);

private:
    explicit KernelSpec(std::variant<GaussianKernel, PeriodicSobolevKernel> v) : variant_(v) {}

    std::variant<GaussianKernel, PeriodicSobolevKernel> variant_;
};

double gaussian_eval(std::span<const double> x, std::span<const double> y, double bandwidth);

/// Median of all pairwise Euclidean distances over unordered pairs (i < j),
/// zero distances included. Throws DegenerateBandwidth if the median is zero.
double median_bandwidth(const Points& points);

/// Bernoulli polynomial B_n(x) for 0 <= n <= 10.
double bernoulli_polynomial(int n, double x);

/// Periodic Sobolev kernel via the Bernoulli closed form in frac(x - y).
double sobolev_eval(double x, double y, int order);

/// Dense kernel matrix K(i, j) = k(rows[i], cols[j]).
Eigen::MatrixXd gram(const KernelSpec& kernel, const Points& rows, const Points& cols);

/// Symmetric Gram of a single point set; fills the upper triangle and mirrors it.
Eigen::MatrixXd gram(const KernelSpec& kernel, const Points& points);

/// Builds a Points matrix from a list of coordinates per point.
Points make_points(std::initializer_list<std::initializer_list<double>> rows);

/// Stacks two point sets (a on top of b). Dimensions must agree.
Points stack(const Points& a, const Points& b);

}  // namespace itdre
