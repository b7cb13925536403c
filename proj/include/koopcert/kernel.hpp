#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "koopcert/error.hpp"

namespace koopcert {

/// Sample points stored one per row (m x d).
using PointSet = Eigen::MatrixXd;

/// Gaussian RBF kernel k(x, y) = exp(-|x - y|^2 / sigma^2).
class KernelSpec {
public:
    KernelSpec() = default;
    explicit KernelSpec(double bandwidth) : bandwidth_(bandwidth) {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw InputError("kernel bandwidth must be positive");
    }

    [[nodiscard]] double bandwidth() const noexcept { return bandwidth_; }

    /// sup_x k(x, x); the kernel diagonal is identically one.
    [[nodiscard]] static constexpr double sup_norm() noexcept { return 1.0; }

    [[nodiscard]] double from_squared_distance(double d2) const noexcept {
        return std::exp(-d2 / (bandwidth_ * bandwidth_));
    }

    [[nodiscard]] double operator()(double x, double y) const noexcept {
        const double d = x - y;
        return from_squared_distance(d * d);
    }

    template <typename A, typename B>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        if (x.size() != y.size()) throw InputError("kernel evaluation: dimension mismatch");
        return from_squared_distance((x - y).squaredNorm());
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

private:
    double bandwidth_ = 1.0;
};

template <typename A, typename B>
[[nodiscard]] double eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<A>& x,
                                 const Eigen::MatrixBase<B>& y) {
    return spec(x, y);
}

[[nodiscard]] inline double eval_kernel(const KernelSpec& spec, double x, double y) { return spec(x, y); }

/// Pairwise kernel evaluations between two point sets.
struct GramMatrix {
    Eigen::MatrixXd entries;
    bool symmetric = false;  ///< built from a single point set

    [[nodiscard]] Eigen::Index rows() const noexcept { return entries.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return entries.cols(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return entries(i, j); }
};

/// Entry (i, j) is k(X_i, Y_j).
[[nodiscard]] inline GramMatrix gram(const KernelSpec& spec, const PointSet& x, const PointSet& y) {
    if (x.rows() == 0 || y.rows() == 0) throw InputError("gram: empty point set");
    if (x.cols() != y.cols()) throw InputError("gram: dimension mismatch");
    GramMatrix g;
    g.entries.resize(x.rows(), y.rows());
    for (Eigen::Index j = 0; j < y.rows(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            g.entries(i, j) = spec.from_squared_distance((x.row(i) - y.row(j)).squaredNorm());
    return g;
}

/// Symmetric Gram matrix of one point set; filled from the lower triangle so
/// the result is exactly symmetric with unit diagonal.
[[nodiscard]] inline GramMatrix gram(const KernelSpec& spec, const PointSet& x) {
    if (x.rows() == 0) throw InputError("gram: empty point set");
    const auto m = x.rows();
    GramMatrix g;
    g.symmetric = true;
    g.entries.resize(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        g.entries(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < m; ++i) {
            const double v = spec.from_squared_distance((x.row(i) - x.row(j)).squaredNorm());
            g.entries(i, j) = v;
            g.entries(j, i) = v;
        }
    }
    return g;
}

/// Kernel section k(z, .) evaluated at every point of `x`.
template <typename Z>
[[nodiscard]] Eigen::VectorXd kernel_section(const KernelSpec& spec, const Eigen::MatrixBase<Z>& z,
                                             const PointSet& x) {
    if (z.size() != x.cols()) throw InputError("kernel_section: dimension mismatch");
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out(i) = spec.from_squared_distance((x.row(i).transpose() - z).squaredNorm());
    return out;
}

}  // namespace koopcert
