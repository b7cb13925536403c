#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "koopcert/error.hpp"

namespace koopcert {

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order and
/// eigenvectors stored column-wise in matching order.
struct SymmetricEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

namespace detail {

inline SymmetricEigen dsyevr(const Eigen::MatrixXd& a, char range, double vl, double vu, lapack_int il,
                             lapack_int iu) {
    const auto n = static_cast<lapack_int>(a.rows());
    if (a.rows() != a.cols()) throw InputError("symmetric eigensolver: matrix is not square");
    if (n == 0) return {};
    Eigen::MatrixXd work = a;
    const lapack_int capacity = range == 'I' ? iu - il + 1 : n;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, capacity);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(std::max<lapack_int>(capacity, 1)));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', range, 'L', n, work.data(), n, vl, vu, il, iu,
                                           0.0, &found, w.data(), z.data(), n, support.data());
    if (info != 0) throw NumericError("dsyevr failed with info = " + std::to_string(info));
    SymmetricEigen out;
    out.values.resize(found);
    out.vectors.resize(n, found);
    for (lapack_int k = 0; k < found; ++k) {
        out.values(k) = w(found - 1 - k);
        out.vectors.col(k) = z.col(found - 1 - k);
    }
    return out;
}

}  // namespace detail

/// All eigenpairs, descending.
inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a) {
    return detail::dsyevr(a, 'A', 0.0, 0.0, 0, 0);
}

/// The k largest eigenpairs, descending.
inline SymmetricEigen top_eigenpairs(const Eigen::MatrixXd& a, Eigen::Index k) {
    const auto n = a.rows();
    if (k < 1 || k > n) throw InputError("top_eigenpairs: k must lie in [1, n]");
    return detail::dsyevr(a, 'I', 0.0, 0.0, static_cast<lapack_int>(n - k + 1), static_cast<lapack_int>(n));
}

/// Eigenpairs with eigenvalue strictly greater than `lower`, descending.
inline SymmetricEigen eigenpairs_above(const Eigen::MatrixXd& a, double lower) {
    // Gershgorin bound on the spectrum for the upper end of the search interval.
    const double upper = a.cwiseAbs().rowwise().sum().maxCoeff() + 1.0;
    if (lower >= upper) return {Eigen::VectorXd(0), Eigen::MatrixXd(a.rows(), 0)};
    return detail::dsyevr(a, 'V', lower, upper, 0, 0);
}

/// One-dimensional quadrature rule: integral of f against a measure is
/// approximated by sum_q weights(q) * f(nodes(q)).
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

/// Gauss–Hermite rule for the weight exp(-x^2) on the real line (Golub–Welsch).
inline QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw InputError("gauss_hermite: n must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    QuadratureRule rule;
    rule.nodes = solver.eigenvalues();
    rule.weights = std::sqrt(std::numbers::pi) * solver.eigenvectors().row(0).transpose().array().square();
    return rule;
}

/// Gauss–Hermite rule rescaled to the probability measure N(mean, variance).
inline QuadratureRule gaussian_measure_rule(double mean, double variance, int n) {
    if (!(variance > 0.0)) throw InputError("gaussian_measure_rule: variance must be positive");
    QuadratureRule rule = gauss_hermite(n);
    rule.nodes = (mean + std::sqrt(2.0 * variance) * rule.nodes.array()).matrix();
    rule.weights /= std::sqrt(std::numbers::pi);
    return rule;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("loglog_slope: need at least two matching points");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("loglog_slope: values must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace koopcert
