#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>

#include "koopcert/error.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/linalg.hpp"

namespace koopcert {

/// Gaussian probability measure N(mean, variance) on the real line.
struct GaussianMeasure {
    double mean = 0.0;
    double variance = 1.0;
};

/// Truncated eigen-expansion of the integral operator
/// psi -> int k(., y) psi(y) dmu(y) on L^2(mu), one-dimensional state.
///
/// Eigenvalues are non-increasing; eigenfunctions are orthonormal in L^2(mu)
/// and sign-normalised: positive at the measure mean, or with positive slope
/// there when the function (nearly) vanishes at the mean.
class MercerExpansion {
public:
    /// Evaluates all `order` eigenfunctions at each point; result is points x order.
    using Evaluator = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

    MercerExpansion(Eigen::VectorXd eigenvalues, GaussianMeasure measure, Evaluator evaluator, double trace = 1.0)
        : eigenvalues_(std::move(eigenvalues)), measure_(measure), evaluator_(std::move(evaluator)), trace_(trace) {}

    [[nodiscard]] int order() const noexcept { return static_cast<int>(eigenvalues_.size()); }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    [[nodiscard]] const GaussianMeasure& measure() const noexcept { return measure_; }

    [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& points) const { return evaluator_(points); }

    [[nodiscard]] Eigen::VectorXd evaluate(double x) const {
        return evaluator_(Eigen::VectorXd::Constant(1, x)).row(0).transpose();
    }

    /// Sum of the retained eigenvalues.
    [[nodiscard]] double partial_trace(int n) const { return eigenvalues_.head(n).sum(); }

    /// Trace mass not captured by the retained eigenvalues: int phi dmu - sum_{n<=N} lambda_n.
    [[nodiscard]] double tail_bound() const { return std::max(0.0, trace_ - eigenvalues_.sum()); }

private:
    Eigen::VectorXd eigenvalues_;
    GaussianMeasure measure_;
    Evaluator evaluator_;
    double trace_;
};

/// Parameters of the closed-form Hermite expansion of the Gaussian kernel
/// exp(-eps^2 (x-y)^2) under the weight (a / sqrt(pi)) exp(-a^2 (x - mean)^2).
struct GaussianMercerParameters {
    double a2;      ///< 1 / (2 variance)
    double eps2;    ///< 1 / sigma^2
    double beta;    ///< (1 + 4 eps^2 / a^2)^(1/4)
    double delta2;  ///< a^2 (beta^2 - 1) / 2
    double lead;    ///< largest eigenvalue
    double ratio;   ///< geometric decay factor, in (0, 1)

    GaussianMercerParameters(const KernelSpec& spec, const GaussianMeasure& mu) {
        a2 = 1.0 / (2.0 * mu.variance);
        eps2 = 1.0 / (spec.bandwidth() * spec.bandwidth());
        beta = std::pow(1.0 + 4.0 * eps2 / a2, 0.25);
        delta2 = 0.5 * a2 * (beta * beta - 1.0);
        const double denom = a2 + delta2 + eps2;
        lead = std::sqrt(a2 / denom);
        ratio = eps2 / denom;
    }

    /// lambda_n for n >= 1.
    [[nodiscard]] double eigenvalue(int n) const { return lead * std::pow(ratio, n - 1); }
};

/// Closed-form Mercer pairs of the Gaussian kernel under a Gaussian measure.
[[nodiscard]] inline MercerExpansion mercer_gaussian(const KernelSpec& spec, double measure_mean,
                                                     double measure_var, int order) {
    if (!(measure_var > 0.0)) throw InputError("mercer_gaussian: measure variance must be positive");
    if (order < 1) throw InputError("mercer_gaussian: order must be at least 1");
    const GaussianMeasure mu{measure_mean, measure_var};
    const GaussianMercerParameters par(spec, mu);

    Eigen::VectorXd lambda(order);
    for (int n = 1; n <= order; ++n) lambda(n - 1) = par.eigenvalue(n);

    auto evaluator = [par, mu, order](const Eigen::VectorXd& points) {
        Eigen::MatrixXd out(points.size(), order);
        const double a = std::sqrt(par.a2);
        const double amp = std::sqrt(par.beta);
        for (Eigen::Index p = 0; p < points.size(); ++p) {
            const double s = points(p) - mu.mean;
            const double arg = a * par.beta * s;
            const double envelope = amp * std::exp(-par.delta2 * s * s);
            // Normalised Hermite recurrence: h_k = H_k / sqrt(2^k k!).
            double prev = 0.0;
            double cur = 1.0;
            for (int k = 0; k < order; ++k) {
                const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
                out(p, k) = sign * envelope * cur;
                const double next = std::sqrt(2.0 / (k + 1)) * arg * cur - std::sqrt(double(k) / (k + 1)) * prev;
                prev = cur;
                cur = next;
            }
        }
        return out;
    };
    return MercerExpansion(std::move(lambda), mu, std::move(evaluator));
}

/// Quadrature rule built from i.i.d. draws of the measure (equal weights).
template <typename Sampler>
[[nodiscard]] QuadratureRule monte_carlo_rule(Sampler&& sampler, int count) {
    if (count < 1) throw InputError("monte_carlo_rule: count must be positive");
    QuadratureRule rule;
    rule.nodes.resize(count);
    for (int q = 0; q < count; ++q) rule.nodes(q) = sampler();
    rule.weights = Eigen::VectorXd::Constant(count, 1.0 / count);
    return rule;
}

/// Nystrom discretisation of the kernel integral operator on a quadrature rule
/// for `measure`. Eigenfunctions are extended off the nodes by the Nystrom formula
/// e_n(x) = lambda_n^{-1} sum_q w_q k(x, x_q) e_n(x_q).
[[nodiscard]] inline MercerExpansion nystrom_mercer(const KernelSpec& spec, const GaussianMeasure& measure,
                                                    const QuadratureRule& rule, int order) {
    const auto count = rule.nodes.size();
    if (order < 1 || order > count) throw InputError("nystrom_mercer: need 1 <= order <= number of nodes");
    const Eigen::VectorXd root_w = rule.weights.array().sqrt();

    Eigen::MatrixXd a(count, count);
    for (Eigen::Index j = 0; j < count; ++j)
        for (Eigen::Index i = j; i < count; ++i) {
            const double v = root_w(i) * spec(rule.nodes(i), rule.nodes(j)) * root_w(j);
            a(i, j) = v;
            a(j, i) = v;
        }
    SymmetricEigen eig = top_eigenpairs(a, order);

    // Columns hold sqrt(w_q) e_n(x_q) / lambda_n so that a kernel row times the
    // column gives the Nystrom extension.
    Eigen::MatrixXd coeffs = root_w.asDiagonal() * eig.vectors;
    coeffs = coeffs * eig.values.cwiseInverse().asDiagonal();
    const Eigen::VectorXd nodes = rule.nodes;

    auto extend = [spec, nodes](const Eigen::MatrixXd& c, const Eigen::VectorXd& points) {
        Eigen::MatrixXd k(points.size(), nodes.size());
        for (Eigen::Index q = 0; q < nodes.size(); ++q)
            for (Eigen::Index p = 0; p < points.size(); ++p) k(p, q) = spec(points(p), nodes(q));
        return Eigen::MatrixXd(k * c);
    };

    // Sign normalisation at the measure mean.
    const double h = 1e-4 * std::sqrt(measure.variance);
    Eigen::VectorXd probe(3);
    probe << measure.mean, measure.mean - h, measure.mean + h;
    const Eigen::MatrixXd at = extend(coeffs, probe);
    for (int n = 0; n < order; ++n) {
        const double value = at(0, n);
        const double slope = (at(2, n) - at(1, n)) / (2.0 * h);
        const bool use_value = std::abs(value) >= 0.1 * std::sqrt(measure.variance) * std::abs(slope);
        if ((use_value ? value : slope) < 0.0) coeffs.col(n) = -coeffs.col(n);
    }

    auto evaluator = [extend, coeffs](const Eigen::VectorXd& points) { return extend(coeffs, points); };
    return MercerExpansion(std::move(eig.values), measure, std::move(evaluator));
}

}  // namespace koopcert
