#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>

#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"
#include "koopcert/experiments/common.hpp"

namespace koopcert::experiments {

struct NormSample {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// n(t) = (int_1^2 psi(x(t; x0))^2 dx0)^(1/2) for psi(x) = (2 - x)^(-1/4) and the
/// logistic flow x' = x (2 - x). With x0 = 2 - s^4 the integrand becomes
/// 4 s^3 / sqrt(2 - x(t; 2 - s^4)), which is smooth on [0, 1].
[[nodiscard]] inline NormSample counterexample_norm(double t, double tolerance = 1e-12, unsigned max_depth = 30) {
    if (t < 0.0) throw InputError("counterexample_norm: t must be non-negative");
    const double g = std::exp(2.0 * t);
    auto integrand = [g](double s) {
        const double s4 = s * s * s * s;
        const double x0 = 2.0 - s4;
        // 2 - x(t) = 2 s^4 / (s^4 + g x0), so 4 s^3 (2 - x)^(-1/2) = 2 sqrt(2) s sqrt(s^4 + g x0).
        return 2.0 * std::numbers::sqrt2 * s * std::sqrt(s4 + g * x0);
    };
    double err = 0.0;
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, max_depth, tolerance, &err);
    if (!std::isfinite(integral) || err > 100.0 * tolerance * std::abs(integral))
        throw QuadratureError("counterexample quadrature did not converge", err);
    return {std::sqrt(integral), err};
}

[[nodiscard]] inline ResultTable run_semigroup_counterexample(const ExperimentConfig& config) {
    validate(config);
    const auto& c = config.counterexample;
    ResultTable t = start_table("semigroup-counterexample", config, {"t", "norm", "norm_sq", "ratio", "error_estimate"});
    const double n0 = counterexample_norm(0.0, c.tolerance, static_cast<unsigned>(c.max_depth)).value;
    for (double time : c.times) {
        const NormSample n = counterexample_norm(time, c.tolerance, static_cast<unsigned>(c.max_depth));
        t.add_row({time, n.value, n.value * n.value, n.value / n0, n.error_estimate});
    }
    return t;
}

}  // namespace koopcert::experiments
