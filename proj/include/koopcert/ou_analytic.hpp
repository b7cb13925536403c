#pragma once

#include <cmath>

#include "koopcert/error.hpp"
#include "koopcert/kernel.hpp"

namespace koopcert {

/// Image of a Gaussian kernel section under the Ornstein–Uhlenbeck Koopman
/// operator: (K^t k_z^sigma)(x) = amplitude * k^width(center, x).
struct AnalyticKoopmanImage {
    double amplitude = 1.0;  ///< tau, in (0, 1] (1 only at t = 0)
    double center = 0.0;     ///< e^{alpha t} z
    double width = 1.0;      ///< nu >= sigma
    double concentration = 0.0;  ///< c_t = 1 / (2 v_t); infinite at t = 0
    double operator_norm_bound = 1.0;  ///< e^{alpha t / 2}

    [[nodiscard]] double operator()(double x) const {
        const double d = x - center;
        return amplitude * std::exp(-d * d / (width * width));
    }
};

/// Closed-form Koopman image of k_z^sigma for dX = -alpha X dt + sqrt(2/beta) dW.
/// The transition law from x is N(e^{-alpha t} x, v_t) with
/// v_t = (1 - e^{-2 alpha t}) / (alpha beta). At t = 0 the identity limit is returned.
[[nodiscard]] inline AnalyticKoopmanImage ou_koopman_rbf(double alpha, double beta, double t, double z,
                                                         double sigma) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw InputError("ou_koopman_rbf: alpha and beta must be positive");
    if (!(sigma > 0.0)) throw InputError("ou_koopman_rbf: sigma must be positive");
    if (t < 0.0) throw InputError("ou_koopman_rbf: t must be non-negative");
    AnalyticKoopmanImage img;
    if (t == 0.0) {
        img.amplitude = 1.0;
        img.center = z;
        img.width = sigma;
        img.concentration = INFINITY;
        img.operator_norm_bound = 1.0;
        return img;
    }
    const double c = alpha * beta / (2.0 * -std::expm1(-2.0 * alpha * t));
    const double cs2 = c * sigma * sigma;
    const double growth = std::exp(alpha * t);
    img.concentration = c;
    img.amplitude = std::sqrt(cs2 / (1.0 + cs2));
    img.center = growth * z;
    img.width = growth * sigma / img.amplitude;
    img.operator_norm_bound = std::exp(0.5 * alpha * t);
    return img;
}

}  // namespace koopcert
