#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "koopcert/error.hpp"

namespace koopcert {

/// Hoeffding-type bound on the Hilbert–Schmidt estimation error of the empirical
/// (cross-)covariance operator: P(|C - C_m|_HS > eps) <= 2 exp(-m eps^2 / (8 |k|_inf^2)).
struct HoeffdingBound {
    std::int64_t samples = 0;
    double delta = 0.1;
    double sup_norm = 1.0;
    double epsilon = 0.0;

    /// Failure probability implied by (samples, epsilon); reproduces delta.
    [[nodiscard]] double failure_probability() const {
        return 2.0 * std::exp(-static_cast<double>(samples) * epsilon * epsilon / (8.0 * sup_norm * sup_norm));
    }
};

[[nodiscard]] inline HoeffdingBound hoeffding_epsilon(std::int64_t m, double delta, double sup_norm = 1.0) {
    if (m < 1) throw InputError("hoeffding_epsilon: m must be at least 1");
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("hoeffding_epsilon: delta must lie in (0, 1)");
    if (!(sup_norm > 0.0)) throw InputError("hoeffding_epsilon: sup norm must be positive");
    return {m, delta, sup_norm, sup_norm * std::sqrt(8.0 * std::log(2.0 / delta) / static_cast<double>(m))};
}

/// Smallest m with m >= max{r, 8 |k|^2 ln(4 (n_u + 1) / delta) / eps^2}.
[[nodiscard]] inline std::int64_t required_samples(double epsilon, double delta, std::int64_t rank,
                                                   double sup_norm = 1.0, int n_controls = 0) {
    if (!(epsilon > 0.0)) throw InputError("required_samples: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("required_samples: delta must lie in (0, 1)");
    if (rank < 1) throw InputError("required_samples: rank must be at least 1");
    if (n_controls < 0) throw InputError("required_samples: negative control count");
    const double bound =
        8.0 * sup_norm * sup_norm * std::log(4.0 * (n_controls + 1) / delta) / (epsilon * epsilon);
    const auto m = static_cast<std::int64_t>(std::ceil(bound));
    return std::max(rank, m);
}

/// Spectral-gap constants for rank r: delta_r (half the smallest gap among the
/// first r+1 eigenvalues) and the amplification constant c_r.
struct SpectralGapConstants {
    int rank = 0;
    double delta_r = 0.0;
    double c_r = 0.0;
    double trace_y = 1.0;
    double trace_x = 1.0;
    double lambda_r = 0.0;
};

[[nodiscard]] inline SpectralGapConstants gap_constants(const std::vector<double>& eigenvalues, int r,
                                                        double trace_y = 1.0, double trace_x = 1.0) {
    if (r < 1) throw InputError("gap_constants: rank must be at least 1");
    if (eigenvalues.size() < static_cast<std::size_t>(r) + 1)
        throw InputError("gap_constants: need r + 1 eigenvalues");
    if (!(trace_y >= 0.0) || !(trace_x >= 0.0)) throw InputError("gap_constants: traces must be non-negative");
    double gap = INFINITY;
    for (int j = 0; j < r; ++j) {
        const double g = 0.5 * (eigenvalues[j] - eigenvalues[j + 1]);
        if (!(g > 0.0))
            throw GapError("eigenvalues " + std::to_string(j + 1) + " and " + std::to_string(j + 2) +
                           " are not strictly decreasing; the spectral gap vanishes");
        gap = std::min(gap, g);
    }
    const double lr = eigenvalues[r - 1];
    if (!(lr > 0.0)) throw InputError("gap_constants: eigenvalues must be positive");
    SpectralGapConstants out;
    out.rank = r;
    out.delta_r = gap;
    out.lambda_r = lr;
    out.trace_y = trace_y;
    out.trace_x = trace_x;
    out.c_r = 1.0 / std::sqrt(lr) + (r + 1) / (gap * lr) * (1.0 + trace_y) * std::sqrt(trace_x);
    return out;
}

/// Axis-aligned admissible control box [lo_i, hi_i].
struct ControlBox {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Euclidean ball of the given radius centred at the origin.
struct ControlBall {
    double radius = 1.0;
    int dimension = 1;
};

using ControlSet = std::variant<ControlBox, ControlBall>;

/// Factor (1 + 2 |Gamma^{-1} u|_1) and the scalings gamma_i = inf{g > 0 : g e_i not in U}.
/// The O(t^2) coefficient is not computable from data; it is carried as an
/// optional, empirically fitted input.
struct ControlCertificate {
    Eigen::VectorXd control;
    Eigen::VectorXd gamma;
    double factor = 1.0;
    std::optional<double> quadratic_coefficient;  ///< c_psi, empirical
    double lag = 0.0;                             ///< sampling period t for the c_psi t^2 term
};

[[nodiscard]] inline ControlCertificate control_factor(const Eigen::VectorXd& u, const ControlSet& set) {
    ControlCertificate cert;
    cert.control = u;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, ControlBox>) {
                if (s.lo.size() != u.size() || s.hi.size() != u.size())
                    throw InputError("control_factor: box dimension mismatch");
                if (!((s.lo.array() < 0.0).all() && (s.hi.array() > 0.0).all()))
                    throw InputError("control_factor: 0 must lie in the interior of the control set");
                if ((u.array() < s.lo.array()).any() || (u.array() > s.hi.array()).any())
                    throw InputError("control_factor: control lies outside the admissible set");
                cert.gamma = s.hi;
            } else {
                if (s.dimension != u.size()) throw InputError("control_factor: ball dimension mismatch");
                if (!(s.radius > 0.0))
                    throw InputError("control_factor: 0 must lie in the interior of the control set");
                if (u.norm() > s.radius * (1.0 + 1e-12))
                    throw InputError("control_factor: control lies outside the admissible set");
                cert.gamma = Eigen::VectorXd::Constant(u.size(), s.radius);
            }
        },
        set);
    cert.factor = 1.0 + 2.0 * u.cwiseAbs().cwiseQuotient(cert.gamma).sum();
    return cert;
}

/// Optional RKHS-invariance term sqrt(lambda_{r+1}) * M.
struct InvarianceTerm {
    double lambda_next = 0.0;
    double operator_norm = 1.0;
};

/// c_r eps, plus sqrt(lambda_{r+1}) M when requested; with a control certificate
/// both are multiplied by (1 + 2 |Gamma^{-1} u|_1) and c_psi t^2 is added when known.
[[nodiscard]] inline double certify_bound(const HoeffdingBound& hoeffding, const SpectralGapConstants& gaps,
                                          const std::optional<ControlCertificate>& control = std::nullopt,
                                          const std::optional<InvarianceTerm>& invariance = std::nullopt) {
    if (!(hoeffding.epsilon < gaps.delta_r))
        throw CertificateError("epsilon = " + std::to_string(hoeffding.epsilon) + " is not below delta_r = " +
                               std::to_string(gaps.delta_r));
    double bound = gaps.c_r * hoeffding.epsilon;
    if (invariance) bound += std::sqrt(invariance->lambda_next) * invariance->operator_norm;
    if (control) {
        bound *= control->factor;
        if (control->quadratic_coefficient) bound += *control->quadratic_coefficient * control->lag * control->lag;
    }
    return bound;
}

[[nodiscard]] inline nlohmann::json to_json(const HoeffdingBound& h) {
    return {{"samples", h.samples}, {"delta", h.delta}, {"sup_norm", h.sup_norm}, {"epsilon", h.epsilon}};
}

[[nodiscard]] inline nlohmann::json to_json(const SpectralGapConstants& g) {
    return {{"rank", g.rank},       {"delta_r", g.delta_r}, {"c_r", g.c_r},
            {"trace_y", g.trace_y}, {"trace_x", g.trace_x}, {"lambda_r", g.lambda_r}};
}

[[nodiscard]] inline nlohmann::json to_json(const ControlCertificate& c) {
    nlohmann::json j;
    j["control"] = std::vector<double>(c.control.data(), c.control.data() + c.control.size());
    j["gamma"] = std::vector<double>(c.gamma.data(), c.gamma.data() + c.gamma.size());
    j["factor"] = c.factor;
    if (c.quadratic_coefficient) {
        j["quadratic_coefficient"] = *c.quadratic_coefficient;
        j["quadratic_coefficient_source"] = "empirical";
    } else {
        j["quadratic_coefficient"] = nullptr;
        j["quadratic_coefficient_source"] = "unknown";
    }
    j["lag"] = c.lag;
    return j;
}

}  // namespace koopcert
