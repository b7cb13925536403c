#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/kedmd.hpp"
#include "koopcert/rng.hpp"

namespace koopcert {

using cdouble = std::complex<double>;

/// Which Gaussian kernel the random frequencies reproduce.
///  - inverse_bandwidth: spectral std 1/sigma, i.e. exp(-|x-y|^2 / (2 sigma^2));
///  - match_kernel:      spectral std sqrt(2)/sigma, i.e. exp(-|x-y|^2 / sigma^2).
enum class SpectralConvention { inverse_bandwidth, match_kernel };

/// Random Fourier feature basis psi_i(x) = exp(i w_i . x).
struct RFFBasis {
    Eigen::MatrixXd frequencies;  ///< p x d
    double bandwidth = 1.0;
    double spectral_std = 1.0;
    std::uint64_t seed = 0;

    [[nodiscard]] Eigen::Index features() const noexcept { return frequencies.rows(); }
    [[nodiscard]] Eigen::Index dimension() const noexcept { return frequencies.cols(); }
};

[[nodiscard]] inline RFFBasis draw_rff(double sigma, Eigen::Index p, Eigen::Index d, std::uint64_t seed,
                                       SpectralConvention convention = SpectralConvention::inverse_bandwidth) {
    if (!(sigma > 0.0)) throw InputError("draw_rff: bandwidth must be positive");
    if (p < 1 || d < 1) throw InputError("draw_rff: need p >= 1 and d >= 1");
    RFFBasis basis;
    basis.bandwidth = sigma;
    basis.seed = seed;
    basis.spectral_std = (convention == SpectralConvention::inverse_bandwidth ? 1.0 : std::numbers::sqrt2) / sigma;
    basis.frequencies.resize(p, d);
    RngStream rng(seed, 0x5ff);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index k = 0; k < d; ++k) basis.frequencies(i, k) = basis.spectral_std * rng.normal();
    return basis;
}

/// Lifted state w in C^p.
struct LiftedState {
    Eigen::VectorXcd w;
    std::size_t step = 0;
};

template <typename V>
[[nodiscard]] LiftedState lift(const RFFBasis& basis, const Eigen::MatrixBase<V>& x) {
    if (x.size() != basis.dimension()) throw InputError("lift: dimension mismatch");
    const Eigen::VectorXd phase = basis.frequencies * x;
    LiftedState s;
    s.w.resize(phase.size());
    for (Eigen::Index i = 0; i < phase.size(); ++i) s.w(i) = cdouble(std::cos(phase(i)), std::sin(phase(i)));
    return s;
}

/// Feature matrix with entries exp(i w_i . x_k), p x m.
[[nodiscard]] inline Eigen::MatrixXcd feature_matrix(const RFFBasis& basis, const PointSet& points) {
    if (points.cols() != basis.dimension()) throw InputError("feature_matrix: dimension mismatch");
    const Eigen::MatrixXd phase = basis.frequencies * points.transpose();
    Eigen::MatrixXcd out(phase.rows(), phase.cols());
    for (Eigen::Index k = 0; k < phase.cols(); ++k)
        for (Eigen::Index i = 0; i < phase.rows(); ++i)
            out(i, k) = cdouble(std::cos(phase(i, k)), std::sin(phase(i, k)));
    return out;
}

/// Products M M^H and M M_t^H, shared by every regularisation strength.
struct RffNormalEquations {
    Eigen::MatrixXcd gram;   ///< M M^H
    Eigen::MatrixXcd cross;  ///< M M_t^H
    Eigen::Index samples = 0;
    double lag = 0.0;
};

[[nodiscard]] inline RffNormalEquations normal_equations(const RFFBasis& basis, const DataPairs& pairs) {
    if (pairs.size() < 1) throw InputError("normal_equations: need at least one pair");
    const Eigen::MatrixXcd m = feature_matrix(basis, pairs.x);
    const Eigen::MatrixXcd mt = feature_matrix(basis, pairs.y);
    RffNormalEquations eq;
    eq.gram.setZero(m.rows(), m.rows());
    eq.gram.selfadjointView<Eigen::Lower>().rankUpdate(m);
    eq.gram = eq.gram.selfadjointView<Eigen::Lower>();
    eq.cross.noalias() = m * mt.adjoint();
    eq.samples = pairs.size();
    eq.lag = pairs.lag;
    return eq;
}

/// Koopman matrix K = (M M^H + gamma I)^{-1} M M_t^H for one constant control.
/// Lifted states advance as w_next = K^H w.
struct RFFKoopman {
    Eigen::MatrixXcd matrix;
    double gamma = 0.0;
    Eigen::Index samples = 0;
    double lag = 0.0;
    double control = 0.0;

    [[nodiscard]] Eigen::VectorXcd apply(const Eigen::VectorXcd& w) const { return matrix.adjoint() * w; }
};

namespace detail {
inline Eigen::LLT<Eigen::MatrixXcd> regularised_factor(const Eigen::MatrixXcd& gram, double gamma) {
    if (!(gamma > 0.0)) throw InputError("regularisation gamma must be positive");
    Eigen::MatrixXcd a = gram;
    a.diagonal().array() += gamma;
    Eigen::LLT<Eigen::MatrixXcd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("Cholesky factorisation of M M^H + gamma I failed");
    return llt;
}
}  // namespace detail

[[nodiscard]] inline RFFKoopman fit_rff_koopman(const RffNormalEquations& eq, double gamma, double control = 0.0) {
    RFFKoopman k;
    k.matrix = detail::regularised_factor(eq.gram, gamma).solve(eq.cross);
    if (!k.matrix.allFinite()) throw NumericError("fit_rff_koopman: non-finite solution");
    k.gamma = gamma;
    k.samples = eq.samples;
    k.lag = eq.lag;
    k.control = control;
    return k;
}

[[nodiscard]] inline RFFKoopman fit_rff_koopman(const RFFBasis& basis, const DataPairs& pairs, double gamma,
                                                double control = 0.0) {
    return fit_rff_koopman(normal_equations(basis, pairs), gamma, control);
}

/// Readout C (d x p) minimising sum_k |z_k - C lift(x_k)|^2 + gamma |C|_F^2.
/// The physical state estimate is Re(C w).
[[nodiscard]] inline Eigen::MatrixXcd fit_readout(const RFFBasis& basis, const PointSet& points, double gamma) {
    const Eigen::MatrixXcd m = feature_matrix(basis, points);
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(m.rows(), m.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(m);
    g = g.selfadjointView<Eigen::Lower>();
    const Eigen::MatrixXcd rhs = m * points.cast<cdouble>();  // p x d
    // C^H = (M M^H + gamma I)^{-1} M Z^T
    return detail::regularised_factor(g, gamma).solve(rhs).adjoint();
}

[[nodiscard]] inline Eigen::VectorXd readout(const Eigen::MatrixXcd& c, const Eigen::VectorXcd& w) {
    return (c * w).real();
}

/// Koopman matrix for a single control direction e_i scaled by gamma_i.
struct ControlDirection {
    RFFKoopman koopman;
    double scale = 1.0;  ///< gamma_i
};

/// Bilinear surrogate K_u = K_0 + sum_i (u_i / gamma_i) (K_{gamma_i e_i} - K_0),
/// applied to lifted states in the forward orientation w -> K^H w.
struct BilinearModel {
    RFFBasis basis;
    RFFKoopman drift;                       ///< K_0
    std::vector<ControlDirection> inputs;   ///< K_{gamma_i e_i}
    Eigen::MatrixXcd readout;               ///< d x p
    double lag = 0.0;
    int project_every = 25;                 ///< 0 disables project-and-lift

    [[nodiscard]] Eigen::Index controls() const noexcept { return static_cast<Eigen::Index>(inputs.size()); }
};

/// One zero-order-hold period.
[[nodiscard]] inline LiftedState bilinear_step(const BilinearModel& model, const LiftedState& state,
                                               const Eigen::VectorXd& u) {
    if (u.size() != model.controls()) throw InputError("bilinear_step: control dimension mismatch");
    const Eigen::VectorXcd base = model.drift.apply(state.w);
    LiftedState next{base, state.step + 1};
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) == 0.0) continue;
        const auto& dir = model.inputs[static_cast<std::size_t>(i)];
        next.w += (u(i) / dir.scale) * (dir.koopman.apply(state.w) - base);
    }
    return next;
}

[[nodiscard]] inline LiftedState bilinear_step(const BilinearModel& model, const LiftedState& state, double u) {
    return bilinear_step(model, state, Eigen::VectorXd::Constant(1, u));
}

/// Read-out states beyond this magnitude count as a diverged rollout.
inline constexpr double kDivergenceBound = 1e6;

/// Scalar control as a function of time.
using ControlSignal = std::function<double(double)>;

/// Rolls out an ensemble of initial states (rows of z0) for n_steps periods with
/// the control evaluated at the start of each period. Every `project_every`
/// steps the lifted state is read out and re-lifted. Result: one Trajectory per
/// initial state holding the readout state at every step (step 0 = z0).
[[nodiscard]] inline std::vector<Trajectory> predict_ensemble(const BilinearModel& model, const PointSet& z0,
                                                              const ControlSignal& control, std::size_t n_steps) {
    if (model.controls() != 1) throw InputError("predict_ensemble: scalar-input model required");
    if (z0.cols() != model.basis.dimension()) throw InputError("predict_ensemble: dimension mismatch");
    const Eigen::Index n = z0.rows();
    std::vector<Trajectory> out(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        out[k].times.push_back(0.0);
        out[k].states.emplace_back(z0.row(k).transpose());
    }
    if (n_steps == 0) return out;

    Eigen::MatrixXcd w = feature_matrix(model.basis, z0);  // p x n
    const Eigen::MatrixXcd k0h = model.drift.matrix.adjoint();
    const Eigen::MatrixXcd k1h = model.inputs[0].koopman.matrix.adjoint();
    const double scale = model.inputs[0].scale;
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t0 = static_cast<double>(step - 1) * model.lag;
        const double u = control(t0);
        const Eigen::MatrixXcd base = k0h * w;
        if (u != 0.0) w = base + (u / scale) * (k1h * w - base);
        else w = base;

        const Eigen::MatrixXd states = (model.readout * w).real();  // d x n
        if (!states.allFinite() || !w.allFinite() || states.cwiseAbs().maxCoeff() > kDivergenceBound)
            throw DivergenceError(step);
        const double t = static_cast<double>(step) * model.lag;
        for (Eigen::Index k = 0; k < n; ++k) {
            out[k].times.push_back(t);
            out[k].states.emplace_back(states.col(k));
            out[k].controls.push_back(u);
        }
        if (model.project_every > 0 && step % static_cast<std::size_t>(model.project_every) == 0)
            w = feature_matrix(model.basis, PointSet(states.transpose()));
    }
    return out;
}

[[nodiscard]] inline Trajectory predict_trajectory(const BilinearModel& model, const Eigen::VectorXd& z0,
                                                   const ControlSignal& control, std::size_t n_steps) {
    return predict_ensemble(model, PointSet(z0.transpose()), control, n_steps).front();
}

// ---------------------------------------------------------------------------
// Control-affinity defect of the Koopman operator
// ---------------------------------------------------------------------------

/// Deterministic control-affine system x' = f(x) + sum_i u_i g_i(x) with its flow
/// under constant control.
struct ControlAffineSystem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x0, const Eigen::VectorXd& u, double t)> flow;
    Eigen::VectorXd gamma;  ///< scalings gamma_i of the admissible set
};

/// Control-affine system integrated by RK4 with `substeps` steps per flow evaluation.
[[nodiscard]] inline ControlAffineSystem rk4_system(
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift,
    std::vector<std::function<Eigen::VectorXd(const Eigen::VectorXd&)>> inputs, Eigen::VectorXd gamma,
    std::size_t substeps = 256) {
    ControlAffineSystem sys;
    sys.gamma = std::move(gamma);
    sys.flow = [drift = std::move(drift), inputs = std::move(inputs), substeps](
                   const Eigen::VectorXd& x0, const Eigen::VectorXd& u, double t) {
        auto field = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd v = drift(x);
            for (std::size_t i = 0; i < inputs.size(); ++i)
                if (u(static_cast<Eigen::Index>(i)) != 0.0) v += u(static_cast<Eigen::Index>(i)) * inputs[i](x);
            return v;
        };
        return rk4_flow(field, x0, substeps, t / static_cast<double>(substeps));
    };
    return sys;
}

struct DefectSample {
    double lag;
    double defect;
};

/// L^2(mu) norm, by the quadrature (points, weights), of
/// K_u^t psi - [K^t psi + sum_i (u_i / gamma_i)(K^t_{gamma_i e_i} psi - K^t psi)] for each t.
[[nodiscard]] inline std::vector<DefectSample> affinity_defect(
    const ControlAffineSystem& system, const std::function<double(const Eigen::VectorXd&)>& psi,
    const Eigen::VectorXd& u, const std::vector<double>& lags, const PointSet& points, const Eigen::VectorXd& weights) {
    if (u.size() != system.gamma.size()) throw InputError("affinity_defect: control dimension mismatch");
    if (weights.size() != points.rows()) throw InputError("affinity_defect: weight count mismatch");
    const Eigen::Index nu = u.size();
    std::vector<DefectSample> out;
    out.reserve(lags.size());
    for (const double t : lags) {
        if (!(t > 0.0)) throw InputError("affinity_defect: lags must be positive");
        double acc = 0.0;
        for (Eigen::Index q = 0; q < points.rows(); ++q) {
            const Eigen::VectorXd x0 = points.row(q).transpose();
            const double free = psi(system.flow(x0, Eigen::VectorXd::Zero(nu), t));
            double affine = free;
            for (Eigen::Index i = 0; i < nu; ++i) {
                if (u(i) == 0.0) continue;
                Eigen::VectorXd ei = Eigen::VectorXd::Zero(nu);
                ei(i) = system.gamma(i);
                affine += (u(i) / system.gamma(i)) * (psi(system.flow(x0, ei, t)) - free);
            }
            const double actual = (u.array() == 0.0).all() ? free : psi(system.flow(x0, u, t));
            const double d = actual - affine;
            acc += weights(q) * d * d;
        }
        out.push_back({t, std::sqrt(acc)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json complex_matrix_to_json(const Eigen::MatrixXcd& a) {
    nlohmann::json j;
    j["rows"] = a.rows();
    j["cols"] = a.cols();
    std::vector<double> re(a.size()), im(a.size());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        re[k] = a.data()[k].real();
        im[k] = a.data()[k].imag();
    }
    j["re"] = re;
    j["im"] = im;
    return j;
}

inline Eigen::MatrixXcd complex_matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(re.size()) != rows * cols || re.size() != im.size())
        throw IoError("complex matrix record: size mismatch");
    Eigen::MatrixXcd a(rows, cols);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = cdouble(re[k], im[k]);
    return a;
}

inline nlohmann::json koopman_to_json(const RFFKoopman& k) {
    return {{"matrix", complex_matrix_to_json(k.matrix)},
            {"gamma", k.gamma},
            {"samples", k.samples},
            {"lag", k.lag},
            {"control", k.control}};
}

inline RFFKoopman koopman_from_json(const nlohmann::json& j) {
    RFFKoopman k;
    k.matrix = complex_matrix_from_json(j.at("matrix"));
    k.gamma = j.at("gamma").get<double>();
    k.samples = j.at("samples").get<Eigen::Index>();
    k.lag = j.at("lag").get<double>();
    k.control = j.at("control").get<double>();
    return k;
}
}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const BilinearModel& model) {
    nlohmann::json j;
    j["format"] = "koopcert.bilinear/1";
    j["bandwidth"] = model.basis.bandwidth;
    j["spectral_std"] = model.basis.spectral_std;
    j["seed"] = model.basis.seed;
    j["frequencies"] = detail::matrix_to_json(model.basis.frequencies);
    j["drift"] = detail::koopman_to_json(model.drift);
    j["inputs"] = nlohmann::json::array();
    for (const auto& dir : model.inputs)
        j["inputs"].push_back({{"koopman", detail::koopman_to_json(dir.koopman)}, {"scale", dir.scale}});
    j["readout"] = detail::complex_matrix_to_json(model.readout);
    j["lag"] = model.lag;
    j["project_every"] = model.project_every;
    return j;
}

[[nodiscard]] inline BilinearModel bilinear_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "koopcert.bilinear/1") throw IoError("not a bilinear model record");
    BilinearModel model;
    model.basis.bandwidth = j.at("bandwidth").get<double>();
    model.basis.spectral_std = j.at("spectral_std").get<double>();
    model.basis.seed = j.at("seed").get<std::uint64_t>();
    model.basis.frequencies = detail::matrix_from_json(j.at("frequencies"));
    model.drift = detail::koopman_from_json(j.at("drift"));
    for (const auto& d : j.at("inputs"))
        model.inputs.push_back({detail::koopman_from_json(d.at("koopman")), d.at("scale").get<double>()});
    model.readout = detail::complex_matrix_from_json(j.at("readout"));
    model.lag = j.at("lag").get<double>();
    model.project_every = j.at("project_every").get<int>();
    return model;
}

}  // namespace koopcert
