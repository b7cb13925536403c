#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "koopcert/error.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/rng.hpp"

namespace koopcert {

// ---------------------------------------------------------------------------
// Ornstein–Uhlenbeck process  dX = -alpha X dt + sqrt(2 / beta) dW
// ---------------------------------------------------------------------------

struct OUParams {
    double alpha = 1.0;
    double beta = 2.0;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0)) throw InputError("OU parameters must be positive");
    }
    [[nodiscard]] double invariant_variance() const { return 1.0 / (alpha * beta); }
    [[nodiscard]] double transition_mean(double x, double t) const { return std::exp(-alpha * t) * x; }
    [[nodiscard]] double transition_variance(double t) const {
        return -std::expm1(-2.0 * alpha * t) / (alpha * beta);
    }
    [[nodiscard]] double noise_scale() const { return std::sqrt(2.0 / beta); }
};

/// Exact draw from the OU transition law rho_t(x, .). t = 0 returns x.
inline double ou_transition_sample(const OUParams& p, double x, double t, RngStream& rng) {
    if (t < 0.0) throw InputError("ou_transition_sample: t must be non-negative");
    if (t == 0.0) return x;
    return p.transition_mean(x, t) + std::sqrt(p.transition_variance(t)) * rng.normal();
}

/// Number of fixed steps of size dt covering t exactly; rejects partial steps.
inline std::size_t step_count(double t, double dt) {
    if (!(dt > 0.0)) throw InputError("time step must be positive");
    if (t < 0.0) throw InputError("horizon must be non-negative");
    const double ratio = t / dt;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw InputError("horizon " + std::to_string(t) + " is not an integer multiple of the step " + std::to_string(dt));
    return static_cast<std::size_t>(n);
}

/// One Euler–Maruyama step x + b(x) dt + s(x) sqrt(dt) xi with diagonal noise;
/// `diffusion` returns the per-component noise amplitudes.
template <typename Drift, typename Diffusion>
Eigen::VectorXd em_sde_step(Drift&& drift, Diffusion&& diffusion, const Eigen::VectorXd& x, double dt,
                            RngStream& rng) {
    if (!(dt > 0.0)) throw InputError("em_sde_step: dt must be positive");
    Eigen::VectorXd out = x + dt * drift(x);
    const Eigen::VectorXd amp = diffusion(x);
    const double root_dt = std::sqrt(dt);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = rng.normal();
        out(i) += amp(i) * root_dt * xi;
    }
    return out;
}

/// Euler–Maruyama propagation over a horizon t made of whole steps dt.
template <typename Drift, typename Diffusion>
Eigen::VectorXd em_propagate(Drift&& drift, Diffusion&& diffusion, Eigen::VectorXd x, double t, double dt,
                             RngStream& rng) {
    const std::size_t n = step_count(t, dt);
    for (std::size_t k = 0; k < n; ++k) x = em_sde_step(drift, diffusion, x, dt, rng);
    return x;
}

// ---------------------------------------------------------------------------
// Deterministic flows
// ---------------------------------------------------------------------------

/// Classical fourth-order Runge–Kutta step for x' = field(x).
template <typename Field, typename Vec>
Vec rk4_step(Field&& field, const Vec& x, double dt) {
    const Vec k1 = field(x);
    const Vec k2 = field(Vec(x + 0.5 * dt * k1));
    const Vec k3 = field(Vec(x + 0.5 * dt * k2));
    const Vec k4 = field(Vec(x + dt * k3));
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Field, typename Vec>
Vec rk4_flow(Field&& field, Vec x, std::size_t steps, double dt) {
    for (std::size_t k = 0; k < steps; ++k) x = rk4_step(field, x, dt);
    return x;
}

/// Duffing oscillator z1' = z2, z2' = -alpha z1 u - 2 beta z1^3.
struct DuffingParams {
    double alpha = -1.0;
    double beta = 1.0;

    [[nodiscard]] Eigen::Vector2d drift(const Eigen::Vector2d& z) const {
        return {z(1), -2.0 * beta * z(0) * z(0) * z(0)};
    }
    /// Input vector field multiplying the scalar control.
    [[nodiscard]] Eigen::Vector2d input_field(const Eigen::Vector2d& z) const { return {0.0, -alpha * z(0)}; }
    [[nodiscard]] Eigen::Vector2d field(const Eigen::Vector2d& z, double u) const {
        return {z(1), -alpha * z(0) * u - 2.0 * beta * z(0) * z(0) * z(0)};
    }
};

/// States sampled on a time grid together with the control held on each interval.
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<double> controls;  ///< control applied on [times[k], times[k+1])

    [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
};

/// Final state of the Duffing flow under constant control after time t (RK4, step dt).
inline Eigen::Vector2d duffing_flow(const DuffingParams& p, const Eigen::Vector2d& z0, double u, double t,
                                    double dt) {
    const std::size_t n = step_count(t, dt);
    return rk4_flow([&](const Eigen::Vector2d& z) { return p.field(z, u); }, z0, n, dt);
}

/// Fixed-step RK4 trajectory of the Duffing oscillator under constant control.
inline Trajectory integrate_duffing(const DuffingParams& p, const Eigen::Vector2d& z0, double u, double t_final,
                                    double dt) {
    const std::size_t n = step_count(t_final, dt);
    Trajectory traj;
    traj.times.reserve(n + 1);
    traj.states.reserve(n + 1);
    Eigen::Vector2d z = z0;
    traj.times.push_back(0.0);
    traj.states.emplace_back(z);
    auto field = [&](const Eigen::Vector2d& s) { return p.field(s, u); };
    for (std::size_t k = 0; k < n; ++k) {
        z = rk4_step(field, z, dt);
        traj.times.push_back(static_cast<double>(k + 1) * dt);
        traj.states.emplace_back(z);
        traj.controls.push_back(u);
    }
    return traj;
}

/// Duffing trajectory sampled every `lag` under zero-order hold of u(t):
/// the control on [k lag, (k+1) lag) is u(k lag).
inline Trajectory integrate_duffing_zoh(const DuffingParams& p, const Eigen::Vector2d& z0,
                                        const std::function<double(double)>& u, double lag, std::size_t periods,
                                        double dt) {
    const std::size_t inner = step_count(lag, dt);
    Trajectory traj;
    traj.times.reserve(periods + 1);
    traj.states.reserve(periods + 1);
    Eigen::Vector2d z = z0;
    traj.times.push_back(0.0);
    traj.states.emplace_back(z);
    for (std::size_t k = 0; k < periods; ++k) {
        const double uk = u(static_cast<double>(k) * lag);
        z = rk4_flow([&](const Eigen::Vector2d& s) { return p.field(s, uk); }, z, inner, dt);
        traj.times.push_back(static_cast<double>(k + 1) * lag);
        traj.states.emplace_back(z);
        traj.controls.push_back(uk);
    }
    return traj;
}

/// Closed-form flow of x' = x (2 - x), valid for x0 in [1, 2].
inline double logistic_flow_exact(double x0, double t) {
    if (x0 < 1.0 || x0 > 2.0) throw InputError("logistic_flow_exact: x0 must lie in [1, 2]");
    if (t < 0.0) throw InputError("logistic_flow_exact: t must be non-negative");
    const double g = std::exp(2.0 * t);
    return 2.0 * g * x0 / (2.0 - x0 + g * x0);
}

// ---------------------------------------------------------------------------
// Initial-condition laws
// ---------------------------------------------------------------------------

/// N(mean, variance) restricted to [lo, hi] and renormalised.
struct TruncatedGaussianLaw {
    double mean = 0.0;
    double variance = 1.0;
    double lo = -1.0;
    double hi = 1.0;
};

/// Uniform law on an axis-aligned box.
struct UniformBoxLaw {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

using InitialLaw = std::variant<TruncatedGaussianLaw, UniformBoxLaw>;

/// Inverse-CDF sampler for the truncated Gaussian; one uniform per draw.
class TruncatedGaussianSampler {
public:
    explicit TruncatedGaussianSampler(const TruncatedGaussianLaw& law)
        : law_(law), dist_(law.mean, std::sqrt(law.variance)) {
        if (!(law.variance > 0.0)) throw InputError("truncated Gaussian: variance must be positive");
        if (!(law.hi > law.lo)) throw InputError("truncated Gaussian: empty interval");
        cdf_lo_ = boost::math::cdf(dist_, law.lo);
        cdf_hi_ = boost::math::cdf(dist_, law.hi);
    }

    double operator()(RngStream& rng) const {
        const double p = cdf_lo_ + rng.uniform() * (cdf_hi_ - cdf_lo_);
        return std::clamp(boost::math::quantile(dist_, p), law_.lo, law_.hi);
    }

private:
    TruncatedGaussianLaw law_;
    boost::math::normal_distribution<double> dist_;
    double cdf_lo_ = 0.0;
    double cdf_hi_ = 1.0;
};

inline PointSet sample_initials(const InitialLaw& law, Eigen::Index m, RngStream& rng) {
    if (m < 1) throw InputError("sample_initials: m must be at least 1");
    return std::visit(
        [&](const auto& l) -> PointSet {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, TruncatedGaussianLaw>) {
                const TruncatedGaussianSampler draw(l);
                PointSet out(m, 1);
                for (Eigen::Index k = 0; k < m; ++k) out(k, 0) = draw(rng);
                return out;
            } else {
                if (l.lo.size() == 0 || l.lo.size() != l.hi.size())
                    throw InputError("uniform box: bounds must be non-empty and of equal dimension");
                if (((l.hi - l.lo).array() <= 0.0).any()) throw InputError("uniform box: empty region");
                PointSet out(m, l.lo.size());
                for (Eigen::Index k = 0; k < m; ++k)
                    for (Eigen::Index i = 0; i < l.lo.size(); ++i) out(k, i) = rng.uniform(l.lo(i), l.hi(i));
                return out;
            }
        },
        law);
}

// ---------------------------------------------------------------------------
// Sample pairs
// ---------------------------------------------------------------------------

/// i.i.d. pairs (x_k, y_k) with y_k drawn from the time-t transition of x_k.
struct DataPairs {
    PointSet x;
    PointSet y;
    double lag = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    [[nodiscard]] Eigen::Index size() const noexcept { return x.rows(); }
    [[nodiscard]] Eigen::Index dimension() const noexcept { return x.cols(); }
};

struct OUSystem {
    enum class Propagation { exact, euler_maruyama };
    OUParams params;
    Propagation propagation = Propagation::exact;
    double em_dt = 0.01;
};

struct DuffingSystem {
    DuffingParams params;
    double control = 0.0;
    double dt = 0.005;
};

using System = std::variant<OUSystem, DuffingSystem>;

/// Draws m pairs: x_k from `law`, y_k from the system's transition over lag t.
inline DataPairs generate_pairs(const System& system, double t, Eigen::Index m, const InitialLaw& law,
                                std::uint64_t seed, std::uint64_t stream = 0) {
    if (t < 0.0) throw InputError("generate_pairs: lag must be non-negative");
    RngStream rng(seed, stream);
    DataPairs pairs;
    pairs.lag = t;
    pairs.seed = seed;
    pairs.stream = stream;
    pairs.x = sample_initials(law, m, rng);
    pairs.y.resize(pairs.x.rows(), pairs.x.cols());
    if (t == 0.0) {
        pairs.y = pairs.x;
        return pairs;
    }
    std::visit(
        [&](const auto& sys) {
            using S = std::decay_t<decltype(sys)>;
            if constexpr (std::is_same_v<S, OUSystem>) {
                sys.params.validate();
                if (pairs.x.cols() != 1) throw InputError("generate_pairs: OU system is one-dimensional");
                if (sys.propagation == OUSystem::Propagation::exact) {
                    for (Eigen::Index k = 0; k < m; ++k)
                        pairs.y(k, 0) = ou_transition_sample(sys.params, pairs.x(k, 0), t, rng);
                } else {
                    const double alpha = sys.params.alpha;
                    const double noise = sys.params.noise_scale();
                    auto drift = [alpha](const Eigen::VectorXd& v) { return Eigen::VectorXd(-alpha * v); };
                    auto diffusion = [noise](const Eigen::VectorXd& v) {
                        return Eigen::VectorXd(Eigen::VectorXd::Constant(v.size(), noise));
                    };
                    for (Eigen::Index k = 0; k < m; ++k) {
                        const Eigen::VectorXd x0 = pairs.x.row(k).transpose();
                        pairs.y.row(k) = em_propagate(drift, diffusion, x0, t, sys.em_dt, rng).transpose();
                    }
                }
            } else {
                if (pairs.x.cols() != 2) throw InputError("generate_pairs: Duffing system is two-dimensional");
                for (Eigen::Index k = 0; k < m; ++k) {
                    const Eigen::Vector2d z0 = pairs.x.row(k).transpose();
                    pairs.y.row(k) = duffing_flow(sys.params, z0, sys.control, t, sys.dt).transpose();
                }
            }
        },
        system);
    return pairs;
}

namespace detail {
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

/// Columnar text form: comment header with lag and seed, then x0..,y0.. columns.
inline void write_pairs_csv(const DataPairs& pairs, std::ostream& out) {
    out << "# lag=" << detail::format_double(pairs.lag) << "\n";
    out << "# seed=" << pairs.seed << "\n";
    out << "# stream=" << pairs.stream << "\n";
    const auto d = pairs.dimension();
    for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << "x" << i;
    for (Eigen::Index i = 0; i < d; ++i) out << ",y" << i;
    out << "\n";
    for (Eigen::Index k = 0; k < pairs.size(); ++k) {
        for (Eigen::Index i = 0; i < d; ++i) out << (i ? "," : "") << detail::format_double(pairs.x(k, i));
        for (Eigen::Index i = 0; i < d; ++i) out << "," << detail::format_double(pairs.y(k, i));
        out << "\n";
    }
}

inline DataPairs read_pairs_csv(std::istream& in) {
    DataPairs pairs;
    std::string line;
    std::vector<std::vector<double>> rows;
    Eigen::Index columns = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(2, eq - 2);
            const std::string value = line.substr(eq + 1);
            if (key == "lag") pairs.lag = std::stod(value);
            else if (key == "seed") pairs.seed = std::stoull(value);
            else if (key == "stream") pairs.stream = std::stoull(value);
            continue;
        }
        if (columns < 0) {
            columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
            if (columns % 2 != 0) throw IoError("pairs CSV: odd number of columns");
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<Eigen::Index>(row.size()) != columns) throw IoError("pairs CSV: ragged row");
        rows.push_back(std::move(row));
    }
    if (columns < 0 || rows.empty()) throw IoError("pairs CSV: no data");
    const Eigen::Index d = columns / 2;
    const auto m = static_cast<Eigen::Index>(rows.size());
    pairs.x.resize(m, d);
    pairs.y.resize(m, d);
    for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index i = 0; i < d; ++i) {
            pairs.x(k, i) = rows[k][i];
            pairs.y(k, i) = rows[k][d + i];
        }
    return pairs;
}

}  // namespace koopcert
