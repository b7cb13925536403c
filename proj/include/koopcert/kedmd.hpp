#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "koopcert/dynamics.hpp"
#include "koopcert/error.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/linalg.hpp"
#include "koopcert/mercer.hpp"

namespace koopcert {

/// Gram representation of the empirical covariance and cross-covariance
/// operators: (1/m) Psi(X) and (1/m) Psi(Y)^T in the dictionary {Phi(x_k)}.
struct EmpiricalOperators {
    DataPairs pairs;
    KernelSpec spec;
    GramMatrix gram_xx;  ///< k(x_i, x_j)
    GramMatrix gram_xy;  ///< k(x_i, y_j)
    double scale = 1.0;  ///< 1 / m
};

[[nodiscard]] inline EmpiricalOperators build_operators(const DataPairs& pairs, const KernelSpec& spec) {
    if (pairs.size() < 1) throw InputError("build_operators: need at least one pair");
    if (pairs.x.rows() != pairs.y.rows()) throw InputError("build_operators: X and Y differ in length");
    EmpiricalOperators ops;
    ops.pairs = pairs;
    ops.spec = spec;
    ops.gram_xx = gram(spec, pairs.x);
    ops.gram_xy = gram(spec, pairs.x, pairs.y);
    ops.scale = 1.0 / static_cast<double>(pairs.size());
    return ops;
}

/// Rank selection for the truncated pseudo-inverse. With no fixed rank, every
/// Gram eigenvalue s_j >= cutoff * s_1 is kept.
struct TruncationOptions {
    std::optional<Eigen::Index> rank;
    double cutoff = 1e-10;
    double rank_tolerance = 1e-12;  ///< a fixed rank r requires s_r >= rank_tolerance * s_1
};

/// Rank-r kEDMD estimator [Psi(X)]_r^+ Psi(Y)^T kept in factored form
/// V_r diag(1/s) V_r^T Psi(Y)^T; immutable once fitted.
class TruncatedEstimator {
public:
    TruncatedEstimator(KernelSpec spec, DataPairs pairs, Eigen::VectorXd gram_eigenvalues,
                       Eigen::MatrixXd eigenvectors)
        : spec_(spec), pairs_(std::move(pairs)), s_(std::move(gram_eigenvalues)), v_(std::move(eigenvectors)) {
        if (s_.size() != v_.cols() || v_.rows() != pairs_.size())
            throw InputError("TruncatedEstimator: inconsistent factor shapes");
    }

    [[nodiscard]] Eigen::Index rank() const noexcept { return s_.size(); }
    [[nodiscard]] Eigen::Index samples() const noexcept { return pairs_.size(); }
    [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const DataPairs& pairs() const noexcept { return pairs_; }
    [[nodiscard]] double lag() const noexcept { return pairs_.lag; }

    /// Top-r eigenvalues s_j of Psi(X).
    [[nodiscard]] const Eigen::VectorXd& gram_eigenvalues() const noexcept { return s_; }
    /// Eigenvalues of the empirical covariance operator, s_j / m.
    [[nodiscard]] Eigen::VectorXd covariance_eigenvalues() const { return s_ / static_cast<double>(samples()); }
    /// Orthonormal eigenvectors of Psi(X), m x r.
    [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const noexcept { return v_; }

    /// [Psi(X)]_r^+ b
    [[nodiscard]] Eigen::VectorXd pseudo_inverse_apply(const Eigen::VectorXd& b) const {
        if (b.size() != samples()) throw InputError("pseudo_inverse_apply: length mismatch");
        const Eigen::VectorXd proj = v_.transpose() * b;
        return v_ * proj.cwiseQuotient(s_);
    }

    /// [Psi(X)]_r^+ applied to every column of b.
    [[nodiscard]] Eigen::MatrixXd pseudo_inverse_apply(const Eigen::MatrixXd& b) const {
        if (b.rows() != samples()) throw InputError("pseudo_inverse_apply: length mismatch");
        const Eigen::MatrixXd proj = s_.cwiseInverse().asDiagonal() * (v_.transpose() * b);
        return v_ * proj;
    }

    /// The m x m kEDMD matrix; column i holds the coefficients of the image of k(x_i, .).
    [[nodiscard]] Eigen::MatrixXd koopman_matrix() const {
        const GramMatrix psi_y = gram(spec_, pairs_.x, pairs_.y);
        return pseudo_inverse_apply(Eigen::MatrixXd(psi_y.entries.transpose()));
    }

private:
    KernelSpec spec_;
    DataPairs pairs_;
    Eigen::VectorXd s_;
    Eigen::MatrixXd v_;
};

namespace detail {

/// Lower bound on the top eigenvalue of a PSD matrix from a few power steps.
inline double top_eigenvalue_lower_bound(const Eigen::MatrixXd& g) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(g.rows()).normalized();
    double rq = 0.0;
    for (int it = 0; it < 4; ++it) {
        const Eigen::VectorXd w = g.selfadjointView<Eigen::Lower>() * v;
        rq = v.dot(w);
        const double n = w.norm();
        if (!(n > 0.0)) break;
        v = w / n;
    }
    return rq;
}

}  // namespace detail

[[nodiscard]] inline TruncatedEstimator fit_truncated(const EmpiricalOperators& ops,
                                                      const TruncationOptions& options = {}) {
    const Eigen::MatrixXd& g = ops.gram_xx.entries;
    const Eigen::Index m = g.rows();
    if (options.rank) {
        const Eigen::Index r = *options.rank;
        if (r < 1 || r > m) throw InputError("fit_truncated: rank must lie in [1, m]");
        SymmetricEigen eig = top_eigenpairs(g, r);
        const double s1 = eig.values(0);
        const double ratio = eig.values(r - 1) / s1;
        if (!(ratio >= options.rank_tolerance)) throw TruncationRankError(static_cast<std::size_t>(r), ratio);
        return TruncatedEstimator(ops.spec, ops.pairs, std::move(eig.values), std::move(eig.vectors));
    }
    const double lower = options.cutoff * detail::top_eigenvalue_lower_bound(g);
    SymmetricEigen eig = eigenpairs_above(g, 0.5 * lower);
    if (eig.values.size() == 0) throw NumericError("fit_truncated: Gram matrix has no positive spectrum");
    const double threshold = options.cutoff * eig.values(0);
    Eigen::Index r = 0;
    while (r < eig.values.size() && eig.values(r) >= threshold) ++r;
    return TruncatedEstimator(ops.spec, ops.pairs, eig.values.head(r), eig.vectors.leftCols(r));
}

[[nodiscard]] inline TruncatedEstimator fit_truncated(const EmpiricalOperators& ops, Eigen::Index rank) {
    TruncationOptions options;
    options.rank = rank;
    return fit_truncated(ops, options);
}

/// Coefficients c of the predicted observable x -> sum_j c_j k(x_j, x) for an
/// observable psi given by its values psi(y_k) on the successor samples.
[[nodiscard]] inline Eigen::VectorXd predict_observable(const TruncatedEstimator& est,
                                                        const Eigen::VectorXd& psi_at_y) {
    return est.pseudo_inverse_apply(psi_at_y);
}

/// Evaluates sum_j c_j k(x_j, q) at each query point.
[[nodiscard]] inline Eigen::VectorXd evaluate_prediction(const TruncatedEstimator& est,
                                                         const Eigen::VectorXd& coefficients,
                                                         const PointSet& queries) {
    if (coefficients.size() != est.samples()) throw InputError("evaluate_prediction: coefficient length mismatch");
    return gram(est.spec(), queries, est.pairs().x).entries * coefficients;
}

// ---------------------------------------------------------------------------
// Hilbert–Schmidt norms of the empirical cross-covariance operator
// ---------------------------------------------------------------------------

struct HSMetrics {
    enum class Method { gram_exact, mercer_truncated };
    double hs_norm_sq = 0.0;
    Method method = Method::gram_exact;
    int order = 0;  ///< Mercer truncation order, 0 for the Gram route
};

/// <C_a, C_b>_HS = (1 / (m_a m_b)) sum_{k,l} k(x_k, x'_l) k(y_k, y'_l).
[[nodiscard]] inline double hs_inner_gram(const DataPairs& a, const DataPairs& b, const KernelSpec& spec) {
    const Eigen::MatrixXd kx = gram(spec, a.x, b.x).entries;
    const Eigen::MatrixXd ky = gram(spec, a.y, b.y).entries;
    return kx.cwiseProduct(ky).sum() / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

[[nodiscard]] inline HSMetrics hs_norm_gram(const DataPairs& pairs, const KernelSpec& spec) {
    const Eigen::MatrixXd kx = gram(spec, pairs.x).entries;
    const Eigen::MatrixXd ky = gram(spec, pairs.y).entries;
    const double m = static_cast<double>(pairs.size());
    return {kx.cwiseProduct(ky).sum() / (m * m), HSMetrics::Method::gram_exact, 0};
}

[[nodiscard]] inline HSMetrics hs_norm_gram(const EmpiricalOperators& ops) { return hs_norm_gram(ops.pairs, ops.spec); }

/// Mercer matrix elements M_ij = (1/m) sum_l e_i(x_l) e_j(y_l), i, j < order.
struct MercerMoments {
    Eigen::MatrixXd elements;
    Eigen::Index samples = 0;

    [[nodiscard]] int order() const noexcept { return static_cast<int>(elements.rows()); }
};

[[nodiscard]] inline MercerMoments mercer_moments(const DataPairs& pairs, const MercerExpansion& mercer, int order) {
    if (order < 1 || order > mercer.order()) throw InputError("mercer_moments: order exceeds the expansion");
    if (pairs.dimension() != 1) throw InputError("mercer_moments: one-dimensional samples required");
    const Eigen::Index m = pairs.size();
    constexpr Eigen::Index chunk = 4096;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(order, order);
    for (Eigen::Index start = 0; start < m; start += chunk) {
        const Eigen::Index len = std::min(chunk, m - start);
        const Eigen::MatrixXd ex = mercer.evaluate(Eigen::VectorXd(pairs.x.col(0).segment(start, len)));
        const Eigen::MatrixXd ey = mercer.evaluate(Eigen::VectorXd(pairs.y.col(0).segment(start, len)));
        acc.noalias() += ex.leftCols(order).transpose() * ey.leftCols(order);
    }
    return {acc / static_cast<double>(m), m};
}

/// Element-wise mean of several collections' matrix elements.
[[nodiscard]] inline MercerMoments average_moments(const std::vector<MercerMoments>& collections) {
    if (collections.empty()) throw InputError("average_moments: no collections");
    MercerMoments out{Eigen::MatrixXd::Zero(collections[0].elements.rows(), collections[0].elements.cols()), 0};
    for (const auto& c : collections) {
        if (c.elements.rows() != out.elements.rows()) throw InputError("average_moments: order mismatch");
        out.elements += c.elements;
        out.samples += c.samples;
    }
    out.elements /= static_cast<double>(collections.size());
    return out;
}

namespace detail {
inline Eigen::MatrixXd eigen_weights(const Eigen::VectorXd& lambda, int order) {
    const Eigen::VectorXd l = lambda.head(order);
    return l * l.transpose();
}
}  // namespace detail

/// sum_{i,j < order} lambda_i lambda_j <M_a>_ij <M_b>_ij
[[nodiscard]] inline double hs_inner_mercer(const MercerMoments& a, const MercerMoments& b,
                                            const Eigen::VectorXd& lambda, int order) {
    if (order < 1 || order > a.order() || order > b.order() || order > lambda.size())
        throw InputError("hs_inner_mercer: order exceeds available terms");
    const Eigen::MatrixXd w = detail::eigen_weights(lambda, order);
    return w.cwiseProduct(a.elements.topLeftCorner(order, order))
        .cwiseProduct(b.elements.topLeftCorner(order, order))
        .sum();
}

[[nodiscard]] inline HSMetrics hs_norm_mercer(const MercerMoments& moments, const Eigen::VectorXd& lambda, int order) {
    return {hs_inner_mercer(moments, moments, lambda, order), HSMetrics::Method::mercer_truncated, order};
}

[[nodiscard]] inline HSMetrics hs_norm_mercer(const DataPairs& pairs, const MercerExpansion& mercer, int order) {
    return hs_norm_mercer(mercer_moments(pairs, mercer, order), mercer.eigenvalues(), order);
}

/// HS distance between a sample operator and a reference operator.
struct EstimationError {
    double distance = 0.0;  ///< sqrt of the (clamped) squared distance
    double squared = 0.0;   ///< raw ||ref||^2 - 2 <ref, C> + ||C||^2
    bool clamped = false;   ///< squared value was negative and set to zero
    bool flagged = false;   ///< negative beyond roundoff (below -1e-10)
};

[[nodiscard]] inline EstimationError estimation_error(const MercerMoments& sample, const MercerMoments& reference,
                                                      const Eigen::VectorXd& lambda, int order) {
    EstimationError e;
    e.squared = hs_inner_mercer(reference, reference, lambda, order) -
                2.0 * hs_inner_mercer(reference, sample, lambda, order) +
                hs_inner_mercer(sample, sample, lambda, order);
    if (e.squared < 0.0) {
        e.clamped = true;
        e.flagged = e.squared < -1e-10;
    }
    e.distance = std::sqrt(std::max(0.0, e.squared));
    return e;
}

[[nodiscard]] inline EstimationError estimation_error(const DataPairs& sample, const MercerMoments& reference,
                                                      const MercerExpansion& mercer, int order) {
    return estimation_error(mercer_moments(sample, mercer, order), reference, mercer.eigenvalues(), order);
}

/// Gram-route HS distance between two sample operators.
[[nodiscard]] inline EstimationError estimation_error(const DataPairs& sample, const DataPairs& reference,
                                                      const KernelSpec& spec) {
    EstimationError e;
    e.squared = hs_norm_gram(reference, spec).hs_norm_sq - 2.0 * hs_inner_gram(reference, sample, spec) +
                hs_norm_gram(sample, spec).hs_norm_sq;
    if (e.squared < 0.0) {
        e.clamped = true;
        e.flagged = e.squared < -1e-10;
    }
    e.distance = std::sqrt(std::max(0.0, e.squared));
    return e;
}

/// Nearest-rank empirical quantile at `level` (e.g. 0.9 for 1 - delta = 0.9).
[[nodiscard]] inline double error_percentile(std::vector<double> values, double level) {
    if (values.empty()) throw InputError("error_percentile: no values");
    if (!(level > 0.0 && level < 1.0)) throw InputError("error_percentile: level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    // Guard against 0.9 * 100 evaluating to 90.00000000000001.
    auto rank = static_cast<std::size_t>(std::ceil(level * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& a) {
    nlohmann::json j;
    j["rows"] = a.rows();
    j["cols"] = a.cols();
    j["data"] = std::vector<double>(a.data(), a.data() + a.size());  // column-major
    return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw IoError("matrix record: size mismatch");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}
}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const TruncatedEstimator& est) {
    nlohmann::json j;
    j["format"] = "koopcert.kedmd/1";
    j["bandwidth"] = est.spec().bandwidth();
    j["lag"] = est.lag();
    j["seed"] = est.pairs().seed;
    j["stream"] = est.pairs().stream;
    j["x"] = detail::matrix_to_json(est.pairs().x);
    j["y"] = detail::matrix_to_json(est.pairs().y);
    j["gram_eigenvalues"] = detail::matrix_to_json(est.gram_eigenvalues());
    j["eigenvectors"] = detail::matrix_to_json(est.eigenvectors());
    return j;
}

[[nodiscard]] inline TruncatedEstimator estimator_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != "koopcert.kedmd/1") throw IoError("not a kEDMD estimator record");
    DataPairs pairs;
    pairs.x = detail::matrix_from_json(j.at("x"));
    pairs.y = detail::matrix_from_json(j.at("y"));
    pairs.lag = j.at("lag").get<double>();
    pairs.seed = j.at("seed").get<std::uint64_t>();
    pairs.stream = j.at("stream").get<std::uint64_t>();
    const Eigen::VectorXd s = detail::matrix_from_json(j.at("gram_eigenvalues"));
    return TruncatedEstimator(KernelSpec(j.at("bandwidth").get<double>()), std::move(pairs), s,
                              detail::matrix_from_json(j.at("eigenvectors")));
}

}  // namespace koopcert
