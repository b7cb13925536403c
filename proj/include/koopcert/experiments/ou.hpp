#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "koopcert/certificates.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/experiments/common.hpp"
#include "koopcert/experiments/parallel.hpp"
#include "koopcert/kedmd.hpp"
#include "koopcert/kernel.hpp"
#include "koopcert/mercer.hpp"
#include "koopcert/ou_analytic.hpp"

namespace koopcert::experiments {

namespace detail {

inline OUSystem ou_system(const OUBoundConfig& c) {
    OUSystem sys;
    sys.params = OUParams{c.alpha, c.beta};
    sys.propagation = c.propagation == "exact" ? OUSystem::Propagation::exact : OUSystem::Propagation::euler_maruyama;
    sys.em_dt = c.dt;
    return sys;
}

inline TruncatedGaussianLaw ou_initial_law(const OUBoundConfig& c) {
    const OUParams p{c.alpha, c.beta};
    return {0.0, p.invariant_variance(), -c.domain_half_width, c.domain_half_width};
}

}  // namespace detail

/// Hoeffding bound versus the empirical (1 - delta)-percentile of the HS
/// estimation error of the cross-covariance operator, per bandwidth and m.
[[nodiscard]] inline ResultTable run_ou_bound(const ExperimentConfig& config) {
    validate(config);
    const auto& c = config.ou;
    const OUSystem system = detail::ou_system(c);
    const InitialLaw law = detail::ou_initial_law(c);
    const double variance = system.params.invariant_variance();
    const int order = static_cast<int>(c.mercer_order);
    const auto threads = static_cast<std::size_t>(config.threads);
    const std::size_t ns = c.bandwidths.size();

    std::vector<MercerExpansion> mercer;
    for (double s : c.bandwidths) mercer.push_back(mercer_gaussian(KernelSpec(s), 0.0, variance, order));

    // Reference matrix elements, averaged over independent large collections.
    const auto nref = static_cast<std::size_t>(c.ref_collections);
    std::vector<std::vector<MercerMoments>> ref_parts(ns, std::vector<MercerMoments>(nref));
    parallel_for(nref, threads, [&](std::size_t r) {
        const DataPairs pairs = generate_pairs(system, c.lag, c.m_ref, law, config.seed, stream_id(1, r));
        for (std::size_t s = 0; s < ns; ++s) ref_parts[s][r] = mercer_moments(pairs, mercer[s], order);
    });
    std::vector<MercerMoments> reference;
    for (std::size_t s = 0; s < ns; ++s) reference.push_back(average_moments(ref_parts[s]));

    const std::vector<std::int64_t> grid = log_grid(c.m_min, c.m_max, c.m_points);
    const auto trials = static_cast<std::size_t>(c.trials);
    // errors[s][g * trials + k]
    std::vector<std::vector<EstimationError>> errors(ns, std::vector<EstimationError>(grid.size() * trials));
    parallel_for(grid.size() * trials, threads, [&](std::size_t idx) {
        const std::size_t g = idx / trials;
        const std::size_t k = idx % trials;
        const DataPairs pairs = generate_pairs(system, c.lag, grid[g], law, config.seed, stream_id(2, g, k));
        for (std::size_t s = 0; s < ns; ++s)
            errors[s][idx] = estimation_error(pairs, reference[s], mercer[s], order);
    });

    ResultTable t = start_table("ou-bound", config,
                                {"sigma", "m", "epsilon", "percentile", "median_error", "max_error",
                                 "log10_ratio", "clamped", "reference_hs_norm", "mercer_tail"});
    for (std::size_t s = 0; s < ns; ++s) {
        const Eigen::VectorXd& lambda = mercer[s].eigenvalues();
        const double ref_norm = std::sqrt(hs_norm_mercer(reference[s], lambda, order).hs_norm_sq);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::vector<double> d;
            std::int64_t clamped = 0;
            for (std::size_t k = 0; k < trials; ++k) {
                const auto& e = errors[s][g * trials + k];
                d.push_back(e.distance);
                clamped += e.clamped ? 1 : 0;
            }
            const double eps = hoeffding_epsilon(grid[g], c.delta).epsilon;
            const double pct = error_percentile(d, 1.0 - c.delta);
            t.add_row({c.bandwidths[s], grid[g], eps, pct, median(d), *std::max_element(d.begin(), d.end()),
                       std::log10(eps / pct), clamped, ref_norm, mercer[s].tail_bound()});
        }
    }
    return t;
}

/// Sup-grid gap between the kEDMD prediction of K^t k_z and its closed form,
/// across sample sizes, seeds and rank modes.
[[nodiscard]] inline ResultTable run_ou_analytic(const ExperimentConfig& config) {
    validate(config);
    const auto& a = config.ou_analytic;
    OUBoundConfig base = config.ou;
    base.propagation = "exact";
    const OUSystem system = detail::ou_system(base);
    const InitialLaw law = detail::ou_initial_law(base);

    PointSet grid(a.grid_points, 1);
    for (std::int64_t i = 0; i < a.grid_points; ++i)
        grid(i, 0) = -a.grid_half_width + 2.0 * a.grid_half_width * static_cast<double>(i) /
                                              static_cast<double>(a.grid_points - 1);

    struct Cell {
        double sigma;
        std::int64_t m;
        std::int64_t seed;
        std::string mode;
        std::int64_t rank = 0;
        double gap = std::numeric_limits<double>::quiet_NaN();
        std::string status = "ok";
    };
    std::vector<Cell> cells;
    for (double s : a.bandwidths)
        for (double m : a.sizes)
            for (std::int64_t k = 0; k < a.seeds; ++k)
                for (const char* mode : {"cutoff", "full"})
                    cells.push_back({s, static_cast<std::int64_t>(m), k, mode});

    auto sup_gap = [&](const TruncatedEstimator& est, double sigma) {
        const KernelSpec spec(sigma);
        double gap = 0.0;
        for (double z : a.centers) {
            Eigen::VectorXd psi(est.samples());
            for (Eigen::Index j = 0; j < est.samples(); ++j) psi(j) = spec(est.pairs().y(j, 0), z);
            const Eigen::VectorXd pred = evaluate_prediction(est, predict_observable(est, psi), grid);
            const AnalyticKoopmanImage exact = ou_koopman_rbf(base.alpha, base.beta, a.lag, z, sigma);
            for (Eigen::Index i = 0; i < grid.rows(); ++i) gap = std::max(gap, std::abs(pred(i) - exact(grid(i, 0))));
        }
        return gap;
    };

    // One fit per (sigma, m, seed); both modes share the data and Gram matrices.
    const std::size_t groups = cells.size() / 2;
    parallel_for(groups, static_cast<std::size_t>(config.threads), [&](std::size_t gidx) {
        Cell& cut = cells[2 * gidx];
        Cell& full = cells[2 * gidx + 1];
        const DataPairs pairs = generate_pairs(system, a.lag, cut.m, law, config.seed, stream_id(3, gidx));
        const EmpiricalOperators ops = build_operators(pairs, KernelSpec(cut.sigma));
        TruncationOptions opt;
        opt.cutoff = a.cutoff;
        try {
            const TruncatedEstimator est = fit_truncated(ops, opt);
            cut.rank = est.rank();
            cut.gap = sup_gap(est, cut.sigma);
        } catch (const Error& e) {
            cut.status = e.kind();
        }
        if (full.m > a.full_rank_max) {
            full.status = "skipped";
            return;
        }
        try {
            const TruncatedEstimator est = fit_truncated(ops, static_cast<Eigen::Index>(full.m));
            full.rank = est.rank();
            full.gap = sup_gap(est, full.sigma);
        } catch (const Error& e) {
            full.status = e.kind();
        }
    });

    ResultTable t = start_table("ou-analytic", config, {"sigma", "m", "seed", "mode", "rank", "gap", "status"});
    for (const auto& cell : cells)
        t.add_row({cell.sigma, cell.m, cell.seed, cell.mode, cell.rank, cell.gap, cell.status});
    return t;
}

}  // namespace koopcert::experiments
