#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "koopcert/control.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/experiments/common.hpp"
#include "koopcert/experiments/parallel.hpp"

namespace koopcert::experiments {

/// Training data shared by every (sigma, p, gamma) cell: one set of initial
/// states and its successors under each constant control.
struct DuffingData {
    PointSet x;
    std::vector<PointSet> y;  ///< per entry of DuffingConfig::controls
};

inline DuffingParams duffing_params(const DuffingConfig& c) { return {c.alpha, c.beta}; }

inline UniformBoxLaw duffing_box(const DuffingConfig& c) {
    return {Eigen::VectorXd::Constant(2, -c.domain_half_width), Eigen::VectorXd::Constant(2, c.domain_half_width)};
}

[[nodiscard]] inline DuffingData duffing_training_data(const ExperimentConfig& config) {
    const auto& c = config.duffing;
    DuffingData data;
    for (std::size_t i = 0; i < c.controls.size(); ++i) {
        const DuffingSystem sys{duffing_params(c), c.controls[i], c.dt};
        DataPairs pairs = generate_pairs(sys, c.lag, c.samples, duffing_box(c), config.seed, stream_id(4, 0));
        if (i == 0) data.x = pairs.x;
        data.y.push_back(std::move(pairs.y));
    }
    return data;
}

/// Products reused across regularisation strengths for one (sigma, p).
struct DuffingCellCache {
    RFFBasis basis;
    Eigen::MatrixXcd gram;                ///< M M^H
    std::vector<Eigen::MatrixXcd> cross;  ///< M (M_t^u)^H per control
    Eigen::MatrixXcd readout_rhs;         ///< M X (p x d)
};

[[nodiscard]] inline DuffingCellCache duffing_cache(const ExperimentConfig& config, const DuffingData& data,
                                                    double sigma, Eigen::Index p) {
    const auto& c = config.duffing;
    const auto convention = c.spectral_convention == "match-kernel" ? SpectralConvention::match_kernel
                                                                     : SpectralConvention::inverse_bandwidth;
    DuffingCellCache cache;
    cache.basis = draw_rff(sigma, p, 2, config.seed ^ koopcert::detail::splitmix64(static_cast<std::uint64_t>(p)), convention);
    const Eigen::MatrixXcd m = feature_matrix(cache.basis, data.x);
    cache.gram.setZero(p, p);
    cache.gram.selfadjointView<Eigen::Lower>().rankUpdate(m);
    cache.gram = cache.gram.selfadjointView<Eigen::Lower>();
    for (const auto& y : data.y) cache.cross.push_back(m * feature_matrix(cache.basis, y).adjoint());
    cache.readout_rhs = m * data.x.cast<cdouble>();
    return cache;
}

/// Bilinear model of one cell: K_0, K_{gamma_1} and the state readout.
[[nodiscard]] inline BilinearModel duffing_model(const ExperimentConfig& config, const DuffingCellCache& cache,
                                                 double gamma) {
    const auto& c = config.duffing;
    const auto llt = koopcert::detail::regularised_factor(cache.gram, gamma);
    auto koopman = [&](std::size_t i) {
        RFFKoopman k;
        k.matrix = llt.solve(cache.cross[i]);
        if (!k.matrix.allFinite()) throw NumericError("Koopman solve produced non-finite entries");
        k.gamma = gamma;
        k.samples = c.samples;
        k.lag = c.lag;
        k.control = c.controls[i];
        return k;
    };
    BilinearModel model;
    model.basis = cache.basis;
    model.drift = koopman(0);
    model.inputs.push_back({koopman(1), c.controls[1]});
    model.readout = llt.solve(cache.readout_rhs).adjoint();
    model.lag = c.lag;
    model.project_every = static_cast<int>(c.project_every);
    return model;
}

[[nodiscard]] inline BilinearModel train_duffing_model(const ExperimentConfig& config) {
    const auto& c = config.duffing;
    const DuffingData data = duffing_training_data(config);
    return duffing_model(config, duffing_cache(config, data, c.chosen_bandwidth, c.chosen_features), c.chosen_gamma);
}

inline void save_model(const BilinearModel& model, const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << to_json(model).dump() << "\n";
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

[[nodiscard]] inline BilinearModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path.string() + "'");
    try {
        return bilinear_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("model file '" + path.string() + "': " + e.what());
    } catch (const IoError& e) {
        throw IoError("model file '" + path.string() + "': " + e.what());
    }
}

/// Ground-truth trajectories sampled every lag under zero-order hold.
[[nodiscard]] inline std::vector<Trajectory> duffing_truth(const DuffingConfig& c, const PointSet& z0,
                                                           const ControlSignal& u, std::size_t periods,
                                                           std::size_t threads) {
    std::vector<Trajectory> out(static_cast<std::size_t>(z0.rows()));
    parallel_for(out.size(), threads, [&](std::size_t k) {
        out[k] = integrate_duffing_zoh(duffing_params(c), z0.row(static_cast<Eigen::Index>(k)).transpose(), u, c.lag,
                                       periods, c.dt);
    });
    return out;
}

/// Sum over trajectories and steps 1..n of |pred - true|^2 divided by the sum of |true|^2.
[[nodiscard]] inline double relative_mse(const std::vector<Trajectory>& truth, const std::vector<Trajectory>& pred) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        for (std::size_t s = 1; s < truth[k].size(); ++s) {
            num += (pred[k].states[s] - truth[k].states[s]).squaredNorm();
            den += truth[k].states[s].squaredNorm();
        }
    return num / den;
}

/// Training diagnostics of the chosen cell; also writes the model file.
[[nodiscard]] inline ResultTable run_duffing_train(const ExperimentConfig& config, BilinearModel* trained = nullptr) {
    validate(config);
    const auto& c = config.duffing;
    const DuffingData data = duffing_training_data(config);
    const DuffingCellCache cache = duffing_cache(config, data, c.chosen_bandwidth, c.chosen_features);
    const BilinearModel model = duffing_model(config, cache, c.chosen_gamma);

    const Eigen::MatrixXcd m = feature_matrix(model.basis, data.x);
    const Eigen::MatrixXd recon = (model.readout * m).real().transpose();
    const double readout_rel_mse = (recon - data.x).squaredNorm() / data.x.squaredNorm();

    ResultTable t = start_table("duffing-train", config,
                                {"sigma", "p", "gamma", "control", "one_step_residual", "readout_rel_mse",
                                 "outside_fraction"});
    for (std::size_t i = 0; i < c.controls.size(); ++i) {
        const RFFKoopman& k = i == 0 ? model.drift : model.inputs[0].koopman;
        const Eigen::MatrixXcd mt = feature_matrix(model.basis, data.y[i]);
        const Eigen::MatrixXcd res = k.matrix.adjoint() * m - mt;
        const double residual = res.colwise().norm().sum() /
                                (static_cast<double>(m.cols()) * std::sqrt(static_cast<double>(m.rows())));
        const auto outside = (data.y[i].array().abs() > c.domain_half_width).rowwise().any().count();
        t.add_row({c.chosen_bandwidth, c.chosen_features, c.chosen_gamma, c.controls[i], residual, readout_rel_mse,
                   static_cast<double>(outside) / static_cast<double>(c.samples)});
    }
    if (trained) *trained = model;
    return t;
}

/// Relative MSE of 20-step rollouts over the (sigma, p, gamma) sweep, per constant control.
[[nodiscard]] inline ResultTable run_duffing_validation(const ExperimentConfig& config) {
    validate(config);
    const auto& c = config.duffing;
    const auto threads = static_cast<std::size_t>(config.threads);
    const auto steps = static_cast<std::size_t>(c.validation_steps);
    const DuffingData data = duffing_training_data(config);

    RngStream rng(config.seed, stream_id(5, 0));
    const PointSet z0 = sample_initials(duffing_box(c), c.validation_trajectories, rng);
    std::vector<std::vector<Trajectory>> truth;
    for (double u : c.controls) truth.push_back(duffing_truth(c, z0, [u](double) { return u; }, steps, threads));

    ResultTable t = start_table("duffing-validate", config, {"sigma", "p", "gamma", "control", "rel_mse", "status"});
    for (double sigma : c.bandwidths) {
        for (double pf : c.features) {
            const auto p = static_cast<Eigen::Index>(pf);
            const DuffingCellCache cache = duffing_cache(config, data, sigma, p);
            struct Out {
                std::vector<double> err;
                std::vector<std::string> status;
            };
            std::vector<Out> outs(c.gammas.size());
            parallel_for(c.gammas.size(), threads, [&](std::size_t gi) {
                Out& o = outs[gi];
                o.err.assign(c.controls.size(), std::nan(""));
                o.status.assign(c.controls.size(), "ok");
                BilinearModel model;
                try {
                    model = duffing_model(config, cache, c.gammas[gi]);
                } catch (const Error& e) {
                    o.status.assign(c.controls.size(), e.kind());
                    return;
                }
                for (std::size_t i = 0; i < c.controls.size(); ++i) {
                    const double u = c.controls[i];
                    try {
                        const auto pred = predict_ensemble(model, z0, [u](double) { return u; }, steps);
                        o.err[i] = relative_mse(truth[i], pred);
                    } catch (const Error& e) {
                        o.status[i] = e.kind();
                    }
                }
            });
            for (std::size_t gi = 0; gi < c.gammas.size(); ++gi)
                for (std::size_t i = 0; i < c.controls.size(); ++i)
                    t.add_row({sigma, static_cast<std::int64_t>(p), c.gammas[gi], c.controls[i], outs[gi].err[i],
                               outs[gi].status[i]});
        }
    }
    return t;
}

struct LongHorizonResult {
    ResultTable errors;   ///< per scenario and step
    ResultTable samples;  ///< a few true and predicted trajectories
};

/// Bilinear rollouts over the long horizon for u = 0, u = 1 and u = cos(t).
/// rel_err is the mean over trajectories of |z_pred - z| / |z|; rel_mse pools squared errors.
[[nodiscard]] inline LongHorizonResult run_duffing_longhorizon(const ExperimentConfig& config,
                                                               const BilinearModel* model_in = nullptr) {
    validate(config);
    const auto& c = config.duffing;
    const auto threads = static_cast<std::size_t>(config.threads);
    const auto steps = static_cast<std::size_t>(c.long_steps);
    BilinearModel model;
    if (model_in) model = *model_in;
    else if (!c.model_path.empty()) model = load_model(c.model_path);
    else model = train_duffing_model(config);
    model.project_every = static_cast<int>(c.project_every);

    RngStream rng(config.seed, stream_id(5, 0));
    const PointSet z0 = sample_initials(duffing_box(c), c.long_trajectories, rng);

    struct Scenario {
        std::string name;
        ControlSignal u;
    };
    const std::vector<Scenario> scenarios{{"zero", [](double) { return 0.0; }},
                                          {"one", [](double) { return 1.0; }},
                                          {"cos", [](double t) { return std::cos(t); }}};

    LongHorizonResult result{
        start_table("duffing-longhorizon", config, {"scenario", "step", "time", "rel_err", "rel_mse", "status"}),
        start_table("duffing-longhorizon-samples", config,
                    {"scenario", "trajectory", "step", "time", "control", "true_z1", "true_z2", "pred_z1",
                     "pred_z2"})};
    for (const auto& sc : scenarios) {
        const auto truth = duffing_truth(c, z0, sc.u, steps, threads);
        std::vector<Trajectory> pred;
        std::string status = "ok";
        std::size_t completed = steps;
        try {
            pred = predict_ensemble(model, z0, sc.u, steps);
        } catch (const DivergenceError& e) {
            status = e.kind();
            completed = e.step() == 0 ? 0 : e.step() - 1;
        }
        for (std::size_t s = 1; s <= steps; ++s) {
            double err = std::nan(""), sq = std::nan("");
            if (s <= completed) {
                double rel = 0.0, num2 = 0.0, den2 = 0.0;
                for (std::size_t k = 0; k < truth.size(); ++k) {
                    const Eigen::VectorXd d = pred[k].states[s] - truth[k].states[s];
                    rel += d.norm() / truth[k].states[s].norm();
                    num2 += d.squaredNorm();
                    den2 += truth[k].states[s].squaredNorm();
                }
                err = rel / static_cast<double>(truth.size());
                sq = num2 / den2;
            }
            result.errors.add_row({sc.name, static_cast<std::int64_t>(s), static_cast<double>(s) * c.lag, err, sq,
                                   s <= completed ? std::string("ok") : status});
        }
        const auto shown = std::min<std::size_t>(static_cast<std::size_t>(c.sample_trajectories), truth.size());
        for (std::size_t k = 0; k < shown && completed == steps; ++k)
            for (std::size_t s = 0; s <= steps; ++s) {
                const double u = s < steps ? truth[k].controls[s] : sc.u(static_cast<double>(s) * c.lag);
                result.samples.add_row({sc.name, static_cast<std::int64_t>(k), static_cast<std::int64_t>(s),
                                        truth[k].times[s], u, truth[k].states[s](0), truth[k].states[s](1),
                                        pred[k].states[s](0), pred[k].states[s](1)});
            }
    }
    return result;
}

}  // namespace koopcert::experiments
