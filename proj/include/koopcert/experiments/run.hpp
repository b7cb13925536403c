#pragma once

#include <filesystem>
#include <vector>

#include "koopcert/experiments/common.hpp"
#include "koopcert/experiments/counterexample.hpp"
#include "koopcert/experiments/duffing.hpp"
#include "koopcert/experiments/ou.hpp"

namespace koopcert::experiments {

/// Runs the configured experiment and writes its tables (and, for training,
/// the model file) under config.output_dir. Returns the paths written.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config) {
    validate(config);
    const std::filesystem::path dir = config.output_dir;
    std::vector<std::filesystem::path> written;
    switch (config.id) {
        case ExperimentId::ou_bound:
            written.push_back(emit(run_ou_bound(config), dir, config.format));
            break;
        case ExperimentId::ou_analytic:
            written.push_back(emit(run_ou_analytic(config), dir, config.format));
            break;
        case ExperimentId::duffing_train: {
            BilinearModel model;
            written.push_back(emit(run_duffing_train(config, &model), dir, config.format));
            const auto path = dir / "duffing-model.json";
            save_model(model, path);
            written.push_back(path);
            break;
        }
        case ExperimentId::duffing_validate:
            written.push_back(emit(run_duffing_validation(config), dir, config.format));
            break;
        case ExperimentId::duffing_longhorizon: {
            const LongHorizonResult r = run_duffing_longhorizon(config);
            written.push_back(emit(r.errors, dir, config.format));
            written.push_back(emit(r.samples, dir, config.format));
            break;
        }
        case ExperimentId::semigroup_counterexample:
            written.push_back(emit(run_semigroup_counterexample(config), dir, config.format));
            break;
    }
    return written;
}

}  // namespace koopcert::experiments
