#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "koopcert/experiments/run.hpp"

namespace kx = koopcert::experiments;

namespace {

int fail(const std::string& kind, const std::string& message) {
    std::cout << nlohmann::json{{"status", "error"}, {"kind", kind}, {"message", message}}.dump() << std::endl;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel EDMD experiments with probabilistic error certificates"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<std::int64_t> threads;
    std::string model_path;
    bool print_config = false;

    for (const auto& [id, name] : kx::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config_path, "INI file with [section] key = value overrides");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
        if (id == kx::ExperimentId::duffing_longhorizon)
            sub->add_option("--model", model_path, "model file written by duffing-train");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        kx::ExperimentConfig config;
        config.id = kx::parse_experiment(app.get_subcommands().front()->get_name());
        if (!config_path.empty()) kx::load_config_file(config, config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.output_dir = *out_dir;
        if (format) config.format = *format;
        if (threads) config.threads = *threads;
        if (!model_path.empty()) config.duffing.model_path = model_path;
        kx::validate(config);

        if (print_config) {
            std::cout << kx::canonical_dump(config);
            return 0;
        }
        const auto written = kx::run_experiment(config);
        nlohmann::json record{{"status", "ok"},
                              {"experiment", kx::to_string(config.id)},
                              {"config_hash", kx::config_hash(config)},
                              {"seed", config.seed},
                              {"outputs", nlohmann::json::array()}};
        for (const auto& p : written) record["outputs"].push_back(p.string());
        std::cout << record.dump() << std::endl;
        return 0;
    } catch (const koopcert::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
