#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "feeder_nilm/error.hpp"
#include "feeder_nilm/pipeline.hpp"

using namespace feeder_nilm;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

std::string output_dir(const Options& opts, const RunConfig& config) {
    if (!opts.out.empty()) {
        return opts.out;
    }
    if (!config.output_dir.empty()) {
        return config.output_dir;
    }
    if (const char* env = std::getenv("FEEDER_NILM_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "out";
}

void print(const StageResult& r, bool quiet) {
    if (quiet) {
        return;
    }
    for (const auto& line : r.summary) {
        std::cout << line << "\n";
    }
}

int run(const std::string& command, const Options& opts) {
    auto config = RunConfig::load(opts.config);
    if (opts.seed) {
        config.scenario.rng_seed = *opts.seed;
    }
    const auto out = output_dir(opts, config);
    if (command == "pipeline") {
        for (const auto& r : run_pipeline(config, out)) {
            print(r, opts.quiet);
        }
        return 0;
    }
    if (command == "simulate") print(run_simulate(config, out), opts.quiet);
    else if (command == "featurize") print(run_featurize(config, out), opts.quiet);
    else if (command == "select-features") print(run_select_features(config, out), opts.quiet);
    else if (command == "train") print(run_train(config, out), opts.quiet);
    else if (command == "eval") print(run_eval(config, out), opts.quiet);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic feeder simulation and medical-device counting pipeline"};
    app.require_subcommand(1);
    Options opts;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Generate a scenario: waveforms, schedule and ground truth"},
        {"featurize", "Window the waveforms into a feature dataset"},
        {"select-features", "Rank features by Fisher score over device signatures"},
        {"train", "Train the count regressor on the chronological train split"},
        {"eval", "Evaluate on the test split against the median baseline"},
        {"pipeline", "Run every stage, skipping those already up to date"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opts.config, "Run configuration file")->required();
        sub->add_option("--out", opts.out, "Output directory (default: config, $FEEDER_NILM_OUT, ./out)");
        sub->add_option("--seed", opts.seed, "Override the scenario seed");
        sub->add_flag("--quiet", opts.quiet, "Suppress stage summaries");
    }

    CLI11_PARSE(app, argc, argv);
    const auto command = app.get_subcommands().front()->get_name();

    try {
        return run(command, opts);
    } catch (const ConfigError& e) {
        std::cerr << "feeder-nilm " << command << ": config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "feeder-nilm " << command << ": I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "feeder-nilm " << command << ": " << e.what() << "\n";
        return 4;
    }
}
