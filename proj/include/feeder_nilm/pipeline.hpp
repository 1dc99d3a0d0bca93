#pragma once

// Run configuration and the simulate -> featurize -> select-features -> train
// -> eval stages, each reading its predecessors' artifacts from one directory.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feeder_nilm/dataset.hpp"
#include "feeder_nilm/devices.hpp"
#include "feeder_nilm/eval.hpp"
#include "feeder_nilm/feeder.hpp"
#include "feeder_nilm/model.hpp"

namespace feeder_nilm {

struct SplitFractions {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
    std::uint64_t seed = 0;  // recorded only; the split is chronological
};

struct RunConfig {
    ScenarioConfig scenario;
    std::string device_library_path;  // empty: built-in defaults
    DeviceLibrary library = DeviceLibrary::defaults();

    double window_s = 5.0;
    double stride_s = 5.0;
    FeatureSpec features;
    std::size_t top_k = 0;  // 0 keeps every feature

    std::vector<std::size_t> hidden_layers{32, 16};
    std::uint64_t init_seed = 42;
    TrainConfig training;

    SplitFractions split;
    std::string output_dir;

    /// Parses the `[section]` / `key = value` format; throws ConfigError.
    static RunConfig parse(const std::string& text, const std::string& source_name,
                           const std::string& base_dir = ".");
    static RunConfig load(const std::string& path);
};

/// Chronological split of n rows: [0, train_end), [train_end, val_end), [val_end, n).
struct SplitBounds {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t total = 0;
};
SplitBounds chronological_split(std::size_t n_rows, const SplitFractions& fractions);

// Fingerprints chain each stage's configuration onto its predecessors'.
std::string scenario_fingerprint(const RunConfig& config);
std::string featurize_fingerprint(const RunConfig& config);
std::string selection_fingerprint(const RunConfig& config);
std::string model_fingerprint(const RunConfig& config);

/// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* voltage = "voltage.fnwv";
inline constexpr const char* current = "current.fnwv";
inline constexpr const char* schedule = "schedule.txt";
inline constexpr const char* truth = "truth.txt";
inline constexpr const char* devices = "devices.txt";
inline constexpr const char* dataset = "dataset.csv";
inline constexpr const char* ranking = "ranking.txt";
inline constexpr const char* model = "model.txt";
inline constexpr const char* history = "history.csv";
inline constexpr const char* report = "report.txt";
inline constexpr const char* baseline = "baseline.txt";
inline constexpr const char* residuals = "residuals.csv";
inline constexpr const char* manifest = "manifest.txt";
}  // namespace artifact

struct StageResult {
    std::string stage;
    bool skipped = false;  // artifacts were already current
    std::vector<std::string> summary;
};

StageResult run_simulate(const RunConfig& config, const std::string& out_dir);
StageResult run_featurize(const RunConfig& config, const std::string& out_dir);
StageResult run_select_features(const RunConfig& config, const std::string& out_dir);
StageResult run_train(const RunConfig& config, const std::string& out_dir);
StageResult run_eval(const RunConfig& config, const std::string& out_dir);
/// Runs every stage in order, skipping those whose artifacts are current.
std::vector<StageResult> run_pipeline(const RunConfig& config, const std::string& out_dir);

std::string ranking_to_text(const std::vector<FeatureScore>& ranking);
std::vector<FeatureScore> ranking_from_text(const std::string& text, const std::string& source_name);

/// Features the train stage uses: the top_k ranked dataset features, or all of them.
std::vector<FeatureId> selected_features(const FeatureSpec& dataset_spec, const std::vector<FeatureScore>& ranking,
                                         std::size_t top_k);

}  // namespace feeder_nilm
