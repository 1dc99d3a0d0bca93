#include "feeder_nilm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/io.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace fs = std::filesystem;

namespace feeder_nilm {

namespace {

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

template <typename F>
auto as_config_error(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

// Artifact parsers report malformed content as a contract violation naming the file.
template <typename F>
auto as_contract(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ContractViolation(e.what());
    }
}

// ---------------------------------------------------------------------------
// Config parsing

std::vector<std::size_t> parse_sizes(std::string_view text, const std::string& where) {
    std::vector<std::size_t> out;
    for (const auto& w : split_words(text)) {
        const auto v = parse_integer(w, where);
        if (v < 1) {
            throw ConfigError(where + ": layer sizes must be >= 1");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::uint64_t parse_seed(std::string_view text, const std::string& where) {
    const auto v = parse_integer(text, where);
    if (v < 0) {
        throw ConfigError(where + ": seeds must be non-negative");
    }
    return static_cast<std::uint64_t>(v);
}

std::size_t parse_count(std::string_view text, const std::string& where) {
    const auto v = parse_integer(text, where);
    if (v < 0) {
        throw ConfigError(where + ": expected a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------------------
// Canonical renderings feeding the fingerprints

std::string canonical_scenario(const RunConfig& c) {
    const auto& s = c.scenario;
    std::ostringstream out;
    out << "duration_s=" << format_real(s.duration_s) << "\nsample_rate_hz=" << format_real(s.sample_rate_hz)
        << "\nf0_hz=" << format_real(s.f0_hz) << "\nvoltage_rms=" << format_real(s.voltage_rms)
        << "\nvoltage_thd=" << format_real(s.voltage_thd) << "\nmedical_class=" << s.medical_class
        << "\nn_medical_devices=" << s.n_medical_devices << "\nfeeder_noise_rms_amps="
        << format_real(s.feeder_noise_rms_amps) << "\ndevice_noise=" << s.device_noise << "\nrng_seed=" << s.rng_seed
        << "\nbackground=";
    for (const auto& [cls, n] : s.background_population) {
        out << cls << ":" << n << " ";
    }
    out << "\n";
    for (const auto& [cls, m] : s.schedule_params) {
        out << "schedule." << cls << "=" << format_real(m.mean_on_s) << "," << format_real(m.mean_off_s) << "\n";
    }
    out << c.library.to_text();
    return out.str();
}

std::string chain(const std::string& upstream, const std::string& text) {
    return hex64(fnv1a64(text, fnv1a64(upstream)));
}

// ---------------------------------------------------------------------------
// Manifest: `<stage>.fingerprint` and `file.<name>` content hashes

class Manifest {
public:
    explicit Manifest(std::string dir) : dir_(std::move(dir)), path_(join(dir_, artifact::manifest)) {
        if (!fs::exists(path_)) {
            return;
        }
        std::istringstream in(read_file(path_));
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                entries_[line.substr(0, eq)] = line.substr(eq + 1);
            }
        }
    }

    void record(const std::string& stage, const std::string& fingerprint, const std::vector<std::string>& files) {
        entries_[stage + ".fingerprint"] = fingerprint;
        for (const auto& f : files) {
            entries_["file." + f] = hex64(fnv1a64(read_file(join(dir_, f))));
        }
        std::ostringstream out;
        for (const auto& [k, v] : entries_) {
            out << k << "=" << v << "\n";
        }
        write_file(path_, out.str());
    }

    bool current(const std::string& stage, const std::string& fingerprint, const std::vector<std::string>& files) const {
        const auto it = entries_.find(stage + ".fingerprint");
        if (it == entries_.end() || it->second != fingerprint) {
            return false;
        }
        for (const auto& f : files) {
            const auto path = join(dir_, f);
            const auto h = entries_.find("file." + f);
            if (h == entries_.end() || !fs::exists(path)) {
                return false;
            }
            // Same configuration but different bytes: never regenerate over it silently.
            if (hex64(fnv1a64(read_file(path))) != h->second) {
                throw ContractViolation("artifact '" + path + "' is corrupt or was modified after '" + stage + "'");
            }
        }
        return true;
    }

    /// Throws naming the offending file when an upstream artifact is missing,
    /// was produced under a different configuration or has been modified.
    void require(const std::string& stage, const std::string& fingerprint,
                 const std::vector<std::string>& files) const {
        for (const auto& f : files) {
            const auto path = join(dir_, f);
            if (!fs::exists(path)) {
                throw IoError("missing artifact '" + path + "'; run '" + stage + "' first");
            }
        }
        const auto it = entries_.find(stage + ".fingerprint");
        if (it == entries_.end()) {
            throw ContractViolation("artifact '" + join(dir_, files.front()) + "' is not recorded in '" + path_ +
                                    "'; run '" + stage + "' first");
        }
        if (it->second != fingerprint) {
            throw ContractViolation("artifact '" + join(dir_, files.front()) + "' was produced with fingerprint " +
                                    it->second + " but this configuration expects " + fingerprint + "; rerun '" +
                                    stage + "'");
        }
        for (const auto& f : files) {
            const auto path = join(dir_, f);
            const auto h = entries_.find("file." + f);
            if (h == entries_.end() || hex64(fnv1a64(read_file(path))) != h->second) {
                throw ContractViolation("artifact '" + path + "' is corrupt or was modified after '" + stage + "'");
            }
        }
    }

private:
    std::string dir_;
    std::string path_;
    std::map<std::string, std::string> entries_;
};

const std::vector<std::string> kSimulateFiles{artifact::voltage, artifact::current, artifact::schedule, artifact::truth,
                                              artifact::devices};
const std::vector<std::string> kFeaturizeFiles{artifact::dataset};
const std::vector<std::string> kSelectFiles{artifact::ranking};
const std::vector<std::string> kTrainFiles{artifact::model, artifact::history};
const std::vector<std::string> kEvalFiles{artifact::report, artifact::baseline, artifact::residuals};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    }
}

std::string file_size(const std::string& path) {
    return std::to_string(fs::file_size(path)) + " bytes";
}

struct Splits {
    FeatureDataset train;
    FeatureDataset validation;
    FeatureDataset test;
};

Splits split_dataset(const FeatureDataset& ds, const SplitFractions& fractions) {
    const auto b = chronological_split(ds.size(), fractions);
    return {ds.slice(0, b.train_end), ds.slice(b.train_end, b.val_end), ds.slice(b.val_end, b.total)};
}

std::vector<double> as_real(const std::vector<int>& ys) {
    return {ys.begin(), ys.end()};
}

FeatureDataset load_dataset(const std::string& out_dir) {
    const auto path = join(out_dir, artifact::dataset);
    return as_contract([&] { return dataset_from_csv(read_file(path), path); });
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig RunConfig::parse(const std::string& text, const std::string& source_name, const std::string& base_dir) {
    const auto doc = KeyValueDocument::parse(text, source_name);
    RunConfig c;
    bool stride_given = false;
    std::vector<std::string> feature_names;

    for (const auto& sec : doc.sections()) {
        for (const auto& e : sec.entries) {
            const auto where = doc.where(e.line);
            const auto& k = e.key;
            const auto& v = e.value;
            auto unknown = [&] { return ConfigError(where + ": unknown key '" + k + "' in [" + sec.name + "]"); };
            if (sec.name == "scenario") {
                auto& s = c.scenario;
                if (k == "duration_s") s.duration_s = parse_real(v, where);
                else if (k == "sample_rate_hz") s.sample_rate_hz = parse_real(v, where);
                else if (k == "f0_hz") s.f0_hz = parse_real(v, where);
                else if (k == "voltage_rms") s.voltage_rms = parse_real(v, where);
                else if (k == "voltage_thd") s.voltage_thd = parse_real(v, where);
                else if (k == "medical_class") s.medical_class = v;
                else if (k == "n_medical_devices") s.n_medical_devices = static_cast<int>(parse_count(v, where));
                else if (k == "feeder_noise_rms_amps") s.feeder_noise_rms_amps = parse_real(v, where);
                else if (k == "device_noise") s.device_noise = parse_boolean(v, where);
                else if (k == "rng_seed") s.rng_seed = parse_seed(v, where);
                else if (k == "device_library") c.device_library_path = v;
                else if (k == "background") {
                    for (const auto& item : split_words(v)) {
                        const auto colon = item.find(':');
                        if (colon == std::string::npos) {
                            throw ConfigError(where + ": background entries are 'class:count'");
                        }
                        s.background_population.emplace_back(
                            item.substr(0, colon), static_cast<int>(parse_count(item.substr(colon + 1), where)));
                    }
                } else throw unknown();
            } else if (sec.name == "schedule") {
                const auto dot = k.rfind('.');
                if (dot == std::string::npos) {
                    throw unknown();
                }
                const auto cls = k.substr(0, dot);
                const auto field = k.substr(dot + 1);
                auto& m = c.scenario.schedule_params[cls];
                if (field == "mean_on_s") m.mean_on_s = parse_real(v, where);
                else if (field == "mean_off_s") m.mean_off_s = parse_real(v, where);
                else throw unknown();
            } else if (sec.name == "featurize") {
                if (k == "window_s") c.window_s = parse_real(v, where);
                else if (k == "stride_s") {
                    c.stride_s = parse_real(v, where);
                    stride_given = true;
                } else if (k == "features") feature_names = split_words(v);
                else if (k == "max_harmonic") c.features.max_harmonic = static_cast<int>(parse_integer(v, where));
                else throw unknown();
            } else if (sec.name == "select") {
                if (k == "top_k") c.top_k = parse_count(v, where);
                else throw unknown();
            } else if (sec.name == "model") {
                auto& t = c.training;
                if (k == "hidden_layers") c.hidden_layers = parse_sizes(v, where);
                else if (k == "init_seed") c.init_seed = parse_seed(v, where);
                else if (k == "learning_rate") t.learning_rate = parse_real(v, where);
                else if (k == "batch_size") t.batch_size = parse_count(v, where);
                else if (k == "epochs") t.epochs = parse_count(v, where);
                else if (k == "l2_penalty") t.l2_penalty = parse_real(v, where);
                else if (k == "shuffle_seed") t.shuffle_seed = parse_seed(v, where);
                else if (k == "patience") t.patience = parse_count(v, where);
                else if (k == "optimizer") {
                    if (v == "adam") t.optimizer = Optimizer::adam;
                    else if (v == "sgd") t.optimizer = Optimizer::sgd;
                    else throw ConfigError(where + ": optimizer must be 'adam' or 'sgd'");
                } else throw unknown();
            } else if (sec.name == "split") {
                if (k == "train") c.split.train = parse_real(v, where);
                else if (k == "validation") c.split.validation = parse_real(v, where);
                else if (k == "test") c.split.test = parse_real(v, where);
                else if (k == "seed") c.split.seed = parse_seed(v, where);
                else throw unknown();
            } else if (sec.name == "output") {
                if (k == "dir") c.output_dir = v;
                else throw unknown();
            } else if (sec.name.empty()) {
                throw ConfigError(where + ": key '" + k + "' outside any section");
            } else {
                throw ConfigError(doc.where(sec.line) + ": unknown section [" + sec.name + "]");
            }
        }
    }

    if (!stride_given) {
        c.stride_s = c.window_s;
    }
    c.features.f0_hz = c.scenario.f0_hz;
    if (!feature_names.empty()) {
        c.features.features.clear();
        for (const auto& name : feature_names) {
            const auto id = parse_feature_id(name);
            if (!id) {
                throw ConfigError(source_name + ": unknown feature '" + name + "'");
            }
            c.features.features.push_back(*id);
        }
    }
    if (!c.device_library_path.empty()) {
        const auto path = fs::path(c.device_library_path).is_absolute()
                              ? fs::path(c.device_library_path)
                              : fs::path(base_dir) / c.device_library_path;
        c.device_library_path = path.lexically_normal().string();
        c.library = DeviceLibrary::load(c.device_library_path);
    }

    as_config_error(source_name, [&] {
        c.scenario.validate(c.library);
        c.features.validate();
        c.training.validate();
        return 0;
    });
    if (!(c.window_s >= 1.0) || !(c.stride_s > 0.0) || c.window_s > c.scenario.duration_s) {
        throw ConfigError(source_name + ": need 1 <= window_s <= duration_s and stride_s > 0");
    }
    const auto& f = c.split;
    if (!(f.train > 0.0) || !(f.validation > 0.0) || !(f.test > 0.0) ||
        std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
        throw ConfigError(source_name + ": split fractions must be positive and sum to 1");
    }
    if (c.top_k > c.features.size()) {
        throw ConfigError(source_name + ": top_k exceeds the number of features");
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    const auto dir = fs::path(path).parent_path();
    return parse(text, path, dir.empty() ? "." : dir.string());
}

SplitBounds chronological_split(std::size_t n_rows, const SplitFractions& fractions) {
    SplitBounds b;
    b.total = n_rows;
    b.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n_rows) * fractions.train));
    b.val_end = b.train_end + static_cast<std::size_t>(std::floor(static_cast<double>(n_rows) * fractions.validation));
    if (b.train_end == 0 || b.val_end == b.train_end || b.val_end >= n_rows) {
        throw InvalidInput("cannot split " + std::to_string(n_rows) + " windows into non-empty train/val/test parts");
    }
    return b;
}

std::string scenario_fingerprint(const RunConfig& config) {
    return hex64(fnv1a64(canonical_scenario(config)));
}

std::string featurize_fingerprint(const RunConfig& config) {
    std::ostringstream out;
    out << "window_s=" << format_real(config.window_s) << "\nstride_s=" << format_real(config.stride_s)
        << "\nmax_harmonic=" << config.features.max_harmonic << "\nfeatures=";
    for (const auto& n : config.features.names()) {
        out << n << " ";
    }
    return chain(scenario_fingerprint(config), out.str());
}

std::string selection_fingerprint(const RunConfig& config) {
    return chain(featurize_fingerprint(config), "top_k=" + std::to_string(config.top_k));
}

std::string model_fingerprint(const RunConfig& config) {
    const auto& t = config.training;
    std::ostringstream out;
    out << "hidden=";
    for (auto h : config.hidden_layers) {
        out << h << " ";
    }
    out << "\ninit_seed=" << config.init_seed << "\nlearning_rate=" << format_real(t.learning_rate)
        << "\nbatch_size=" << t.batch_size << "\nepochs=" << t.epochs << "\nl2=" << format_real(t.l2_penalty)
        << "\nshuffle_seed=" << t.shuffle_seed << "\npatience=" << t.patience
        << "\noptimizer=" << (t.optimizer == Optimizer::adam ? "adam" : "sgd")
        << "\nsplit=" << format_real(config.split.train) << "," << format_real(config.split.validation) << ","
        << format_real(config.split.test) << "," << config.split.seed;
    return chain(selection_fingerprint(config), out.str());
}

// ---------------------------------------------------------------------------
// Stages

StageResult run_simulate(const RunConfig& config, const std::string& out_dir) {
    ensure_dir(out_dir);
    StageResult result{"simulate", false, {}};
    const auto& sc = config.scenario;

    const auto schedule = generate_schedule(sc, config.library);
    const auto trace = synthesize_feeder(sc, config.library, schedule);
    const auto truth = ground_truth_counts(schedule);

    write_waveform(join(out_dir, artifact::voltage), trace.voltage, Channel::voltage);
    write_waveform(join(out_dir, artifact::current), trace.current, Channel::current);
    write_file(join(out_dir, artifact::schedule), schedule_to_text(schedule));
    write_file(join(out_dir, artifact::truth), truth_to_text(truth));
    write_file(join(out_dir, artifact::devices), config.library.to_text());
    Manifest(out_dir).record("simulate", scenario_fingerprint(config), kSimulateFiles);

    std::size_t intervals = 0;
    for (const auto& d : schedule.devices) {
        intervals += d.intervals.size();
    }
    const int peak = truth.count.empty() ? 0 : *std::max_element(truth.count.begin(), truth.count.end());
    result.summary.push_back("simulate: " + format_real(sc.duration_s) + " s at " + format_real(sc.sample_rate_hz) +
                             " Hz, " + std::to_string(schedule.medical_count()) + " medical + " +
                             std::to_string(schedule.devices.size() - schedule.medical_count()) +
                             " background devices, " + std::to_string(intervals) + " on-intervals, peak count " +
                             std::to_string(peak));
    for (const char* f : {artifact::voltage, artifact::current, artifact::schedule, artifact::truth}) {
        result.summary.push_back("  " + join(out_dir, f) + ": " + file_size(join(out_dir, f)));
    }
    return result;
}

StageResult run_featurize(const RunConfig& config, const std::string& out_dir) {
    const Manifest manifest(out_dir);
    manifest.require("simulate", scenario_fingerprint(config), kSimulateFiles);

    const auto [voltage, vch] = read_waveform(join(out_dir, artifact::voltage));
    const auto [current, cch] = read_waveform(join(out_dir, artifact::current));
    if (vch != Channel::voltage || cch != Channel::current) {
        throw ContractViolation("'" + join(out_dir, artifact::voltage) + "' / '" + join(out_dir, artifact::current) +
                                "' carry the wrong channel tags");
    }
    const auto truth_path = join(out_dir, artifact::truth);
    const auto truth = as_contract([&] { return truth_from_text(read_file(truth_path), truth_path); });

    const auto ds = featurize(voltage, current, truth, config.window_s, config.stride_s, config.features);
    write_file(join(out_dir, artifact::dataset), dataset_to_csv(ds));
    Manifest(out_dir).record("featurize", featurize_fingerprint(config), kFeaturizeFiles);

    const auto invalid = static_cast<std::size_t>(std::count(ds.valid.begin(), ds.valid.end(), false));
    return {"featurize",
            false,
            {"featurize: " + std::to_string(ds.size()) + " windows x " + std::to_string(ds.spec.size()) +
             " features (W = " + format_real(ds.window_s) + " s, stride " + format_real(ds.stride_s) + " s, " +
             std::to_string(invalid) + " with undefined features) -> " + join(out_dir, artifact::dataset)}};
}

StageResult run_select_features(const RunConfig& config, const std::string& out_dir) {
    const Manifest manifest(out_dir);
    manifest.require("featurize", featurize_fingerprint(config), kFeaturizeFiles);
    manifest.require("simulate", scenario_fingerprint(config), {artifact::devices});

    const auto lib_path = join(out_dir, artifact::devices);
    const auto library = as_contract([&] { return DeviceLibrary::parse(read_file(lib_path), lib_path); });
    const auto signatures =
        library_signatures(library, config.window_s, config.scenario.sample_rate_hz, config.features,
                           config.scenario.voltage_rms);
    const auto ranking = rank_features(config.features.names(), signatures);
    write_file(join(out_dir, artifact::ranking), ranking_to_text(ranking));
    Manifest(out_dir).record("select-features", selection_fingerprint(config), kSelectFiles);

    std::string top;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, ranking.size()); ++k) {
        top += (k ? ", " : "") + ranking[k].feature;
    }
    return {"select-features",
            false,
            {"select-features: ranked " + std::to_string(ranking.size()) + " features over " +
             std::to_string(signatures.size()) + " device classes (top: " + top + ")" +
             (config.top_k ? ", keeping " + std::to_string(config.top_k) : std::string()) + " -> " +
             join(out_dir, artifact::ranking)}};
}

StageResult run_train(const RunConfig& config, const std::string& out_dir) {
    const Manifest manifest(out_dir);
    manifest.require("featurize", featurize_fingerprint(config), kFeaturizeFiles);
    manifest.require("select-features", selection_fingerprint(config), kSelectFiles);

    const auto ds = load_dataset(out_dir);
    const auto rank_path = join(out_dir, artifact::ranking);
    const auto ranking = ranking_from_text(read_file(rank_path), rank_path);
    const auto features = selected_features(ds.spec, ranking, config.top_k);
    const auto chosen = ds.select(features);
    const auto parts = split_dataset(chosen, config.split);

    CountModel model;
    model.spec = chosen.spec;
    model.norm = fit_normalization(parts.train.x);
    model.shuffle_seed = config.training.shuffle_seed;
    model.fingerprint = model_fingerprint(config);
    if (model.norm.output_width() == 0) {
        throw InvalidInput("train: every selected feature is constant on the training split");
    }

    std::vector<std::size_t> sizes{model.norm.output_width()};
    sizes.insert(sizes.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    sizes.push_back(1);
    const auto initial = init_params(sizes, config.init_seed);

    const auto train_x = apply_normalization(parts.train.x, model.norm);
    const auto val_x = apply_normalization(parts.validation.x, model.norm);
    const auto result = train(initial, train_x, as_real(parts.train.y), val_x, as_real(parts.validation.y),
                              config.training);
    model.params = result.params;

    write_file(join(out_dir, artifact::model), model_to_text(model));
    std::ostringstream hist;
    hist << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
        hist << e << "," << format_real(result.history[e].train) << "," << format_real(result.history[e].validation)
             << "\n";
    }
    write_file(join(out_dir, artifact::history), hist.str());
    Manifest(out_dir).record("train", model.fingerprint, kTrainFiles);

    std::vector<std::string> summary{
        "train: " + std::to_string(parts.train.size()) + "/" + std::to_string(parts.validation.size()) + "/" +
        std::to_string(parts.test.size()) + " windows (train/val/test), " + std::to_string(sizes.front()) +
        " inputs, " + std::to_string(result.history.size()) + " epochs, best val loss " +
        format_real(result.history[result.best_epoch].validation) + " at epoch " + std::to_string(result.best_epoch) +
        " -> " + join(out_dir, artifact::model)};
    for (auto j : model.norm.dropped()) {
        summary.push_back("  warning: dropped constant feature '" + std::string(feature_name(model.spec.features[j])) +
                          "'");
    }
    return {"train", false, summary};
}

StageResult run_eval(const RunConfig& config, const std::string& out_dir) {
    const Manifest manifest(out_dir);
    manifest.require("featurize", featurize_fingerprint(config), kFeaturizeFiles);
    manifest.require("train", model_fingerprint(config), kTrainFiles);

    const auto ds = load_dataset(out_dir);
    const auto model_path = join(out_dir, artifact::model);
    const auto model = model_from_text(read_file(model_path), model_path);
    if (model.fingerprint != model_fingerprint(config)) {
        throw ContractViolation("'" + model_path + "' carries fingerprint " + model.fingerprint +
                                ", expected " + model_fingerprint(config));
    }
    const auto parts = split_dataset(ds, config.split);

    auto report = evaluate(model, parts.test);
    report.fingerprint = model.fingerprint;
    auto baseline = baseline_report(parts.train.y, parts.test.y);
    baseline.fingerprint = model.fingerprint;

    write_file(join(out_dir, artifact::report), report_to_text(report));
    write_file(join(out_dir, artifact::baseline), report_to_text(baseline));
    write_file(join(out_dir, artifact::residuals), residuals_to_csv(report));
    Manifest(out_dir).record("eval", model.fingerprint, kEvalFiles);

    return {"eval",
            false,
            {"eval: " + std::to_string(report.n_test_windows) + " test windows, MAE " +
             format_real(report.mae_rounded) + " rounded / " + format_real(report.mae_continuous) +
             " continuous, exact-count accuracy " + format_real(report.exact_count_accuracy) +
             "; median baseline MAE " + format_real(baseline.mae_rounded) + " -> " +
             join(out_dir, artifact::report)}};
}

std::vector<StageResult> run_pipeline(const RunConfig& config, const std::string& out_dir) {
    ensure_dir(out_dir);
    struct Step {
        const char* name;
        std::string fingerprint;
        const std::vector<std::string>* files;
        StageResult (*run)(const RunConfig&, const std::string&);
    };
    const std::vector<Step> steps{
        {"simulate", scenario_fingerprint(config), &kSimulateFiles, &run_simulate},
        {"featurize", featurize_fingerprint(config), &kFeaturizeFiles, &run_featurize},
        {"select-features", selection_fingerprint(config), &kSelectFiles, &run_select_features},
        {"train", model_fingerprint(config), &kTrainFiles, &run_train},
        {"eval", model_fingerprint(config), &kEvalFiles, &run_eval},
    };
    std::vector<StageResult> results;
    bool upstream_rebuilt = false;
    for (const auto& step : steps) {
        if (!upstream_rebuilt && Manifest(out_dir).current(step.name, step.fingerprint, *step.files)) {
            results.push_back({step.name, true, {std::string(step.name) + ": up to date"}});
            continue;
        }
        results.push_back(step.run(config, out_dir));
        upstream_rebuilt = true;
    }
    return results;
}

std::string ranking_to_text(const std::vector<FeatureScore>& ranking) {
    std::ostringstream out;
    out << "# feeder-nilm ranking v1\n# rank feature fisher_score\n";
    for (std::size_t k = 0; k < ranking.size(); ++k) {
        out << k + 1 << " " << ranking[k].feature << " "
            << (std::isinf(ranking[k].score) ? std::string("inf") : format_real(ranking[k].score)) << "\n";
    }
    return out.str();
}

std::vector<FeatureScore> ranking_from_text(const std::string& text, const std::string& source_name) {
    std::vector<FeatureScore> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = source_name + ":" + std::to_string(line_no);
        const auto words = split_words(line);
        if (words.empty() || words[0].front() == '#') {
            continue;
        }
        if (words.size() != 3) {
            throw ContractViolation(where + ": expected 'rank feature score'");
        }
        const double score = words[2] == "inf" ? std::numeric_limits<double>::infinity()
                                               : as_contract([&] { return parse_real(words[2], where); });
        out.push_back({words[1], score});
    }
    if (out.empty()) {
        throw ContractViolation(source_name + ": empty ranking");
    }
    return out;
}

std::vector<FeatureId> selected_features(const FeatureSpec& dataset_spec, const std::vector<FeatureScore>& ranking,
                                         std::size_t top_k) {
    if (top_k == 0) {
        return dataset_spec.features;
    }
    std::set<FeatureId> keep;
    for (const auto& r : ranking) {
        const auto id = parse_feature_id(r.feature);
        if (!id) {
            throw ContractViolation("ranking names unknown feature '" + r.feature + "'");
        }
        if (std::find(dataset_spec.features.begin(), dataset_spec.features.end(), *id) !=
            dataset_spec.features.end()) {
            keep.insert(*id);
        }
        if (keep.size() == top_k) {
            break;
        }
    }
    if (keep.size() < top_k) {
        throw ContractViolation("ranking covers only " + std::to_string(keep.size()) + " dataset features, top_k is " +
                                std::to_string(top_k));
    }
    std::vector<FeatureId> out;
    for (auto id : dataset_spec.features) {
        if (keep.count(id) != 0) {
            out.push_back(id);
        }
    }
    return out;
}

}  // namespace feeder_nilm
