#include "feeder_nilm/devices.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace feeder_nilm {

namespace {

// Longest common period (in samples) worth tabulating.
constexpr std::uint64_t kMaxTablePeriod = 1u << 20;

DeviceMode off_mode() {
    return DeviceMode{std::string(DeviceMode::kOff), {}, 0.0};
}

DeviceMode make_mode(std::string name, double noise, std::vector<HarmonicSpec> harmonics) {
    return DeviceMode{std::move(name), std::move(harmonics), noise};
}

void validate_mode(const std::string& cls, const DeviceMode& m) {
    const std::string where = "device '" + cls + "' mode '" + m.name + "'";
    if (m.name.empty()) {
        throw InvalidInput("device '" + cls + "' has a mode without a name");
    }
    if (!(m.noise_rms_amps >= 0.0) || !std::isfinite(m.noise_rms_amps)) {
        throw InvalidInput(where + ": noise must be finite and non-negative");
    }
    std::set<int> orders;
    bool any_positive = false;
    for (const auto& h : m.harmonics) {
        if (h.order < 1) {
            throw InvalidInput(where + ": harmonic order must be positive");
        }
        if (!orders.insert(h.order).second) {
            throw InvalidInput(where + ": harmonic " + std::to_string(h.order) + " listed twice");
        }
        if (!std::isfinite(h.magnitude_rms_amps) || h.magnitude_rms_amps < 0.0 || !std::isfinite(h.phase_rad)) {
            throw InvalidInput(where + ": harmonic " + std::to_string(h.order) + " must be finite and non-negative");
        }
        if (!(h.phase_rad > -std::numbers::pi && h.phase_rad <= std::numbers::pi)) {
            throw InvalidInput(where + ": harmonic " + std::to_string(h.order) + " phase must lie in (-pi, pi]");
        }
        any_positive = any_positive || h.magnitude_rms_amps > 0.0;
    }
    if (m.is_off()) {
        if (!m.harmonics.empty() || m.noise_rms_amps != 0.0) {
            throw InvalidInput(where + ": the off mode carries no current");
        }
    } else if (!any_positive) {
        throw InvalidInput(where + ": needs at least one harmonic with positive magnitude");
    }
}

std::uint64_t common_period(double f0_hz, double sample_rate_hz) {
    const double cycles_per_sample = f0_hz / sample_rate_hz;
    for (std::uint64_t p = 1; p <= kMaxTablePeriod; ++p) {
        const double cycles = cycles_per_sample * static_cast<double>(p);
        if (std::abs(cycles - std::round(cycles)) < 1e-9) {
            return p;
        }
    }
    return 0;
}

}  // namespace

int DeviceMode::max_order() const {
    int out = 0;
    for (const auto& h : harmonics) {
        out = std::max(out, h.order);
    }
    return out;
}

DeviceModel::DeviceModel(std::string class_name, bool is_medical, std::vector<DeviceMode> modes)
    : class_name_(std::move(class_name)), is_medical_(is_medical), modes_(std::move(modes)) {
    if (class_name_.empty() || class_name_.find_first_of(" \t.") != std::string::npos) {
        throw InvalidInput("device class name '" + class_name_ + "' must be a non-empty word without dots");
    }
    std::set<std::string> names;
    int off_count = 0;
    for (const auto& m : modes_) {
        validate_mode(class_name_, m);
        if (!names.insert(m.name).second) {
            throw InvalidInput("device '" + class_name_ + "' has duplicate mode '" + m.name + "'");
        }
        off_count += m.is_off() ? 1 : 0;
    }
    if (off_count != 1) {
        throw InvalidInput("device '" + class_name_ + "' must define exactly one 'off' mode");
    }
    if (modes_.size() < 2) {
        throw InvalidInput("device '" + class_name_ + "' has no active modes");
    }
}

const DeviceMode& DeviceModel::mode(std::string_view name) const {
    return modes_[mode_index(name)];
}

std::size_t DeviceModel::mode_index(std::string_view name) const {
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        if (modes_[k].name == name) {
            return k;
        }
    }
    throw NotFound("device '" + class_name_ + "' has no mode '" + std::string(name) + "'");
}

std::vector<std::string> DeviceModel::active_modes() const {
    std::vector<std::string> out;
    for (const auto& m : modes_) {
        if (!m.is_off()) {
            out.push_back(m.name);
        }
    }
    return out;
}

DeviceLibrary::DeviceLibrary(std::vector<DeviceModel> models) : models_(std::move(models)) {
    std::set<std::string> names;
    for (const auto& m : models_) {
        if (!names.insert(m.class_name()).second) {
            throw InvalidInput("device class '" + m.class_name() + "' defined twice");
        }
    }
}

// Synthetic signatures, not measurements. Magnitudes are RMS amperes, phases
// are radians relative to the voltage fundamental (negative = lagging).
DeviceLibrary DeviceLibrary::defaults() {
    std::vector<DeviceModel> models;
    models.emplace_back("ventilator", true,
                        std::vector<DeviceMode>{
                            off_mode(),
                            make_mode("standby", 0.002, {{1, 0.10, -0.35}}),
                            make_mode("run", 0.005, {{1, 0.55, -0.52}, {3, 0.18, 2.40}, {5, 0.09, -1.10}}),
                            // run plus a resistive 0.80 A humidifier heater folded into the fundamental
                            make_mode("humidifier-run", 0.005,
                                      {{1, 1.3062085890531927, -0.21077654539823043},
                                       {3, 0.18, 2.40},
                                       {5, 0.09, -1.10}}),
                        });
    models.emplace_back("heater", false,
                        std::vector<DeviceMode>{
                            off_mode(),
                            make_mode("low", 0.010, {{1, 5.0, 0.0}}),
                            make_mode("high", 0.010, {{1, 10.0, 0.0}}),
                        });
    models.emplace_back("motor", false,
                        std::vector<DeviceMode>{
                            off_mode(),
                            make_mode("light", 0.020, {{1, 3.0, -0.95}, {3, 0.05, 0.30}, {5, 0.03, -2.0}}),
                            make_mode("loaded", 0.020, {{1, 5.0, -0.60}, {3, 0.08, 0.30}, {5, 0.04, -2.0}}),
                        });
    models.emplace_back("electronics", false,
                        std::vector<DeviceMode>{
                            off_mode(),
                            make_mode("idle", 0.010,
                                      {{1, 0.40, 0.15}, {3, 0.30, -2.95}, {5, 0.20, -0.25}, {7, 0.10, 2.85}}),
                            make_mode("active", 0.010,
                                      {{1, 1.20, 0.10}, {3, 0.85, -2.95}, {5, 0.55, -0.25}, {7, 0.30, 2.85}}),
                        });
    models.emplace_back("lighting", false,
                        std::vector<DeviceMode>{
                            off_mode(),
                            // phase-cut dimmer, asymmetric firing gives even harmonics
                            make_mode("dimmed", 0.005,
                                      {{1, 0.50, -0.30},
                                       {2, 0.06, 1.10},
                                       {3, 0.22, 2.10},
                                       {4, 0.03, -0.70},
                                       {5, 0.12, -1.40},
                                       {6, 0.015, 2.60},
                                       {7, 0.07, 0.90}}),
                            make_mode("full", 0.005, {{1, 0.90, -0.05}, {3, 0.04, 1.0}}),
                        });
    models.emplace_back("fridge", false,
                        std::vector<DeviceMode>{
                            off_mode(),
                            make_mode("compressor", 0.015, {{1, 1.50, -0.80}, {3, 0.10, 0.50}, {5, 0.03, 1.5}}),
                            make_mode("defrost", 0.010, {{1, 3.00, -0.05}}),
                        });
    return DeviceLibrary(std::move(models));
}

// Text form:
//
//   format_version = 1
//   [device <class>]          medical = true|false
//   [mode <class> <mode>]     noise_rms_amps = <real>, h<k> = <rms magnitude> <phase rad>
//
// Mode sections follow the order in which they appear; a class with no explicit
// off mode gets one prepended.
DeviceLibrary DeviceLibrary::parse(std::string_view text, const std::string& source_name) {
    const auto doc = KeyValueDocument::parse(text, source_name);

    const auto& top = doc.sections().front();
    const auto* version = top.find("format_version");
    if (version == nullptr) {
        throw ConfigError(source_name + ": missing format_version");
    }
    const auto v = parse_integer(version->value, doc.where(version->line));
    if (v != kFormatVersion) {
        throw ConfigError(doc.where(version->line) + ": unsupported device library format_version " +
                          std::to_string(v));
    }
    for (const auto& e : top.entries) {
        if (e.key != "format_version") {
            throw ConfigError(doc.where(e.line) + ": unexpected key '" + e.key + "' before first section");
        }
    }

    struct Pending {
        std::string name;
        bool medical = false;
        std::vector<DeviceMode> modes;
    };
    std::vector<Pending> pending;
    auto find_pending = [&](const std::string& cls) -> Pending* {
        for (auto& p : pending) {
            if (p.name == cls) {
                return &p;
            }
        }
        return nullptr;
    };

    for (std::size_t s = 1; s < doc.sections().size(); ++s) {
        const auto& sec = doc.sections()[s];
        const auto words = split_words(sec.name);
        const auto here = doc.where(sec.line);
        if (words.size() == 2 && words[0] == "device") {
            if (find_pending(words[1]) != nullptr) {
                throw ConfigError(here + ": device '" + words[1] + "' defined twice");
            }
            Pending p{words[1], false, {}};
            for (const auto& e : sec.entries) {
                if (e.key == "medical") {
                    p.medical = parse_boolean(e.value, doc.where(e.line));
                } else {
                    throw ConfigError(doc.where(e.line) + ": unknown device key '" + e.key + "'");
                }
            }
            pending.push_back(std::move(p));
        } else if (words.size() == 3 && words[0] == "mode") {
            auto* owner = find_pending(words[1]);
            if (owner == nullptr) {
                throw ConfigError(here + ": mode for undeclared device '" + words[1] + "'");
            }
            DeviceMode mode{words[2], {}, 0.0};
            for (const auto& e : sec.entries) {
                const auto ctx = doc.where(e.line);
                if (e.key == "noise_rms_amps") {
                    mode.noise_rms_amps = parse_real(e.value, ctx);
                } else if (e.key.size() > 1 && e.key[0] == 'h') {
                    const auto order = parse_integer(std::string_view(e.key).substr(1), ctx);
                    const auto parts = split_words(e.value);
                    if (parts.size() != 2) {
                        throw ConfigError(ctx + ": harmonic needs '<magnitude_rms> <phase_rad>'");
                    }
                    mode.harmonics.push_back(
                        {static_cast<int>(order), parse_real(parts[0], ctx), parse_real(parts[1], ctx)});
                } else {
                    throw ConfigError(ctx + ": unknown mode key '" + e.key + "'");
                }
            }
            owner->modes.push_back(std::move(mode));
        } else {
            throw ConfigError(here + ": unknown section '" + sec.name + "'");
        }
    }

    std::vector<DeviceModel> models;
    for (auto& p : pending) {
        const bool has_off = std::any_of(p.modes.begin(), p.modes.end(), [](const DeviceMode& m) { return m.is_off(); });
        if (!has_off) {
            p.modes.insert(p.modes.begin(), off_mode());
        }
        try {
            models.emplace_back(p.name, p.medical, std::move(p.modes));
        } catch (const InvalidInput& e) {
            throw ConfigError(source_name + ": " + e.what());
        }
    }
    try {
        return DeviceLibrary(std::move(models));
    } catch (const InvalidInput& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
}

DeviceLibrary DeviceLibrary::load(const std::string& path) {
    const auto doc_text = [&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw ConfigError("cannot open device library '" + path + "'");
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }();
    return parse(doc_text, path);
}

std::string DeviceLibrary::to_text() const {
    std::ostringstream out;
    out << "format_version = " << kFormatVersion << "\n";
    for (const auto& m : models_) {
        out << "\n[device " << m.class_name() << "]\n";
        out << "medical = " << (m.is_medical() ? "true" : "false") << "\n";
        for (const auto& mode : m.modes()) {
            out << "\n[mode " << m.class_name() << " " << mode.name << "]\n";
            if (mode.is_off()) {
                continue;
            }
            out << "noise_rms_amps = " << format_real(mode.noise_rms_amps) << "\n";
            for (const auto& h : mode.harmonics) {
                out << "h" << h.order << " = " << format_real(h.magnitude_rms_amps) << " " << format_real(h.phase_rad)
                    << "\n";
            }
        }
    }
    return out.str();
}

const DeviceModel& DeviceLibrary::find(std::string_view class_name) const {
    for (const auto& m : models_) {
        if (m.class_name() == class_name) {
            return m;
        }
    }
    throw NotFound("unknown device class '" + std::string(class_name) + "'");
}

bool DeviceLibrary::contains(std::string_view class_name) const {
    return std::any_of(models_.begin(), models_.end(),
                       [&](const DeviceModel& m) { return m.class_name() == class_name; });
}

ModeSynthesizer::ModeSynthesizer(const DeviceMode& mode, double f0_hz, double sample_rate_hz,
                                 double phase_offset_rad) {
    for (const auto& h : mode.harmonics) {
        if (!(h.order * f0_hz < sample_rate_hz / 2.0)) {
            throw InvalidInput("harmonic " + std::to_string(h.order) + " of " + std::to_string(f0_hz) +
                               " Hz aliases at " + std::to_string(sample_rate_hz) + " Hz");
        }
        if (h.magnitude_rms_amps == 0.0) {
            continue;
        }
        terms_.push_back({std::numbers::sqrt2 * h.magnitude_rms_amps,
                          2.0 * std::numbers::pi * h.order * f0_hz / sample_rate_hz,
                          h.phase_rad + h.order * phase_offset_rad});
    }
    if (terms_.empty()) {
        return;
    }
    if (const auto period = common_period(f0_hz, sample_rate_hz); period > 0) {
        table_.resize(period);
        for (std::uint64_t m = 0; m < period; ++m) {
            table_[m] = evaluate(static_cast<double>(m));
        }
    }
}

double ModeSynthesizer::evaluate(double n) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        acc += t.amplitude * std::sin(t.omega * n + t.phase);
    }
    return acc;
}

double ModeSynthesizer::at(std::uint64_t sample_index) const {
    if (terms_.empty()) {
        return 0.0;
    }
    if (!table_.empty()) {
        return table_[sample_index % table_.size()];
    }
    return evaluate(static_cast<double>(sample_index));
}

std::uint64_t sample_count(double duration_s, double sample_rate_hz) {
    if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0) || !std::isfinite(duration_s * sample_rate_hz)) {
        throw InvalidInput("duration and sample rate must be positive");
    }
    return static_cast<std::uint64_t>(std::llround(duration_s * sample_rate_hz));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finalizer over a combination of both inputs
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

NoiseStream::NoiseStream(std::uint64_t seed) : engine_(seed), normal_(0.0, 1.0) {}

double NoiseStream::next() {
    return normal_(engine_);
}

Waveform synth_device_current(const DeviceModel& model, std::string_view mode_name, double duration_s,
                              double sample_rate_hz, double f0_hz, double phase_offset_rad, std::uint64_t rng_seed) {
    const auto& mode = model.mode(mode_name);
    const ModeSynthesizer synth(mode, f0_hz, sample_rate_hz, phase_offset_rad);
    const auto n = sample_count(duration_s, sample_rate_hz);
    std::vector<double> samples(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        samples[k] = synth.at(k);
    }
    if (mode.noise_rms_amps > 0.0) {
        NoiseStream noise(rng_seed);
        for (std::uint64_t k = 0; k < n; ++k) {
            samples[k] += mode.noise_rms_amps * noise.next();
        }
    }
    return Waveform(std::move(samples), sample_rate_hz, 0.0);
}

Waveform supply_voltage(double voltage_rms, double voltage_thd, double duration_s, double sample_rate_hz,
                        double f0_hz) {
    if (!(voltage_rms > 0.0) || !(voltage_thd >= 0.0)) {
        throw InvalidInput("supply voltage needs voltage_rms > 0 and voltage_thd >= 0");
    }
    DeviceMode supply{"supply", {{1, voltage_rms, 0.0}}, 0.0};
    if (voltage_thd > 0.0) {
        const double each = voltage_rms * voltage_thd / std::numbers::sqrt2;
        supply.harmonics.push_back({3, each, 0.0});
        supply.harmonics.push_back({5, each, 0.0});
    }
    const ModeSynthesizer synth(supply, f0_hz, sample_rate_hz, 0.0);
    const auto n = sample_count(duration_s, sample_rate_hz);
    std::vector<double> samples(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        samples[k] = synth.at(k);
    }
    return Waveform(std::move(samples), sample_rate_hz, 0.0);
}

std::vector<double> device_signature_features(const DeviceModel& model, std::string_view mode_name, double window_s,
                                              double sample_rate_hz, const FeatureSpec& spec, double voltage_rms) {
    const auto& mode = model.mode(mode_name);
    if (mode.is_off()) {
        throw InvalidInput("device '" + model.class_name() + "': the off mode has no signature");
    }
    // Noiseless copy of the mode.
    const DeviceModel quiet(model.class_name(), model.is_medical(),
                            {off_mode(), DeviceMode{mode.name, mode.harmonics, 0.0}});
    const auto current = synth_device_current(quiet, mode.name, window_s, sample_rate_hz, spec.f0_hz, 0.0, 0);
    const auto voltage = supply_voltage(voltage_rms, 0.0, window_s, sample_rate_hz, spec.f0_hz);
    const WindowFeaturizer featurizer(spec, current.size(), sample_rate_hz);
    return featurizer.compute(voltage.samples(), current.samples()).values;
}

ClassSignatures library_signatures(const DeviceLibrary& library, double window_s, double sample_rate_hz,
                                   const FeatureSpec& spec, double voltage_rms) {
    ClassSignatures out;
    for (const auto& model : library.models()) {
        auto& vectors = out[model.class_name()];
        for (const auto& mode : model.active_modes()) {
            vectors.push_back(device_signature_features(model, mode, window_s, sample_rate_hz, spec, voltage_rms));
        }
    }
    return out;
}

}  // namespace feeder_nilm
