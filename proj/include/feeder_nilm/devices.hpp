#pragma once

// Steady-state harmonic signatures of appliance classes and per-device current
// synthesis.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "feeder_nilm/features.hpp"
#include "feeder_nilm/signal.hpp"

namespace feeder_nilm {

struct HarmonicSpec {
    int order = 1;
    double magnitude_rms_amps = 0.0;
    double phase_rad = 0.0;  // relative to the supply voltage fundamental

    friend bool operator==(const HarmonicSpec&, const HarmonicSpec&) = default;
};

struct DeviceMode {
    std::string name;
    std::vector<HarmonicSpec> harmonics;
    double noise_rms_amps = 0.0;

    bool is_off() const { return name == kOff; }
    int max_order() const;

    static constexpr std::string_view kOff = "off";

    friend bool operator==(const DeviceMode&, const DeviceMode&) = default;
};

class DeviceModel {
public:
    DeviceModel(std::string class_name, bool is_medical, std::vector<DeviceMode> modes);

    const std::string& class_name() const { return class_name_; }
    bool is_medical() const { return is_medical_; }
    const std::vector<DeviceMode>& modes() const { return modes_; }

    /// Throws NotFound for unknown modes.
    const DeviceMode& mode(std::string_view name) const;
    std::size_t mode_index(std::string_view name) const;
    /// Names of the modes other than "off", in declaration order.
    std::vector<std::string> active_modes() const;

    friend bool operator==(const DeviceModel&, const DeviceModel&) = default;

private:
    std::string class_name_;
    bool is_medical_;
    std::vector<DeviceMode> modes_;
};

/// Named collection of device classes; the text form is versioned.
class DeviceLibrary {
public:
    static constexpr int kFormatVersion = 1;

    DeviceLibrary() = default;
    explicit DeviceLibrary(std::vector<DeviceModel> models);

    /// Synthetic ventilator plus five background appliance classes.
    static DeviceLibrary defaults();
    static DeviceLibrary parse(std::string_view text, const std::string& source_name);
    static DeviceLibrary load(const std::string& path);

    std::string to_text() const;

    const std::vector<DeviceModel>& models() const { return models_; }
    const DeviceModel& find(std::string_view class_name) const;
    bool contains(std::string_view class_name) const;

    friend bool operator==(const DeviceLibrary&, const DeviceLibrary&) = default;

private:
    std::vector<DeviceModel> models_;
};

/// Deterministic part of a mode's current, evaluated sample by sample. When
/// f0 and the sample rate are commensurate the waveform is tabulated over
/// one common period, which also makes it exactly periodic.
class ModeSynthesizer {
public:
    ModeSynthesizer(const DeviceMode& mode, double f0_hz, double sample_rate_hz, double phase_offset_rad);

    double at(std::uint64_t sample_index) const;
    bool is_zero() const { return terms_.empty(); }

private:
    struct Term {
        double amplitude;  // peak
        double omega;      // rad per sample
        double phase;
    };
    double evaluate(double n) const;

    std::vector<Term> terms_;
    std::vector<double> table_;  // one common period, empty when incommensurate
};

/// Number of samples used for a duration at a rate (rounded to nearest).
std::uint64_t sample_count(double duration_s, double sample_rate_hz);

/// Derives an independent 64-bit seed for a numbered stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Gaussian white noise, one standard normal per sample, driven by a seeded engine.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// i(t) = sum_h sqrt(2) M_h sin(2 pi h f0 t + phi_h + h * phase_offset) + noise.
Waveform synth_device_current(const DeviceModel& model, std::string_view mode_name, double duration_s,
                              double sample_rate_hz, double f0_hz, double phase_offset_rad, std::uint64_t rng_seed);

/// Stiff supply voltage: sqrt(2) V sin(2 pi f0 t) with the requested THD split
/// equally between the 3rd and 5th harmonics (in phase with the fundamental).
Waveform supply_voltage(double voltage_rms, double voltage_thd, double duration_s, double sample_rate_hz,
                        double f0_hz);

/// Features of one noiseless window of a mode against a pure nominal voltage.
std::vector<double> device_signature_features(const DeviceModel& model, std::string_view mode_name, double window_s,
                                              double sample_rate_hz, const FeatureSpec& spec,
                                              double voltage_rms = 120.0);

/// One signature vector per active mode for every class in the library.
ClassSignatures library_signatures(const DeviceLibrary& library, double window_s, double sample_rate_hz,
                                   const FeatureSpec& spec, double voltage_rms = 120.0);

}  // namespace feeder_nilm
