#pragma once

// Scenario simulation: device populations, on/off/mode schedules, the
// aggregate single-phase feeder waveforms and 1 Hz ground-truth counts.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "feeder_nilm/devices.hpp"
#include "feeder_nilm/signal.hpp"

namespace feeder_nilm {

struct OnOffMeans {
    double mean_on_s = 300.0;
    double mean_off_s = 300.0;

    friend bool operator==(const OnOffMeans&, const OnOffMeans&) = default;
};

struct ScenarioConfig {
    double duration_s = 600.0;
    double sample_rate_hz = 10000.0;
    double f0_hz = 60.0;
    double voltage_rms = 120.0;
    double voltage_thd = 0.0;
    std::string medical_class = "ventilator";
    int n_medical_devices = 0;
    std::vector<std::pair<std::string, int>> background_population;
    std::map<std::string, OnOffMeans> schedule_params;  // classes without an entry use OnOffMeans{}
    double feeder_noise_rms_amps = 0.0;
    bool device_noise = true;  // per-mode wideband noise from the device library
    std::uint64_t rng_seed = 1;

    OnOffMeans means_for(const std::string& class_name) const;
    /// Throws InvalidInput on bad values or classes missing from the library.
    void validate(const DeviceLibrary& library) const;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct ScheduledInterval {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string mode;

    friend bool operator==(const ScheduledInterval&, const ScheduledInterval&) = default;
};

/// One device on the feeder; intervals list its non-off periods, it is off elsewhere.
struct DeviceInstance {
    std::string id;
    std::string class_name;
    bool is_medical = false;
    std::vector<ScheduledInterval> intervals;

    friend bool operator==(const DeviceInstance&, const DeviceInstance&) = default;
};

struct Schedule {
    double duration_s = 0.0;
    std::vector<DeviceInstance> devices;

    std::size_t medical_count() const;
    /// Throws InvalidInput when intervals overlap, leave [0, duration] or are empty.
    void validate() const;

    friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Instantaneous count of running medical devices at each whole second.
struct GroundTruthSeries {
    std::vector<double> timestamps_s;
    std::vector<int> count;
    int n_medical_devices = 0;

    friend bool operator==(const GroundTruthSeries&, const GroundTruthSeries&) = default;
};

struct FeederTrace {
    Waveform voltage;
    Waveform current;
};

/// Alternating-renewal schedule per device: exponential on/off durations,
/// stationary initial state, uniform choice among active modes per on-interval.
Schedule generate_schedule(const ScenarioConfig& config, const DeviceLibrary& library);

FeederTrace synthesize_feeder(const ScenarioConfig& config, const DeviceLibrary& library, const Schedule& schedule);

/// Seed used for a device instance's noise stream; shared with synth_device_current
/// so that a single always-on device reproduces the feeder current exactly.
std::uint64_t device_noise_seed(const ScenarioConfig& config, std::size_t device_index);

GroundTruthSeries ground_truth_counts(const Schedule& schedule);

/// y for each window [k * stride, k * stride + window): the maximum 1 Hz count inside it.
std::vector<int> window_targets(const GroundTruthSeries& truth, double window_s, double stride_s);

// Persistence.

enum class Channel { voltage, current };

inline constexpr std::size_t kWaveformHeaderBytes = 64;
inline constexpr std::uint32_t kWaveformFormatVersion = 1;

/// 64-byte little-endian header ("FNWV", version, rate, start, count, channel tag,
/// zero padding) followed by raw little-endian f64 samples.
void write_waveform(const std::string& path, const Waveform& waveform, Channel channel);
std::pair<Waveform, Channel> read_waveform(const std::string& path);

std::string schedule_to_text(const Schedule& schedule);
Schedule schedule_from_text(const std::string& text, const std::string& source_name);

std::string truth_to_text(const GroundTruthSeries& truth);
GroundTruthSeries truth_from_text(const std::string& text, const std::string& source_name);

}  // namespace feeder_nilm
