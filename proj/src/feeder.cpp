#include "feeder_nilm/feeder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <sstream>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/io.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace feeder_nilm {

namespace {

// Stream numbers for derive_seed; devices use base + instance index.
constexpr std::uint64_t kFeederNoiseStream = 1;
constexpr std::uint64_t kScheduleStreamBase = 1'000'000;
constexpr std::uint64_t kDeviceNoiseStreamBase = 2'000'000;

// Tolerance when mapping interval bounds onto the 1 Hz and window grids.
constexpr double kGridEps = 1e-9;

struct PendingInstance {
    std::string class_name;
    bool is_medical;
};

std::vector<PendingInstance> population(const ScenarioConfig& config, const DeviceLibrary& library) {
    std::vector<PendingInstance> out;
    for (int k = 0; k < config.n_medical_devices; ++k) {
        out.push_back({config.medical_class, true});
    }
    for (const auto& [cls, count] : config.background_population) {
        const bool medical = library.find(cls).is_medical();
        for (int k = 0; k < count; ++k) {
            out.push_back({cls, medical});
        }
    }
    return out;
}

// First sample index n with n / rate >= t.
std::uint64_t first_sample_at_or_after(double t, double rate, std::uint64_t n_samples) {
    if (t <= 0.0) {
        return 0;
    }
    const double x = std::ceil(t * rate - kGridEps);
    if (x >= static_cast<double>(n_samples)) {
        return n_samples;
    }
    return static_cast<std::uint64_t>(x);
}

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
    std::array<unsigned char, sizeof(T)> bits{};
    std::memcpy(bits.data(), in.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        out.push_back(line);
    }
    return out;
}

}  // namespace

OnOffMeans ScenarioConfig::means_for(const std::string& class_name) const {
    const auto it = schedule_params.find(class_name);
    return it == schedule_params.end() ? OnOffMeans{} : it->second;
}

void ScenarioConfig::validate(const DeviceLibrary& library) const {
    auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
    if (!positive(duration_s)) {
        throw InvalidInput("scenario duration_s must be positive");
    }
    if (!positive(sample_rate_hz) || !positive(f0_hz) || !(f0_hz < sample_rate_hz / 2.0)) {
        throw InvalidInput("scenario needs 0 < f0_hz < sample_rate_hz / 2");
    }
    if (!positive(voltage_rms) || !(voltage_thd >= 0.0) || !(feeder_noise_rms_amps >= 0.0)) {
        throw InvalidInput("scenario voltage_rms must be positive; voltage_thd and feeder noise non-negative");
    }
    if (n_medical_devices < 0) {
        throw InvalidInput("n_medical_devices must be non-negative");
    }
    if (n_medical_devices > 0) {
        if (!library.find(medical_class).is_medical()) {
            throw InvalidInput("class '" + medical_class + "' is not a medical device");
        }
    }
    for (const auto& [cls, count] : background_population) {
        if (count < 0) {
            throw InvalidInput("background count for '" + cls + "' is negative");
        }
        if (!library.contains(cls)) {
            throw InvalidInput("background class '" + cls + "' is not in the device library");
        }
    }
    for (const auto& [cls, means] : schedule_params) {
        if (!positive(means.mean_on_s) || !(means.mean_off_s >= 0.0) || !std::isfinite(means.mean_off_s)) {
            throw InvalidInput("schedule means for '" + cls + "' must be positive (mean_off_s may be 0)");
        }
    }
    const int voltage_order = voltage_thd > 0.0 ? 5 : 1;
    if (!(voltage_order * f0_hz < sample_rate_hz / 2.0)) {
        throw InvalidInput("voltage distortion harmonics alias at this sample rate");
    }
}

std::size_t Schedule::medical_count() const {
    return static_cast<std::size_t>(
        std::count_if(devices.begin(), devices.end(), [](const DeviceInstance& d) { return d.is_medical; }));
}

void Schedule::validate() const {
    if (!(duration_s > 0.0)) {
        throw InvalidInput("schedule duration must be positive");
    }
    std::set<std::string> ids;
    for (const auto& d : devices) {
        if (!ids.insert(d.id).second) {
            throw InvalidInput("schedule lists device '" + d.id + "' twice");
        }
        double last_end = 0.0;
        for (const auto& iv : d.intervals) {
            if (!(iv.start_s < iv.end_s) || iv.start_s < 0.0 || iv.end_s > duration_s || iv.start_s < last_end) {
                throw InvalidInput("device '" + d.id + "' has an invalid interval [" + format_real(iv.start_s) + ", " +
                                   format_real(iv.end_s) + ")");
            }
            if (iv.mode == DeviceMode::kOff) {
                throw InvalidInput("device '" + d.id + "' schedules the off mode explicitly");
            }
            last_end = iv.end_s;
        }
    }
}

Schedule generate_schedule(const ScenarioConfig& config, const DeviceLibrary& library) {
    config.validate(library);
    Schedule schedule;
    schedule.duration_s = config.duration_s;

    std::map<std::string, int> per_class_index;
    const auto instances = population(config, library);
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
        const auto& inst = instances[idx];
        const auto& model = library.find(inst.class_name);
        const auto modes = model.active_modes();
        const auto means = config.means_for(inst.class_name);

        DeviceInstance device;
        device.id = inst.class_name + "." + std::to_string(per_class_index[inst.class_name]++);
        device.class_name = inst.class_name;
        device.is_medical = inst.is_medical;

        std::mt19937_64 rng(derive_seed(config.rng_seed, kScheduleStreamBase + idx));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::exponential_distribution<double> on_duration(1.0 / means.mean_on_s);
        // mean_off_s = 0 keeps the device on for the whole trace
        const bool always_on = means.mean_off_s == 0.0;
        std::exponential_distribution<double> off_duration(always_on ? 1.0 : 1.0 / means.mean_off_s);
        std::uniform_int_distribution<std::size_t> pick_mode(0, modes.size() - 1);

        bool on = unit(rng) < means.mean_on_s / (means.mean_on_s + means.mean_off_s);
        double t = 0.0;
        while (t < config.duration_s) {
            if (on) {
                const double end = std::min(t + on_duration(rng), config.duration_s);
                const auto& mode = modes[pick_mode(rng)];
                if (end > t) {
                    device.intervals.push_back({t, end, mode});
                }
                t = end;
            } else if (!always_on) {
                t += off_duration(rng);
            }
            on = !on;
        }
        schedule.devices.push_back(std::move(device));
    }
    return schedule;
}

std::uint64_t device_noise_seed(const ScenarioConfig& config, std::size_t device_index) {
    return derive_seed(config.rng_seed, kDeviceNoiseStreamBase + device_index);
}

FeederTrace synthesize_feeder(const ScenarioConfig& config, const DeviceLibrary& library, const Schedule& schedule) {
    config.validate(library);
    schedule.validate();
    if (std::abs(schedule.duration_s - config.duration_s) > kGridEps * std::max(1.0, config.duration_s)) {
        throw InvalidInput("schedule duration does not match the scenario");
    }

    auto voltage = supply_voltage(config.voltage_rms, config.voltage_thd, config.duration_s, config.sample_rate_hz,
                                  config.f0_hz);
    const std::uint64_t n = voltage.size();
    std::vector<double> current(n, 0.0);

    for (std::size_t idx = 0; idx < schedule.devices.size(); ++idx) {
        const auto& device = schedule.devices[idx];
        const auto& model = library.find(device.class_name);

        std::vector<ModeSynthesizer> synths;
        synths.reserve(model.modes().size());
        bool noisy = false;
        for (const auto& mode : model.modes()) {
            synths.emplace_back(mode, config.f0_hz, config.sample_rate_hz, 0.0);
            noisy = noisy || (config.device_noise && mode.noise_rms_amps > 0.0);
        }

        // Mode index per interval, resolved once.
        std::vector<std::size_t> interval_mode;
        for (const auto& iv : device.intervals) {
            interval_mode.push_back(model.mode_index(iv.mode));
        }

        if (!noisy) {
            for (std::size_t k = 0; k < device.intervals.size(); ++k) {
                const auto& iv = device.intervals[k];
                const auto& synth = synths[interval_mode[k]];
                const auto lo = first_sample_at_or_after(iv.start_s, config.sample_rate_hz, n);
                const auto hi = first_sample_at_or_after(iv.end_s, config.sample_rate_hz, n);
                for (auto s = lo; s < hi; ++s) {
                    current[s] += synth.at(s);
                }
            }
            continue;
        }

        // The noise stream advances one draw per sample over the whole trace, so
        // sample s always sees the same draw whatever the schedule looks like.
        NoiseStream noise(device_noise_seed(config, idx));
        std::size_t k = 0;
        std::uint64_t lo = n;
        std::uint64_t hi = n;
        auto load_interval = [&] {
            if (k < device.intervals.size()) {
                lo = first_sample_at_or_after(device.intervals[k].start_s, config.sample_rate_hz, n);
                hi = first_sample_at_or_after(device.intervals[k].end_s, config.sample_rate_hz, n);
            } else {
                lo = hi = n;
            }
        };
        load_interval();
        for (std::uint64_t s = 0; s < n; ++s) {
            const double z = noise.next();
            while (s >= hi && k < device.intervals.size()) {
                ++k;
                load_interval();
            }
            if (s >= lo && s < hi) {
                const auto& mode = model.modes()[interval_mode[k]];
                current[s] += synths[interval_mode[k]].at(s) + mode.noise_rms_amps * z;
            }
        }
    }

    if (config.feeder_noise_rms_amps > 0.0) {
        NoiseStream noise(derive_seed(config.rng_seed, kFeederNoiseStream));
        for (auto& x : current) {
            x += config.feeder_noise_rms_amps * noise.next();
        }
    }

    return {std::move(voltage), Waveform(std::move(current), config.sample_rate_hz, 0.0)};
}

GroundTruthSeries ground_truth_counts(const Schedule& schedule) {
    GroundTruthSeries truth;
    truth.n_medical_devices = static_cast<int>(schedule.medical_count());
    const auto n_stamps = static_cast<std::size_t>(std::ceil(schedule.duration_s - kGridEps));
    truth.timestamps_s.resize(n_stamps);
    truth.count.assign(n_stamps, 0);
    for (std::size_t k = 0; k < n_stamps; ++k) {
        truth.timestamps_s[k] = static_cast<double>(k);
    }
    for (const auto& device : schedule.devices) {
        if (!device.is_medical) {
            continue;
        }
        for (const auto& iv : device.intervals) {
            // Whole seconds t with start <= t < end.
            const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil(iv.start_s)));
            const auto hi = std::min(n_stamps, static_cast<std::size_t>(std::max(0.0, std::ceil(iv.end_s))));
            for (auto t = lo; t < hi; ++t) {
                ++truth.count[t];
            }
        }
    }
    return truth;
}

std::vector<int> window_targets(const GroundTruthSeries& truth, double window_s, double stride_s) {
    if (!(window_s >= 1.0)) {
        throw InvalidInput("window_targets: window must be at least 1 s");
    }
    if (!(stride_s > 0.0)) {
        throw InvalidInput("window_targets: stride must be positive");
    }
    const double span_s = static_cast<double>(truth.count.size());
    if (window_s > span_s + kGridEps) {
        throw InvalidInput("window of " + format_real(window_s) + " s is longer than the " + format_real(span_s) +
                           " s ground-truth series");
    }
    const auto n_windows = static_cast<std::size_t>(std::floor((span_s - window_s) / stride_s + kGridEps)) + 1;
    std::vector<int> out;
    out.reserve(n_windows);
    for (std::size_t k = 0; k < n_windows; ++k) {
        const double begin = static_cast<double>(k) * stride_s;
        const auto lo = static_cast<std::size_t>(std::ceil(begin - kGridEps));
        const auto hi = std::min(truth.count.size(), static_cast<std::size_t>(std::ceil(begin + window_s - kGridEps)));
        int y = 0;
        for (auto t = lo; t < hi; ++t) {
            y = std::max(y, truth.count[t]);
        }
        out.push_back(y);
    }
    return out;
}

void write_waveform(const std::string& path, const Waveform& waveform, Channel channel) {
    std::string bytes;
    bytes.reserve(kWaveformHeaderBytes + waveform.size() * sizeof(double));
    bytes.append("FNWV", 4);
    put_le<std::uint32_t>(bytes, kWaveformFormatVersion);
    put_le<double>(bytes, waveform.sample_rate_hz());
    put_le<double>(bytes, waveform.start_time_s());
    put_le<std::uint64_t>(bytes, waveform.size());
    bytes.append(channel == Channel::voltage ? "VOLT" : "CURR", 4);
    bytes.append(kWaveformHeaderBytes - bytes.size(), '\0');
    for (double x : waveform.samples()) {
        put_le<double>(bytes, x);
    }
    write_file(path, bytes);
}

std::pair<Waveform, Channel> read_waveform(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() < kWaveformHeaderBytes || bytes.compare(0, 4, "FNWV") != 0) {
        throw ContractViolation("'" + path + "' is not a waveform file");
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kWaveformFormatVersion) {
        throw ContractViolation("'" + path + "' has unsupported waveform version " + std::to_string(version));
    }
    const auto rate = get_le<double>(bytes, 8);
    const auto start = get_le<double>(bytes, 16);
    const auto count = get_le<std::uint64_t>(bytes, 24);
    const auto tag = bytes.substr(32, 4);
    Channel channel;
    if (tag == "VOLT") {
        channel = Channel::voltage;
    } else if (tag == "CURR") {
        channel = Channel::current;
    } else {
        throw ContractViolation("'" + path + "' has unknown channel tag");
    }
    if (count > (bytes.size() - kWaveformHeaderBytes) / sizeof(double) ||
        bytes.size() != kWaveformHeaderBytes + count * sizeof(double)) {
        throw ContractViolation("'" + path + "' is truncated or has trailing bytes");
    }
    std::vector<double> samples(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        samples[k] = get_le<double>(bytes, kWaveformHeaderBytes + k * sizeof(double));
    }
    try {
        return {Waveform(std::move(samples), rate, start), channel};
    } catch (const InvalidInput& e) {
        throw ContractViolation("'" + path + "': " + e.what());
    }
}

std::string schedule_to_text(const Schedule& schedule) {
    std::ostringstream out;
    out << "# feeder-nilm schedule v1\n";
    out << "# duration_s " << format_real(schedule.duration_s) << "\n";
    for (const auto& d : schedule.devices) {
        out << "# device " << d.id << " " << d.class_name << " " << (d.is_medical ? "medical" : "background") << "\n";
    }
    for (const auto& d : schedule.devices) {
        for (const auto& iv : d.intervals) {
            out << d.id << " " << format_real(iv.start_s) << " " << format_real(iv.end_s) << " " << iv.mode << "\n";
        }
    }
    return out.str();
}

Schedule schedule_from_text(const std::string& text, const std::string& source_name) {
    Schedule schedule;
    bool have_duration = false;
    std::map<std::string, std::size_t> index;
    int line_no = 0;
    for (const auto& line : lines_of(text)) {
        ++line_no;
        const auto where = source_name + ":" + std::to_string(line_no);
        const auto words = split_words(line);
        if (words.empty()) {
            continue;
        }
        if (words[0] == "#") {
            if (words.size() == 3 && words[1] == "duration_s") {
                schedule.duration_s = parse_real(words[2], where);
                have_duration = true;
            } else if (words.size() == 5 && words[1] == "device") {
                if (index.count(words[2]) != 0) {
                    throw ContractViolation(where + ": device '" + words[2] + "' declared twice");
                }
                index[words[2]] = schedule.devices.size();
                schedule.devices.push_back({words[2], words[3], words[4] == "medical", {}});
            }
            continue;
        }
        if (words.size() != 4) {
            throw ContractViolation(where + ": expected 'device_id start_s end_s mode'");
        }
        const auto it = index.find(words[0]);
        if (it == index.end()) {
            throw ContractViolation(where + ": undeclared device '" + words[0] + "'");
        }
        schedule.devices[it->second].intervals.push_back(
            {parse_real(words[1], where), parse_real(words[2], where), words[3]});
    }
    if (!have_duration) {
        throw ContractViolation(source_name + ": missing '# duration_s' header");
    }
    try {
        schedule.validate();
    } catch (const InvalidInput& e) {
        throw ContractViolation(source_name + ": " + e.what());
    }
    return schedule;
}

std::string truth_to_text(const GroundTruthSeries& truth) {
    std::ostringstream out;
    out << "# feeder-nilm truth v1\n";
    out << "# n_medical_devices " << truth.n_medical_devices << "\n";
    for (std::size_t k = 0; k < truth.count.size(); ++k) {
        out << format_real(truth.timestamps_s[k]) << " " << truth.count[k] << "\n";
    }
    return out.str();
}

GroundTruthSeries truth_from_text(const std::string& text, const std::string& source_name) {
    GroundTruthSeries truth;
    bool have_n = false;
    int line_no = 0;
    for (const auto& line : lines_of(text)) {
        ++line_no;
        const auto where = source_name + ":" + std::to_string(line_no);
        const auto words = split_words(line);
        if (words.empty()) {
            continue;
        }
        if (words[0] == "#") {
            if (words.size() == 3 && words[1] == "n_medical_devices") {
                truth.n_medical_devices = static_cast<int>(parse_integer(words[2], where));
                have_n = true;
            }
            continue;
        }
        if (words.size() != 2) {
            throw ContractViolation(where + ": expected 'timestamp_s count'");
        }
        const auto count = parse_integer(words[1], where);
        if (count < 0) {
            throw ContractViolation(where + ": negative count");
        }
        truth.timestamps_s.push_back(parse_real(words[0], where));
        truth.count.push_back(static_cast<int>(count));
    }
    if (!have_n) {
        throw ContractViolation(source_name + ": missing '# n_medical_devices' header");
    }
    for (std::size_t k = 0; k < truth.count.size(); ++k) {
        if (truth.count[k] > truth.n_medical_devices) {
            throw ContractViolation(source_name + ": count at t = " + format_real(truth.timestamps_s[k]) +
                                    " exceeds n_medical_devices");
        }
    }
    return truth;
}

}  // namespace feeder_nilm
