#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <set>

#include "feeder_nilm/devices.hpp"
#include "feeder_nilm/error.hpp"
#include "support.hpp"

using namespace feeder_nilm;
using namespace test_support;

namespace {

constexpr double fs = 10000.0;
constexpr double f0 = 60.0;

DeviceModel single(std::vector<HarmonicSpec> harmonics, double noise = 0.0) {
    return DeviceModel("probe", false, {{"off", {}, 0.0}, {"on", std::move(harmonics), noise}});
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST_CASE("synthesized current examples") {
    const auto two = synth_device_current(single({{1, 2.0, 0.3}}), "on", 1.0, fs, f0, 0.0, 1);
    CHECK(two.size() == 10000);
    CHECK(std::abs(rms(two.samples()) - 2.0) < 1e-6);

    const auto off = synth_device_current(single({{1, 2.0, 0.3}}), "off", 1.0, fs, f0, 0.0, 1);
    CHECK(std::all_of(off.samples().begin(), off.samples().end(), [](double x) { return x == 0.0; }));

    const auto parseval = synth_device_current(single({{1, 3.0, -0.2}, {3, 0.4, 1.0}}), "on", 1.0, fs, f0, 0.0, 1);
    CHECK(std::abs(rms(parseval.samples()) - std::sqrt(9.16)) < 1e-4);
}

TEST_CASE("synthesis errors") {
    const auto m = single({{1, 1.0, 0.0}, {5, 0.1, 0.0}});
    CHECK_THROWS_AS(synth_device_current(m, "sprint", 1.0, fs, f0, 0.0, 1), NotFound);
    // 5th harmonic of 60 Hz is exactly Nyquist at 600 Hz.
    CHECK_THROWS_AS(synth_device_current(m, "on", 1.0, 600.0, f0, 0.0, 1), InvalidInput);
    CHECK_NOTHROW(synth_device_current(m, "on", 1.0, 601.0, f0, 0.0, 1));
    CHECK_THROWS_AS(synth_device_current(m, "on", 0.0, fs, f0, 0.0, 1), InvalidInput);
}

TEST_CASE("synthesis matches the closed form, including the phase offset") {
    const std::vector<HarmonicSpec> hs{{1, 1.3, -0.4}, {3, 0.2, 2.0}, {7, 0.05, -3.0}};
    for (double offset : {0.0, 0.5, -2.0}) {
        for (double rate : {10000.0, 9973.0}) {
            const auto got = synth_device_current(single(hs), "on", 0.3, rate, f0, offset, 1);
            std::vector<Tone> parts;
            for (const auto& h : hs) parts.push_back({h.order, h.magnitude_rms_amps, h.phase_rad + h.order * offset});
            const auto want = tones(got.size(), rate, f0, parts);
            CHECK(max_abs_diff(got.samples(), want) < 1e-9);
        }
    }
}

TEST_CASE("synthesis is deterministic and seeds select independent noise") {
    const auto m = single({{1, 1.0, 0.0}}, 0.05);
    const auto a = synth_device_current(m, "on", 0.5, fs, f0, 0.1, 42);
    const auto b = synth_device_current(m, "on", 0.5, fs, f0, 0.1, 42);
    const auto c = synth_device_current(m, "on", 0.5, fs, f0, 0.1, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);

    // The residual after removing the deterministic part is the noise, of the configured RMS.
    const auto clean = synth_device_current(single({{1, 1.0, 0.0}}), "on", 0.5, fs, f0, 0.1, 42);
    std::vector<double> resid(a.size());
    for (std::size_t k = 0; k < resid.size(); ++k) resid[k] = a.samples()[k] - clean.samples()[k];
    CHECK(std::abs(rms(resid) - 0.05) < 0.05 * 0.05);
}

TEST_CASE("linearity in the harmonic magnitudes") {
    const std::vector<HarmonicSpec> base{{1, 0.55, -0.52}, {3, 0.18, 2.40}, {5, 0.09, -1.10}};
    const auto x = synth_device_current(single(base), "on", 0.2, fs, f0, 0.0, 1);
    for (double k : {2.0, 0.3, 7.5}) {
        auto scaled = base;
        for (auto& h : scaled) h.magnitude_rms_amps *= k;
        const auto y = synth_device_current(single(scaled), "on", 0.2, fs, f0, 0.0, 1);
        double worst = 0.0;
        for (std::size_t n = 0; n < x.size(); ++n) worst = std::max(worst, std::abs(y.samples()[n] - k * x.samples()[n]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("noiseless output is periodic in 1/f0") {
    const auto lib = DeviceLibrary::defaults();
    const auto x = synth_device_current(single(lib.find("lighting").mode("dimmed").harmonics), "on", 1.0, fs, f0, 0.3, 1);
    // 500 samples = 3 periods at 60 Hz / 10 kHz; 12 kHz gives 200 samples per period.
    for (std::size_t n = 0; n + 500 < x.size(); ++n) {
        REQUIRE(std::abs(x.samples()[n + 500] - x.samples()[n]) <= 1e-9);
    }
    const auto y = synth_device_current(single(lib.find("motor").mode("loaded").harmonics), "on", 1.0, 12000.0, f0, 0.0, 1);
    for (std::size_t n = 0; n + 200 < y.size(); ++n) {
        REQUIRE(std::abs(y.samples()[n + 200] - y.samples()[n]) <= 1e-9);
    }
}

TEST_CASE("supply voltage") {
    const auto v = supply_voltage(120.0, 0.0, 1.0, fs, f0);
    CHECK(std::abs(rms(v.samples()) - 120.0) < 1e-6);
    const auto d = supply_voltage(120.0, 0.05, 1.0, fs, f0);
    CHECK(std::abs(thd(d.samples(), f0, fs, 7) - 0.05) < 1e-6);
    CHECK_THROWS_AS(supply_voltage(0.0, 0.0, 1.0, fs, f0), InvalidInput);
    CHECK_THROWS_AS(supply_voltage(120.0, -0.1, 1.0, fs, f0), InvalidInput);
}

TEST_CASE("device model invariants") {
    CHECK_THROWS_AS(DeviceModel("x", false, {{"on", {{1, 1.0, 0.0}}, 0.0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, 1, 0}}, 0}, {"a", {{1, 2, 0}}, 0}}),
                    InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {{1, 1, 0}}, 0.0}, {"a", {{1, 1, 0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, 1, 0}, {1, 2, 0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, 0.0, 0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, -1.0, 0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, 1.0, 4.0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("x", false, {{"off", {}, 0.0}, {"a", {{1, 1.0, 0}}, -0.1}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("a.b", false, {{"off", {}, 0.0}, {"a", {{1, 1, 0}}, 0}}), InvalidInput);
    CHECK_THROWS_AS(DeviceModel("", false, {{"off", {}, 0.0}, {"a", {{1, 1, 0}}, 0}}), InvalidInput);

    const auto m = single({{1, 1.0, 0.0}});
    CHECK(m.active_modes() == std::vector<std::string>{"on"});
    CHECK(m.mode_index("on") == 1);
    CHECK_THROWS_AS(m.mode("nope"), NotFound);
}

TEST_CASE("default library") {
    const auto lib = DeviceLibrary::defaults();
    for (const char* cls : {"ventilator", "heater", "motor", "electronics", "lighting", "fridge"}) {
        CHECK(lib.contains(cls));
    }
    CHECK_THROWS_AS(lib.find("toaster"), NotFound);

    const auto& vent = lib.find("ventilator");
    CHECK(vent.is_medical());
    CHECK(vent.active_modes() == std::vector<std::string>{"standby", "run", "humidifier-run"});
    const auto& standby = vent.mode("standby");
    REQUIRE(standby.harmonics.size() == 1);
    CHECK(standby.harmonics[0].magnitude_rms_amps == 0.10);
    CHECK(standby.harmonics[0].phase_rad == -0.35);

    // Humidifier-run is run plus a resistive 0.80 A fundamental.
    const auto& run = vent.mode("run");
    const auto& hum = vent.mode("humidifier-run");
    const auto fund = [](const DeviceMode& m) {
        for (const auto& h : m.harmonics) {
            if (h.order == 1) return std::polar(h.magnitude_rms_amps, h.phase_rad);
        }
        return std::complex<double>{};
    };
    const auto expected = fund(run) + std::complex<double>(0.80, 0.0);
    CHECK(std::abs(fund(hum) - expected) < 1e-12);
    for (int order : {3, 5}) {
        const auto pick = [&](const DeviceMode& m) {
            for (const auto& h : m.harmonics) {
                if (h.order == order) return h;
            }
            return HarmonicSpec{};
        };
        CHECK(pick(run) == pick(hum));
    }
    for (const auto& m : lib.models()) {
        if (m.class_name() != "ventilator") CHECK_FALSE(m.is_medical());
    }
}

TEST_CASE("library text round trip") {
    const auto lib = DeviceLibrary::defaults();
    const auto text = lib.to_text();
    const auto back = DeviceLibrary::parse(text, "lib.txt");
    CHECK(back == lib);
    CHECK(back.to_text() == text);
}

TEST_CASE("library parsing") {
    const std::string good = R"(format_version = 1
# a comment
[device pump]
medical = true

[mode pump steady]
noise_rms_amps = 0.01
h1 = 1.5 -0.2   # trailing comment
h3 = 0.2 1.0
)";
    const auto lib = DeviceLibrary::parse(good, "good");
    const auto& pump = lib.find("pump");
    CHECK(pump.is_medical());
    REQUIRE(pump.modes().size() == 2);
    CHECK(pump.modes()[0].is_off());
    CHECK(pump.mode("steady").harmonics[1] == HarmonicSpec{3, 0.2, 1.0});

    const auto bad = [](const std::string& text) { return DeviceLibrary::parse(text, "bad"); };
    CHECK_THROWS_AS(bad("[device pump]\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 2\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[mode pump steady]\nh1 = 1 0\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n[mode pump a]\nh1 = 1\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n[mode pump a]\nh1 = 1 0\nh1 = 2 0\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n[mode pump a]\nvolts = 3\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\ncolour = red\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n[device pump]\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[gadget]\n"), ConfigError);
    CHECK_THROWS_AS(bad("format_version = 1\n[device pump]\n[mode pump a]\nh1 = x 0\n"), ConfigError);
    CHECK_THROWS_AS(DeviceLibrary::load("/nonexistent/lib.txt"), ConfigError);
}

TEST_CASE("signature feature examples") {
    const FeatureSpec spec;
    const auto resistive = DeviceLibrary::defaults().find("heater");
    const auto names = spec.names();
    const auto col = [&](const char* id) {
        return static_cast<std::size_t>(std::find(names.begin(), names.end(), id) - names.begin());
    };
    const auto heat = device_signature_features(resistive, "high", 1.0, fs, spec);
    CHECK(std::abs(heat[col("phase_shift")]) < 1e-4);
    CHECK(std::abs(heat[col("thd")]) < 1e-4);

    const auto pure = device_signature_features(single({{1, 2.0, -0.7}}, 0.3), "on", 1.0, fs, spec);
    CHECK(std::abs(pure[col("thd")]) < 1e-4);
    CHECK(std::abs(pure[col("phase_shift")] - 0.7) < 1e-4);
    CHECK(std::abs(pure[col("i_rms")] - 2.0) < 1e-6);  // noise is left out

    CHECK_THROWS_AS(device_signature_features(resistive, "off", 1.0, fs, spec), InvalidInput);
    CHECK_THROWS_AS(device_signature_features(resistive, "boost", 1.0, fs, spec), NotFound);
}

TEST_CASE("ventilator run signature equals the primitives on the same window") {
    const FeatureSpec spec;
    const auto lib = DeviceLibrary::defaults();
    const auto& vent = lib.find("ventilator");
    const auto got = device_signature_features(vent, "run", 0.5, fs, spec);

    DeviceModel quiet("ventilator", true, {{"off", {}, 0.0}, {"run", vent.mode("run").harmonics, 0.0}});
    const auto i = synth_device_current(quiet, "run", 0.5, fs, f0, 0.0, 0);
    const auto v = supply_voltage(120.0, 0.0, 0.5, fs, f0);
    const auto pq = active_reactive_power(v.samples(), i.samples(), f0, fs);
    const std::vector<double> want{
        rms(i.samples()),
        form_factor(i.samples()),
        crest_factor(i.samples()),
        phase_shift(v.samples(), i.samples(), f0, fs),
        pq.active_w,
        pq.reactive_var,
        thd(i.samples(), f0, fs, 7),
        harmonic_phasor(i.samples(), 2, f0, fs).magnitude_rms,
        harmonic_phasor(i.samples(), 3, f0, fs).magnitude_rms,
        harmonic_phasor(i.samples(), 4, f0, fs).magnitude_rms,
        harmonic_phasor(i.samples(), 5, f0, fs).magnitude_rms,
        harmonic_phasor(i.samples(), 6, f0, fs).magnitude_rms,
        harmonic_phasor(i.samples(), 7, f0, fs).magnitude_rms,
    };
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
        CAPTURE(k);
        CHECK(std::abs(got[k] - want[k]) < 1e-9);
    }
    CHECK(std::abs(got[8] - 0.18) < 1e-6);
}

TEST_CASE("library signatures hold one vector per active mode") {
    const auto lib = DeviceLibrary::defaults();
    const auto sigs = library_signatures(lib, 0.5, fs, FeatureSpec{});
    CHECK(sigs.size() == lib.models().size());
    for (const auto& m : lib.models()) {
        CHECK(sigs.at(m.class_name()).size() == m.active_modes().size());
    }
}

TEST_CASE("seed derivation separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {0ull, 1ull, 2ull}) {
        for (std::uint64_t stream = 0; stream < 1000; ++stream) seen.insert(derive_seed(base, stream));
    }
    CHECK(seen.size() == 3000);
    CHECK(derive_seed(5, 9) == derive_seed(5, 9));
    CHECK(sample_count(0.5, 10000.0) == 5000);
}
