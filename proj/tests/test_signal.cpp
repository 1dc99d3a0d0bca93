#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/signal.hpp"
#include "support.hpp"

using namespace feeder_nilm;
using namespace test_support;

namespace {

constexpr double fs = 10000.0;
constexpr double f0 = 60.0;
// 1000 samples at 10 kHz is exactly six 60 Hz cycles.
constexpr std::size_t six_cycles = 1000;

std::vector<double> unit_sine(std::size_t n = six_cycles) {
    return tones(n, fs, f0, {{1, 1.0 / std::sqrt(2.0), 0.0}});
}

}  // namespace

TEST_CASE("waveform construction and windows are validated") {
    CHECK_THROWS_AS(Waveform({1.0}, 0.0), InvalidInput);
    CHECK_THROWS_AS(Waveform({1.0}, -5.0), InvalidInput);
    CHECK_THROWS_AS(Waveform({1.0, NAN}, fs), InvalidInput);
    CHECK_THROWS_AS(Waveform({INFINITY}, fs), InvalidInput);

    const Waveform w({1, 2, 3, 4, 5}, 10.0, 2.5);
    CHECK(w.duration_s() == doctest::Approx(0.5));
    CHECK(w.start_time_s() == 2.5);
    const auto s = w.window({1, 3});
    REQUIRE(s.size() == 3);
    CHECK(s[0] == 2.0);
    CHECK(s[2] == 4.0);
    CHECK_NOTHROW(w.window({0, 5}));
    CHECK_THROWS_AS(w.window({3, 3}), InvalidInput);
    CHECK_THROWS_AS(w.window({0, 0}), InvalidInput);
    CHECK_THROWS_AS(w.window({6, 1}), InvalidInput);
}

TEST_CASE("wrap_phase lands in (-pi, pi]") {
    CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(0.25 + 4 * kPi) == doctest::Approx(0.25));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int k = 0; k < 1000; ++k) {
        const double a = u(rng);
        const double w = wrap_phase(a);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
        CHECK(std::abs(std::remainder(a - w, 2 * kPi)) < 1e-9);
    }
}

TEST_CASE("rms examples") {
    CHECK(std::abs(rms(tones(six_cycles, fs, f0, {{1, 1.0 / std::sqrt(2.0), 0.3}})) - 0.70711) < 1e-5);
    CHECK(std::abs(rms(unit_sine()) - 1.0 / std::sqrt(2.0)) < 1e-5);
    CHECK(rms(std::vector<double>(100, 0.0)) == 0.0);
    CHECK(rms(std::vector<double>{1, -1, 1, -1}) == 1.0);
    CHECK_THROWS_AS(rms(std::vector<double>{}), InvalidInput);
}

TEST_CASE("form factor examples") {
    CHECK(std::abs(form_factor(unit_sine()) - kPi / (2 * std::sqrt(2.0))) < 1e-4);
    CHECK(form_factor(std::vector<double>(50, -3.5)) == doctest::Approx(1.0));
    std::vector<double> square(400);
    for (std::size_t k = 0; k < square.size(); ++k) square[k] = (k / 20) % 2 ? 1.0 : -1.0;
    CHECK(form_factor(square) == doctest::Approx(1.0));
    CHECK_THROWS_AS(form_factor(std::vector<double>(10, 0.0)), UndefinedFeature);
}

TEST_CASE("crest factor examples") {
    CHECK(std::abs(crest_factor(unit_sine()) - std::sqrt(2.0)) < 1e-4);
    CHECK(crest_factor(std::vector<double>(50, 2.0)) == doctest::Approx(1.0));
    std::vector<double> spike(1000, 0.0);
    spike[417] = 1.0;
    CHECK(std::abs(crest_factor(spike) - std::sqrt(1000.0)) < 1e-6);
    CHECK_THROWS_AS(crest_factor(std::vector<double>(10, 0.0)), UndefinedFeature);
}

TEST_CASE("fundamental phasor examples") {
    const auto five = tones(six_cycles, fs, f0, {{1, 5.0, 0.0}});
    CHECK(std::abs(fundamental_phasor(five, f0, fs).magnitude_rms - 5.0) < 1e-3);

    const auto zero = fundamental_phasor(std::vector<double>(six_cycles, 0.0), f0, fs);
    CHECK(zero.magnitude_rms == 0.0);
    CHECK(std::isfinite(zero.phase_rad));

    const auto mixed = tones(six_cycles, fs, f0, {{1, 3.0, 0.0}, {3, 0.5, 0.0}});
    const auto oracle = lsq_harmonic_rms(mixed, f0, fs, 5);
    const auto p = fundamental_phasor(mixed, f0, fs);
    CHECK(std::abs(p.magnitude_rms - 3.0) < 1e-3);
    CHECK(std::abs(p.magnitude_rms - oracle[1]) < 1e-3);
}

TEST_CASE("fundamental phasor rejects short windows and aliasing") {
    CHECK_THROWS_AS(fundamental_phasor(unit_sine(100), f0, fs), InvalidInput);
    CHECK_NOTHROW(fundamental_phasor(unit_sine(167), f0, fs));
    CHECK_THROWS_AS(fundamental_phasor(unit_sine(), 6000.0, fs), InvalidInput);
    CHECK_THROWS_AS(fundamental_phasor(std::vector<double>{}, f0, fs), InvalidInput);
}

TEST_CASE("phase shift examples") {
    const auto v = tones(six_cycles, fs, f0, {{1, 120.0, 0.0}});
    const auto i_res = tones(six_cycles, fs, f0, {{1, 2.0, 0.0}});
    CHECK(std::abs(phase_shift(v, i_res, f0, fs)) < 1e-4);

    // 12 kHz makes a quarter period exactly 50 samples, so the lag is a pure delay.
    const double fs12 = 12000.0;
    const auto long_v = tones(1250, fs12, f0, {{1, 1.0, 0.2}});
    const std::vector<double> v_win(long_v.begin() + 50, long_v.end());
    const std::vector<double> i_win(long_v.begin(), long_v.end() - 50);
    CHECK(std::abs(phase_shift(v_win, i_win, f0, fs12) - kPi / 2) < 1e-3);

    const auto i_30 = tones(six_cycles, fs, f0, {{1, 1.5, -kPi / 6}});
    CHECK(std::abs(phase_shift(v, i_30, f0, fs) - 0.5236) < 1e-3);

    CHECK_THROWS_AS(phase_shift(v, std::vector<double>(six_cycles, 0.0), f0, fs), UndefinedFeature);
    CHECK_THROWS_AS(phase_shift(std::vector<double>(six_cycles, 0.0), v, f0, fs), UndefinedFeature);
    CHECK_THROWS_AS(phase_shift(v, unit_sine(999), f0, fs), InvalidInput);
}

TEST_CASE("phase shift is antisymmetric") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ph(-kPi, kPi);
    for (int k = 0; k < 50; ++k) {
        const auto a = tones(six_cycles, fs, f0, {{1, 1.0, ph(rng)}, {3, 0.2, ph(rng)}});
        const auto b = tones(six_cycles, fs, f0, {{1, 0.7, ph(rng)}, {5, 0.1, ph(rng)}});
        const double ab = phase_shift(a, b, f0, fs);
        const double ba = phase_shift(b, a, f0, fs);
        CHECK(std::abs(std::remainder(ab + ba, 2 * kPi)) < 1e-12);
        CHECK((std::abs(ab - wrap_phase(-ba)) < 1e-12 || std::abs(std::abs(ab) - kPi) < 1e-9));
    }
}

TEST_CASE("active and reactive power examples") {
    const auto v = unit_sine();
    const auto p1 = active_reactive_power(v, unit_sine(), f0, fs);
    // unit_sine has amplitude 1, i.e. 1/sqrt(2) RMS; rebuild at unit RMS.
    const auto vu = tones(six_cycles, fs, f0, {{1, 1.0, 0.0}});
    const auto same = active_reactive_power(vu, vu, f0, fs);
    CHECK(std::abs(same.active_w - 1.0) < 1e-4);
    CHECK(std::abs(same.reactive_var) < 1e-4);
    CHECK(std::abs(p1.active_w - 0.5) < 1e-4);

    const auto lag90 = tones(six_cycles, fs, f0, {{1, 1.0, -kPi / 2}});
    const auto q = active_reactive_power(vu, lag90, f0, fs);
    CHECK(std::abs(q.active_w) < 1e-4);
    CHECK(std::abs(q.reactive_var - 1.0) < 1e-3);

    const auto lag60 = tones(six_cycles, fs, f0, {{1, 2.0, -kPi / 3}});
    const auto pq = active_reactive_power(vu, lag60, f0, fs);
    CHECK(std::abs(pq.active_w - 1.0) < 1e-3);
    CHECK(std::abs(pq.reactive_var - std::sqrt(3.0)) < 1e-3);

    CHECK_THROWS_AS(active_reactive_power(vu, std::vector<double>(six_cycles, 0.0), f0, fs), UndefinedFeature);
}

TEST_CASE("thd examples") {
    CHECK(std::abs(thd(unit_sine(), f0, fs, 7)) < 1e-4);
    const auto ten = tones(six_cycles, fs, f0, {{1, 1.0, 0.0}, {3, 0.1, 0.0}});
    CHECK(std::abs(thd(ten, f0, fs, 7) - 0.100) < 1e-3);

    const auto composite = tones(six_cycles, fs, f0, {{1, 2.0, 0.4}, {3, 0.5, -1.2}, {5, 0.3, 2.2}});
    const auto oracle = lsq_harmonic_rms(composite, f0, fs, 7);
    double acc = 0.0;
    for (int h = 2; h <= 7; ++h) acc += oracle[h] * oracle[h];
    CHECK(std::abs(thd(composite, f0, fs, 7) - std::sqrt(acc) / oracle[1]) < 1e-3);

    CHECK_THROWS_AS(thd(std::vector<double>(six_cycles, 0.0), f0, fs, 7), UndefinedFeature);
    // Only harmonics 2..4, no fundamental.
    CHECK_THROWS_AS(thd(tones(six_cycles, fs, f0, {{2, 1.0, 0.0}}), f0, fs, 7), UndefinedFeature);
    CHECK_THROWS_AS(thd(unit_sine(), f0, fs, 90), InvalidInput);
    CHECK_THROWS_AS(thd(unit_sine(), f0, fs, 0), InvalidInput);
}

TEST_CASE("scale invariance of the ratio features") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ph(-kPi, kPi);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = tones(six_cycles, fs, f0, {{1, 1.0, ph(rng)}, {3, 0.3, ph(rng)}, {7, 0.1, ph(rng)}});
        for (auto& s : x) s += noise(rng);
        for (double k : {2.0, 0.5, 1024.0, 0.37, 13.1}) {
            std::vector<double> y(x);
            for (auto& s : y) s *= k;
            CHECK(rel_err(form_factor(y), form_factor(x)) < 1e-9);
            CHECK(rel_err(crest_factor(y), crest_factor(x)) < 1e-9);
            CHECK(rel_err(thd(y, f0, fs, 7), thd(x, f0, fs, 7)) < 1e-9);
            if (k == std::exp2(std::round(std::log2(k)))) {
                CHECK(rms(y) == k * rms(x));
            } else {
                CHECK(rel_err(rms(y), k * rms(x)) < 1e-12);
            }
        }
    }
}

TEST_CASE("crest and form factors are at least one") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, 300);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> w(static_cast<std::size_t>(len(rng)));
        for (auto& s : w) s = g(rng) * (trial % 3 == 0 ? 1e-6 : 1.0) + (trial % 5 == 0 ? 3.0 : 0.0);
        CHECK(crest_factor(w) >= 1.0 - 1e-12);
        CHECK(form_factor(w) >= 1.0 - 1e-12);
    }
}

TEST_CASE("phasor recovery over whole periods") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> mag(0.1, 50.0);
    std::uniform_real_distribution<double> ph(-3.1, 3.1);
    for (std::size_t periods : {1u, 2u, 7u, 30u}) {
        for (int trial = 0; trial < 10; ++trial) {
            const double m = mag(rng);
            const double p = ph(rng);
            const auto x = tones(periods * 500, fs, 20.0, {{1, m, p}});
            const auto got = fundamental_phasor(x, 20.0, fs);
            CHECK(rel_err(got.magnitude_rms, m) < 1e-6);
            CHECK(std::abs(got.phase_rad - p) < 1e-6 * std::max(1.0, std::abs(p)));
        }
    }
}

TEST_CASE("time shift rotates the fundamental phase") {
    for (double delay : {1.0, 17.0, 40.0, 123.0, 0.25}) {
        const auto x = tones(six_cycles, fs, f0, {{1, 2.0, 0.4}, {3, 0.3, 1.0}});
        // x delayed by delay samples: x(t - dt)
        const auto y = tones(six_cycles, fs, f0, {{1, 2.0, 0.4}, {3, 0.3, 1.0}}, -delay);
        const auto px = fundamental_phasor(x, f0, fs);
        const auto py = fundamental_phasor(y, f0, fs);
        const double expected = -2 * kPi * f0 * delay / fs;
        CHECK(std::abs(std::remainder(py.phase_rad - px.phase_rad - expected, 2 * kPi)) < 1e-9);
        CHECK(rel_err(py.magnitude_rms, px.magnitude_rms) < 1e-9);
    }
}

TEST_CASE("harmonic basis reproduces the one-shot projection bit for bit") {
    const auto x = tones(1234, fs, f0, {{1, 1.0, 0.1}, {2, 0.2, 0.5}, {5, 0.05, -2.0}});
    const HarmonicBasis basis(x.size(), f0, fs, 7);
    for (int h = 1; h <= 7; ++h) {
        const auto a = basis.project(x, h);
        const auto b = harmonic_phasor(x, h, f0, fs);
        CHECK(a.magnitude_rms == b.magnitude_rms);
        CHECK(a.phase_rad == b.phase_rad);
    }
    CHECK_THROWS_AS(basis.project(x, 8), InvalidInput);
    CHECK_THROWS_AS(basis.project(unit_sine(), 1), InvalidInput);
}

TEST_CASE("non-integer cycle windows stay within the leakage bound") {
    // 5 s windows hold hundreds of periods; a fractional cycle biases by well under 0.1%.
    const auto x = tones(50'000 + 37, fs, f0, {{1, 4.0, 0.7}});
    CHECK(rel_err(fundamental_phasor(x, f0, fs).magnitude_rms, 4.0) < 1e-3);
}
