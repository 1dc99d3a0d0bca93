#pragma once

// Waveform container and the windowed high-frequency feature primitives.

#include <cstddef>
#include <span>
#include <vector>

namespace feeder_nilm {

/// A half-open range of samples [offset, offset + length) within a waveform.
struct WindowView {
    std::size_t offset_samples = 0;
    std::size_t length_samples = 0;
};

/// Uniformly sampled real signal (volts or amperes) on the scenario clock.
class Waveform {
public:
    Waveform(std::vector<double> samples, double sample_rate_hz, double start_time_s = 0.0);

    std::span<const double> samples() const { return samples_; }
    double sample_rate_hz() const { return sample_rate_hz_; }
    double start_time_s() const { return start_time_s_; }
    std::size_t size() const { return samples_.size(); }
    double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

    /// Bounds-checked view of a window; throws InvalidInput when it overruns.
    std::span<const double> window(WindowView view) const;

    friend bool operator==(const Waveform&, const Waveform&) = default;

private:
    std::vector<double> samples_;
    double sample_rate_hz_;
    double start_time_s_;
};

/// RMS magnitude and phase of one spectral component. The phase is referenced
/// to sin(2*pi*f*t) with t measured from the first sample of the window, so
/// x(t) = sqrt(2) * M * sin(2*pi*f*t + phase) has phasor (M, phase).
struct Phasor {
    double magnitude_rms = 0.0;
    double phase_rad = 0.0;
};

struct PowerPair {
    double active_w = 0.0;
    double reactive_var = 0.0;
};

/// Wraps an angle into (-pi, pi].
double wrap_phase(double radians);

double rms(std::span<const double> w);
double form_factor(std::span<const double> w);
double crest_factor(std::span<const double> w);

/// Precomputed sin/cos references for harmonics 1..max_harmonic of f0 over a
/// fixed window length. Reusing one basis across windows of equal length gives
/// results bit-identical to the one-shot primitives below.
class HarmonicBasis {
public:
    HarmonicBasis(std::size_t window_length, double f0_hz, double sample_rate_hz, int max_harmonic);

    std::size_t window_length() const { return length_; }
    int max_harmonic() const { return max_harmonic_; }
    double f0_hz() const { return f0_hz_; }
    double sample_rate_hz() const { return sample_rate_hz_; }

    /// Single-bin projection of w onto harmonic h (1 <= h <= max_harmonic).
    Phasor project(std::span<const double> w, int harmonic) const;

private:
    std::size_t length_;
    double f0_hz_;
    double sample_rate_hz_;
    int max_harmonic_;
    // Row-major [harmonic-1][n].
    std::vector<double> sin_;
    std::vector<double> cos_;
};

Phasor harmonic_phasor(std::span<const double> w, int harmonic, double f0_hz, double sample_rate_hz);
Phasor fundamental_phasor(std::span<const double> w, double f0_hz, double sample_rate_hz);

/// phase(v) - phase(i) at the fundamental; positive when current lags voltage.
double phase_shift(std::span<const double> v, std::span<const double> i, double f0_hz, double sample_rate_hz);

/// P = mean(v*i); Q from the fundamental phasors, positive for lagging current.
PowerPair active_reactive_power(std::span<const double> v, std::span<const double> i, double f0_hz,
                                double sample_rate_hz);

/// sqrt(sum of harmonic magnitudes 2..max_harmonic squared) / fundamental magnitude.
double thd(std::span<const double> w, double f0_hz, double sample_rate_hz, int max_harmonic);

// Building blocks shared with the featurizer, so that a dataset row and the
// primitives above agree to the last bit.
namespace detail {
void require_fundamental_window(std::size_t length, double f0_hz, double sample_rate_hz);
bool fundamental_is_zero(const Phasor& fundamental, double window_rms);
double phase_shift_from(const Phasor& v1, const Phasor& i1, double v_rms, double i_rms);
double thd_from(std::span<const Phasor> harmonics, double window_rms);
double mean_product(std::span<const double> a, std::span<const double> b);
}  // namespace detail

}  // namespace feeder_nilm
