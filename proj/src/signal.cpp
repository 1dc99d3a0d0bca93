#include "feeder_nilm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "feeder_nilm/error.hpp"

namespace feeder_nilm {

namespace {

// Fundamentals smaller than this fraction of the window RMS are treated as absent.
constexpr double kZeroFundamentalRatio = 1e-12;

void require_non_empty(std::span<const double> w, const char* what) {
    if (w.empty()) {
        throw InvalidInput(std::string(what) + ": empty window");
    }
}

double mean_abs(std::span<const double> w) {
    double acc = 0.0;
    for (double x : w) {
        acc += std::abs(x);
    }
    return acc / static_cast<double>(w.size());
}

void require_aligned(std::span<const double> v, std::span<const double> i) {
    if (v.size() != i.size()) {
        throw InvalidInput("voltage and current windows differ in length");
    }
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, double sample_rate_hz, double start_time_s)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), start_time_s_(start_time_s) {
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
        throw InvalidInput("waveform sample rate must be positive");
    }
    if (!std::isfinite(start_time_s_)) {
        throw InvalidInput("waveform start time must be finite");
    }
    if (!std::all_of(samples_.begin(), samples_.end(), [](double x) { return std::isfinite(x); })) {
        throw InvalidInput("waveform contains non-finite samples");
    }
}

std::span<const double> Waveform::window(WindowView view) const {
    if (view.length_samples == 0 || view.offset_samples > samples_.size() ||
        view.length_samples > samples_.size() - view.offset_samples) {
        throw InvalidInput("window [" + std::to_string(view.offset_samples) + ", +" +
                           std::to_string(view.length_samples) + ") outside waveform of " +
                           std::to_string(samples_.size()) + " samples");
    }
    return std::span<const double>(samples_).subspan(view.offset_samples, view.length_samples);
}

double wrap_phase(double radians) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(radians, two_pi);  // [-pi, pi]
    if (r <= -std::numbers::pi) {
        r += two_pi;
    }
    return r;
}

double rms(std::span<const double> w) {
    require_non_empty(w, "rms");
    double acc = 0.0;
    for (double x : w) {
        acc += x * x;
    }
    return std::sqrt(acc / static_cast<double>(w.size()));
}

double form_factor(std::span<const double> w) {
    require_non_empty(w, "form_factor");
    const double denom = mean_abs(w);
    if (denom == 0.0) {
        throw UndefinedFeature("form_factor: all-zero window");
    }
    return rms(w) / denom;
}

double crest_factor(std::span<const double> w) {
    require_non_empty(w, "crest_factor");
    const double r = rms(w);
    if (r == 0.0) {
        throw UndefinedFeature("crest_factor: all-zero window");
    }
    double peak = 0.0;
    for (double x : w) {
        peak = std::max(peak, std::abs(x));
    }
    return peak / r;
}

HarmonicBasis::HarmonicBasis(std::size_t window_length, double f0_hz, double sample_rate_hz, int max_harmonic)
    : length_(window_length), f0_hz_(f0_hz), sample_rate_hz_(sample_rate_hz), max_harmonic_(max_harmonic) {
    if (length_ == 0) {
        throw InvalidInput("harmonic basis: empty window");
    }
    if (!(f0_hz > 0.0) || !(sample_rate_hz > 0.0)) {
        throw InvalidInput("harmonic basis: frequencies must be positive");
    }
    if (max_harmonic < 1) {
        throw InvalidInput("harmonic basis: max_harmonic must be >= 1");
    }
    if (!(max_harmonic * f0_hz < sample_rate_hz / 2.0)) {
        throw InvalidInput("harmonic " + std::to_string(max_harmonic) + " of " + std::to_string(f0_hz) +
                           " Hz aliases at " + std::to_string(sample_rate_hz) + " Hz");
    }
    sin_.resize(static_cast<std::size_t>(max_harmonic) * length_);
    cos_.resize(sin_.size());
    for (int h = 1; h <= max_harmonic; ++h) {
        const double omega = 2.0 * std::numbers::pi * h * f0_hz / sample_rate_hz;
        double* s = sin_.data() + static_cast<std::size_t>(h - 1) * length_;
        double* c = cos_.data() + static_cast<std::size_t>(h - 1) * length_;
        for (std::size_t n = 0; n < length_; ++n) {
            const double arg = omega * static_cast<double>(n);
            s[n] = std::sin(arg);
            c[n] = std::cos(arg);
        }
    }
}

Phasor HarmonicBasis::project(std::span<const double> w, int harmonic) const {
    if (w.size() != length_) {
        throw InvalidInput("harmonic basis: window length mismatch");
    }
    if (harmonic < 1 || harmonic > max_harmonic_) {
        throw InvalidInput("harmonic basis: harmonic " + std::to_string(harmonic) + " out of range");
    }
    const double* s = sin_.data() + static_cast<std::size_t>(harmonic - 1) * length_;
    const double* c = cos_.data() + static_cast<std::size_t>(harmonic - 1) * length_;
    double in_phase = 0.0;
    double quadrature = 0.0;
    for (std::size_t n = 0; n < length_; ++n) {
        in_phase += w[n] * s[n];
        quadrature += w[n] * c[n];
    }
    const double scale = 2.0 / static_cast<double>(length_);
    in_phase *= scale;
    quadrature *= scale;
    Phasor p;
    p.magnitude_rms = std::hypot(in_phase, quadrature) / std::numbers::sqrt2;
    p.phase_rad = wrap_phase(std::atan2(quadrature, in_phase));
    return p;
}

Phasor harmonic_phasor(std::span<const double> w, int harmonic, double f0_hz, double sample_rate_hz) {
    detail::require_fundamental_window(w.size(), f0_hz, sample_rate_hz);
    const HarmonicBasis basis(w.size(), f0_hz, sample_rate_hz, harmonic);
    return basis.project(w, harmonic);
}

Phasor fundamental_phasor(std::span<const double> w, double f0_hz, double sample_rate_hz) {
    return harmonic_phasor(w, 1, f0_hz, sample_rate_hz);
}

double phase_shift(std::span<const double> v, std::span<const double> i, double f0_hz, double sample_rate_hz) {
    require_aligned(v, i);
    const Phasor pv = fundamental_phasor(v, f0_hz, sample_rate_hz);
    const Phasor pi = fundamental_phasor(i, f0_hz, sample_rate_hz);
    return detail::phase_shift_from(pv, pi, rms(v), rms(i));
}

PowerPair active_reactive_power(std::span<const double> v, std::span<const double> i, double f0_hz,
                                double sample_rate_hz) {
    require_aligned(v, i);
    const Phasor pv = fundamental_phasor(v, f0_hz, sample_rate_hz);
    const Phasor pi = fundamental_phasor(i, f0_hz, sample_rate_hz);
    const double shift = detail::phase_shift_from(pv, pi, rms(v), rms(i));
    return {detail::mean_product(v, i), pv.magnitude_rms * pi.magnitude_rms * std::sin(shift)};
}

double thd(std::span<const double> w, double f0_hz, double sample_rate_hz, int max_harmonic) {
    detail::require_fundamental_window(w.size(), f0_hz, sample_rate_hz);
    const HarmonicBasis basis(w.size(), f0_hz, sample_rate_hz, max_harmonic);
    std::vector<Phasor> harmonics;
    harmonics.reserve(static_cast<std::size_t>(max_harmonic));
    for (int h = 1; h <= max_harmonic; ++h) {
        harmonics.push_back(basis.project(w, h));
    }
    return detail::thd_from(harmonics, rms(w));
}

namespace detail {

void require_fundamental_window(std::size_t length, double f0_hz, double sample_rate_hz) {
    if (!(f0_hz > 0.0) || !(sample_rate_hz > 0.0)) {
        throw InvalidInput("frequencies must be positive");
    }
    if (!(f0_hz < sample_rate_hz / 2.0)) {
        throw InvalidInput("fundamental at or above Nyquist");
    }
    // One period, allowing for a rate that is not a multiple of f0.
    const double period_samples = sample_rate_hz / f0_hz;
    if (static_cast<double>(length) + 1e-9 < std::floor(period_samples + 1e-9)) {
        throw InvalidInput("window of " + std::to_string(length) + " samples is shorter than one period (" +
                           std::to_string(period_samples) + " samples)");
    }
}

bool fundamental_is_zero(const Phasor& fundamental, double window_rms) {
    return window_rms == 0.0 || fundamental.magnitude_rms <= kZeroFundamentalRatio * window_rms;
}

double phase_shift_from(const Phasor& v1, const Phasor& i1, double v_rms, double i_rms) {
    if (fundamental_is_zero(v1, v_rms) || fundamental_is_zero(i1, i_rms)) {
        throw UndefinedFeature("phase_shift: zero fundamental");
    }
    return wrap_phase(v1.phase_rad - i1.phase_rad);
}

double thd_from(std::span<const Phasor> harmonics, double window_rms) {
    if (harmonics.empty() || fundamental_is_zero(harmonics.front(), window_rms)) {
        throw UndefinedFeature("thd: zero fundamental");
    }
    double acc = 0.0;
    for (std::size_t k = 1; k < harmonics.size(); ++k) {
        acc += harmonics[k].magnitude_rms * harmonics[k].magnitude_rms;
    }
    return std::sqrt(acc) / harmonics.front().magnitude_rms;
}

double mean_product(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) {
        throw InvalidInput("empty window");
    }
    double acc = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        acc += a[n] * b[n];
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace detail

}  // namespace feeder_nilm
