#pragma once

// Signal builders and independent oracles shared by the test binaries.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

namespace test_support {

inline constexpr double kPi = std::numbers::pi;

struct Tone {
    int order;
    double rms;
    double phase;
};

/// sum of sqrt(2) * rms * sin(2 pi h f0 (n + delay) / fs + phase), evaluated directly.
inline std::vector<double> tones(std::size_t n, double fs, double f0, const std::vector<Tone>& parts,
                                 double delay_samples = 0.0) {
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = (static_cast<double>(k) + delay_samples) / fs;
        for (const auto& p : parts) {
            out[k] += std::sqrt(2.0) * p.rms * std::sin(2.0 * kPi * p.order * f0 * t + p.phase);
        }
    }
    return out;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const auto n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t c = n; c-- > 0;) {
        double s = b[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
        x[c] = s / a[c][c];
    }
    return x;
}

/// Least-squares fit of DC plus sin/cos pairs at harmonics 1..max_h; returns RMS
/// magnitude per harmonic (index 0 unused).
inline std::vector<double> lsq_harmonic_rms(const std::vector<double>& w, double f0, double fs, int max_h) {
    const std::size_t m = 1 + 2 * static_cast<std::size_t>(max_h);
    std::vector<std::vector<double>> ata(m, std::vector<double>(m, 0.0));
    std::vector<double> atb(m, 0.0);
    std::vector<double> basis(m);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double t = static_cast<double>(k) / fs;
        basis[0] = 1.0;
        for (int h = 1; h <= max_h; ++h) {
            basis[2 * h - 1] = std::sin(2.0 * kPi * h * f0 * t);
            basis[2 * h] = std::cos(2.0 * kPi * h * f0 * t);
        }
        for (std::size_t i = 0; i < m; ++i) {
            atb[i] += basis[i] * w[k];
            for (std::size_t j = 0; j < m; ++j) ata[i][j] += basis[i] * basis[j];
        }
    }
    const auto coef = solve(ata, atb);
    std::vector<double> out(static_cast<std::size_t>(max_h) + 1, 0.0);
    for (int h = 1; h <= max_h; ++h) {
        out[static_cast<std::size_t>(h)] = std::hypot(coef[2 * h - 1], coef[2 * h]) / std::sqrt(2.0);
    }
    return out;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("feeder-nilm-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace test_support
