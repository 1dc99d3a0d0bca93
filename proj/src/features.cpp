#include "feeder_nilm/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "feeder_nilm/error.hpp"

namespace feeder_nilm {

namespace {

struct FeatureInfo {
    FeatureId id;
    std::string_view name;
    int harmonic;
};

constexpr std::array<FeatureInfo, 13> kFeatures{{
    {FeatureId::i_rms, "i_rms", 0},
    {FeatureId::i_form_factor, "i_form_factor", 0},
    {FeatureId::i_crest_factor, "i_crest_factor", 0},
    {FeatureId::phase_shift, "phase_shift", 0},
    {FeatureId::active_power, "active_power", 0},
    {FeatureId::reactive_power, "reactive_power", 0},
    {FeatureId::thd, "thd", 0},
    {FeatureId::h2, "h2", 2},
    {FeatureId::h3, "h3", 3},
    {FeatureId::h4, "h4", 4},
    {FeatureId::h5, "h5", 5},
    {FeatureId::h6, "h6", 6},
    {FeatureId::h7, "h7", 7},
}};

const FeatureInfo& info(FeatureId id) {
    return kFeatures.at(static_cast<std::size_t>(id));
}

double mean_of(std::span<const double> xs) {
    double acc = 0.0;
    for (double x : xs) {
        acc += x;
    }
    return acc / static_cast<double>(xs.size());
}

double population_variance(std::span<const double> xs, double mean) {
    double acc = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        acc += d * d;
    }
    return acc / static_cast<double>(xs.size());
}

FeatureSpec validated(FeatureSpec spec) {
    spec.validate();
    return spec;
}

}  // namespace

std::string_view feature_name(FeatureId id) {
    return info(id).name;
}

std::optional<FeatureId> parse_feature_id(std::string_view name) {
    for (const auto& f : kFeatures) {
        if (f.name == name) {
            return f.id;
        }
    }
    return std::nullopt;
}

std::vector<FeatureId> all_features() {
    std::vector<FeatureId> out;
    for (const auto& f : kFeatures) {
        out.push_back(f.id);
    }
    return out;
}

int harmonic_order(FeatureId id) {
    return info(id).harmonic;
}

std::vector<std::string> FeatureSpec::names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (auto id : features) {
        out.emplace_back(feature_name(id));
    }
    return out;
}

void FeatureSpec::validate() const {
    if (features.empty()) {
        throw InvalidInput("feature spec is empty");
    }
    std::set<FeatureId> seen;
    for (auto id : features) {
        if (!seen.insert(id).second) {
            throw InvalidInput("feature '" + std::string(feature_name(id)) + "' listed twice");
        }
        if (harmonic_order(id) > max_harmonic) {
            throw InvalidInput("feature '" + std::string(feature_name(id)) + "' exceeds max_harmonic " +
                               std::to_string(max_harmonic));
        }
    }
    if (!(f0_hz > 0.0) || max_harmonic < 1) {
        throw InvalidInput("feature spec needs f0_hz > 0 and max_harmonic >= 1");
    }
}

WindowFeaturizer::WindowFeaturizer(FeatureSpec spec, std::size_t window_length, double sample_rate_hz)
    : spec_(validated(std::move(spec))), basis_(window_length, spec_.f0_hz, sample_rate_hz, spec_.max_harmonic) {
    detail::require_fundamental_window(window_length, spec_.f0_hz, sample_rate_hz);
}

FeatureRow WindowFeaturizer::compute(std::span<const double> voltage, std::span<const double> current) const {
    if (voltage.size() != basis_.window_length() || current.size() != basis_.window_length()) {
        throw InvalidInput("featurizer: window length mismatch");
    }

    FeatureRow row;
    row.values.reserve(spec_.size());

    const double i_rms = rms(current);
    // Lazily computed pieces shared by several features.
    std::optional<double> v_rms;
    std::vector<std::optional<Phasor>> i_harmonics(static_cast<std::size_t>(spec_.max_harmonic) + 1);
    std::optional<Phasor> v_fundamental;

    auto current_harmonic = [&](int h) -> const Phasor& {
        auto& slot = i_harmonics[static_cast<std::size_t>(h)];
        if (!slot) {
            slot = basis_.project(current, h);
        }
        return *slot;
    };
    auto shift = [&]() -> std::optional<double> {
        if (!v_rms) {
            v_rms = rms(voltage);
        }
        if (!v_fundamental) {
            v_fundamental = basis_.project(voltage, 1);
        }
        try {
            return detail::phase_shift_from(*v_fundamental, current_harmonic(1), *v_rms, i_rms);
        } catch (const UndefinedFeature&) {
            return std::nullopt;
        }
    };
    auto undefined = [&row]() {
        row.valid = false;
        return 0.0;
    };

    for (auto id : spec_.features) {
        double value = 0.0;
        switch (id) {
            case FeatureId::i_rms:
                value = i_rms;
                break;
            case FeatureId::i_form_factor:
                try {
                    value = form_factor(current);
                } catch (const UndefinedFeature&) {
                    value = undefined();
                }
                break;
            case FeatureId::i_crest_factor:
                try {
                    value = crest_factor(current);
                } catch (const UndefinedFeature&) {
                    value = undefined();
                }
                break;
            case FeatureId::phase_shift: {
                const auto s = shift();
                value = s ? *s : undefined();
                break;
            }
            case FeatureId::active_power:
                value = detail::mean_product(voltage, current);
                break;
            case FeatureId::reactive_power: {
                const auto s = shift();
                value = s ? v_fundamental->magnitude_rms * current_harmonic(1).magnitude_rms * std::sin(*s) : undefined();
                break;
            }
            case FeatureId::thd: {
                std::vector<Phasor> hs;
                for (int h = 1; h <= spec_.max_harmonic; ++h) {
                    hs.push_back(current_harmonic(h));
                }
                try {
                    value = detail::thd_from(hs, i_rms);
                } catch (const UndefinedFeature&) {
                    value = undefined();
                }
                break;
            }
            default:
                value = current_harmonic(harmonic_order(id)).magnitude_rms;
                break;
        }
        row.values.push_back(value);
    }
    return row;
}

std::vector<FeatureScore> rank_features(const std::vector<std::string>& feature_names,
                                        const ClassSignatures& per_class) {
    if (per_class.size() < 2) {
        throw InvalidInput("rank_features needs at least two classes, got " + std::to_string(per_class.size()));
    }
    const std::size_t width = feature_names.size();
    if (width == 0) {
        throw InvalidInput("rank_features: no features");
    }
    for (const auto& [cls, vectors] : per_class) {
        if (vectors.size() < 2) {
            throw InvalidInput("rank_features: class '" + cls + "' has fewer than two vectors");
        }
        for (const auto& v : vectors) {
            if (v.size() != width) {
                throw InvalidInput("rank_features: class '" + cls + "' vector width mismatch");
            }
            if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
                throw InvalidInput("rank_features: class '" + cls + "' has non-finite values");
            }
        }
    }

    std::vector<FeatureScore> scores;
    scores.reserve(width);
    std::vector<double> class_means;
    std::vector<double> column;
    for (std::size_t j = 0; j < width; ++j) {
        class_means.clear();
        double within = 0.0;
        for (const auto& [cls, vectors] : per_class) {
            column.clear();
            for (const auto& v : vectors) {
                column.push_back(v[j]);
            }
            const double m = mean_of(column);
            class_means.push_back(m);
            within += population_variance(column, m);
        }
        within /= static_cast<double>(per_class.size());
        const double between = population_variance(class_means, mean_of(class_means));

        double score = 0.0;
        if (within > 0.0) {
            score = between / within;
        } else if (between > 0.0) {
            score = std::numeric_limits<double>::infinity();
        }
        scores.push_back({feature_names[j], score});
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const FeatureScore& a, const FeatureScore& b) { return a.score > b.score; });
    return scores;
}

std::size_t NormStats::output_width() const {
    return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

std::vector<std::size_t> NormStats::dropped() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < kept.size(); ++j) {
        if (!kept[j]) {
            out.push_back(j);
        }
    }
    return out;
}

NormStats fit_normalization(const Matrix& train_x) {
    if (train_x.rows() == 0 || train_x.cols() == 0) {
        throw InvalidInput("fit_normalization: empty training matrix");
    }
    NormStats stats;
    std::vector<double> column(train_x.rows());
    for (std::size_t j = 0; j < train_x.cols(); ++j) {
        for (std::size_t r = 0; r < train_x.rows(); ++r) {
            column[r] = train_x(r, j);
        }
        const double m = mean_of(column);
        const double sd = std::sqrt(population_variance(column, m));
        stats.mean.push_back(m);
        stats.stddev.push_back(sd);
        stats.kept.push_back(sd > 1e-12 * std::abs(m) && sd > 0.0);
    }
    return stats;
}

std::vector<double> apply_normalization(std::span<const double> row, const NormStats& stats) {
    if (row.size() != stats.input_width()) {
        throw InvalidInput("apply_normalization: row has " + std::to_string(row.size()) + " columns, stats expect " +
                           std::to_string(stats.input_width()));
    }
    std::vector<double> out;
    out.reserve(stats.output_width());
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (stats.kept[j]) {
            out.push_back((row[j] - stats.mean[j]) / stats.stddev[j]);
        }
    }
    return out;
}

Matrix apply_normalization(const Matrix& x, const NormStats& stats) {
    Matrix out(0, stats.output_width());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out.append_row(apply_normalization(x.row(r), stats));
    }
    return out;
}

Matrix invert_normalization(const Matrix& z, const NormStats& stats) {
    if (z.cols() != stats.output_width()) {
        throw InvalidInput("invert_normalization: width mismatch");
    }
    Matrix out(z.rows(), stats.input_width());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < stats.input_width(); ++j) {
            out(r, j) = stats.kept[j] ? z(r, k++) * stats.stddev[j] + stats.mean[j] : stats.mean[j];
        }
    }
    return out;
}

}  // namespace feeder_nilm
