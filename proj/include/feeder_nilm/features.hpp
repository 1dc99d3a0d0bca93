#pragma once

// Feature vocabulary for windowed (V, I) pairs, Fisher-score feature ranking
// and z-score normalization.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feeder_nilm/matrix.hpp"
#include "feeder_nilm/signal.hpp"

namespace feeder_nilm {

enum class FeatureId {
    i_rms,
    i_form_factor,
    i_crest_factor,
    phase_shift,
    active_power,
    reactive_power,
    thd,
    h2,
    h3,
    h4,
    h5,
    h6,
    h7,
};

std::string_view feature_name(FeatureId id);
std::optional<FeatureId> parse_feature_id(std::string_view name);
/// Every known feature, in canonical order.
std::vector<FeatureId> all_features();
/// Harmonic order for h2..h7, 0 otherwise.
int harmonic_order(FeatureId id);

/// Ordered feature list; the order is the column order of every dataset built from it.
struct FeatureSpec {
    std::vector<FeatureId> features = all_features();
    double f0_hz = 60.0;
    int max_harmonic = 7;

    std::size_t size() const { return features.size(); }
    std::vector<std::string> names() const;
    /// Throws InvalidInput when empty, duplicated or inconsistent with max_harmonic.
    void validate() const;

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct FeatureRow {
    std::vector<double> values;
    bool valid = true;  // false when some feature was undefined and reported as 0.0
};

/// Evaluates a FeatureSpec on aligned windows of fixed length. Holds the
/// harmonic basis so that featurizing many windows reuses one table.
class WindowFeaturizer {
public:
    WindowFeaturizer(FeatureSpec spec, std::size_t window_length, double sample_rate_hz);

    const FeatureSpec& spec() const { return spec_; }
    std::size_t window_length() const { return basis_.window_length(); }

    FeatureRow compute(std::span<const double> voltage, std::span<const double> current) const;

private:
    FeatureSpec spec_;
    HarmonicBasis basis_;
};

struct FeatureScore {
    std::string feature;
    double score = 0.0;
};

/// Per-class collections of feature vectors, keyed by class name.
using ClassSignatures = std::map<std::string, std::vector<std::vector<double>>>;

/// Fisher score per feature (variance of the class means over the mean
/// within-class variance), sorted descending with ties kept in input order.
std::vector<FeatureScore> rank_features(const std::vector<std::string>& feature_names,
                                        const ClassSignatures& per_class);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> kept;  // false for zero-variance columns, which are dropped

    std::size_t input_width() const { return mean.size(); }
    std::size_t output_width() const;
    std::vector<std::size_t> dropped() const;

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

NormStats fit_normalization(const Matrix& train_x);
/// Z-scores the kept columns; the result has output_width() columns.
Matrix apply_normalization(const Matrix& x, const NormStats& stats);
std::vector<double> apply_normalization(std::span<const double> row, const NormStats& stats);
/// Inverse of apply_normalization; dropped columns come back as their training mean.
Matrix invert_normalization(const Matrix& z, const NormStats& stats);

}  // namespace feeder_nilm
