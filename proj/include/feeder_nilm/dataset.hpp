#pragma once

// Windowed feature datasets: rows x_t = (f^1, ..., f^L) over aligned (V, I)
// windows, paired with the running-device count y_t.

#include <string>
#include <vector>

#include "feeder_nilm/features.hpp"
#include "feeder_nilm/feeder.hpp"
#include "feeder_nilm/matrix.hpp"

namespace feeder_nilm {

struct FeatureDataset {
    FeatureSpec spec;
    double window_s = 5.0;
    double stride_s = 5.0;
    std::vector<double> t_start_s;
    Matrix x;  // n_windows x L, columns in spec order
    std::vector<int> y;
    std::vector<bool> valid;

    std::size_t size() const { return y.size(); }
    /// Rows [begin, end) as a new dataset.
    FeatureDataset slice(std::size_t begin, std::size_t end) const;
    /// Keeps only the listed features (in the given order); throws InvalidInput if one is absent.
    FeatureDataset select(const std::vector<FeatureId>& features) const;

    friend bool operator==(const FeatureDataset&, const FeatureDataset&) = default;
};

/// Number of windows of `window` samples at `stride` samples that fit in `total`.
std::size_t window_count(std::size_t total, std::size_t window, std::size_t stride);

FeatureDataset featurize(const Waveform& voltage, const Waveform& current, const GroundTruthSeries& truth,
                         double window_s, double stride_s, const FeatureSpec& spec);

/// CSV with a `# key=value` metadata preamble followed by the header row
/// `t_start_s,<feature ids...>,y,valid`; reals at 17 significant digits.
std::string dataset_to_csv(const FeatureDataset& dataset);
FeatureDataset dataset_from_csv(const std::string& text, const std::string& source_name);

}  // namespace feeder_nilm
