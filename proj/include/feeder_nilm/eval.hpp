#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "feeder_nilm/dataset.hpp"
#include "feeder_nilm/model.hpp"

namespace feeder_nilm {

struct CountBreakdown {
    std::size_t windows = 0;
    double mae_continuous = 0.0;
    double mae_rounded = 0.0;

    friend bool operator==(const CountBreakdown&, const CountBreakdown&) = default;
};

struct EvalReport {
    double mae_continuous = 0.0;
    double mae_rounded = 0.0;
    double exact_count_accuracy = 0.0;
    std::size_t n_test_windows = 0;
    std::map<int, CountBreakdown> per_true_count;
    std::string fingerprint;

    // Per-window detail, written to the residual file rather than the report.
    std::vector<double> t_start_s;
    std::vector<int> targets;
    std::vector<double> estimates;
    std::vector<int> counts;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Mean absolute error; throws InvalidInput on empty or mismatched inputs.
double mae(std::span<const double> predictions, std::span<const double> targets);

/// Builds a report from continuous estimates and their rounded counts.
EvalReport make_report(std::span<const double> t_start_s, std::span<const int> targets,
                       std::span<const double> estimates, std::span<const int> counts);

/// Applies a trained model to a raw (unnormalized) dataset.
EvalReport evaluate(const CountModel& model, const FeatureDataset& test);

/// Constant predictor at the median of the training targets (lower median for even sizes).
EvalReport baseline_report(std::span<const int> train_y, std::span<const int> test_y);
double median_count(std::span<const int> values);

/// `key=value` lines; per-count rows use keys like `count.2.mae_rounded`.
std::string report_to_text(const EvalReport& report);
EvalReport report_from_text(const std::string& text, const std::string& source_name);

/// `t_start_s,y,y_hat,count,residual` per window.
std::string residuals_to_csv(const EvalReport& report);

}  // namespace feeder_nilm
