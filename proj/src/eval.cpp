#include "feeder_nilm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace feeder_nilm {

double mae(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw InvalidInput("mae needs equal, non-zero lengths (got " + std::to_string(predictions.size()) + " and " +
                           std::to_string(targets.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        acc += std::abs(predictions[k] - targets[k]);
    }
    return acc / static_cast<double>(predictions.size());
}

EvalReport make_report(std::span<const double> t_start_s, std::span<const int> targets,
                       std::span<const double> estimates, std::span<const int> counts) {
    const auto n = targets.size();
    if (n == 0 || estimates.size() != n || counts.size() != n || t_start_s.size() != n) {
        throw InvalidInput("report inputs must be non-empty and of equal length");
    }
    EvalReport report;
    report.n_test_windows = n;
    report.t_start_s.assign(t_start_s.begin(), t_start_s.end());
    report.targets.assign(targets.begin(), targets.end());
    report.estimates.assign(estimates.begin(), estimates.end());
    report.counts.assign(counts.begin(), counts.end());

    std::vector<double> y(n);
    std::vector<double> rounded(n);
    std::size_t exact = 0;
    for (std::size_t k = 0; k < n; ++k) {
        y[k] = targets[k];
        rounded[k] = counts[k];
        exact += counts[k] == targets[k] ? 1 : 0;
        auto& b = report.per_true_count[targets[k]];
        ++b.windows;
        b.mae_continuous += std::abs(estimates[k] - y[k]);
        b.mae_rounded += std::abs(rounded[k] - y[k]);
    }
    for (auto& [count, b] : report.per_true_count) {
        b.mae_continuous /= static_cast<double>(b.windows);
        b.mae_rounded /= static_cast<double>(b.windows);
    }
    report.mae_continuous = mae(estimates, y);
    report.mae_rounded = mae(rounded, y);
    report.exact_count_accuracy = static_cast<double>(exact) / static_cast<double>(n);
    return report;
}

EvalReport evaluate(const CountModel& model, const FeatureDataset& test) {
    if (test.size() == 0) {
        throw InvalidInput("evaluate: empty test set");
    }
    if (test.spec.f0_hz != model.spec.f0_hz || test.spec.max_harmonic != model.spec.max_harmonic) {
        throw InvalidInput("evaluate: dataset f0/max_harmonic differ from the model's");
    }
    const auto columns = test.select(model.spec.features);
    const auto z = apply_normalization(columns.x, model.norm);
    std::vector<double> estimates;
    std::vector<int> counts;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const double e = forward(model.params, z.row(r));
        estimates.push_back(e);
        counts.push_back(round_count(e));
    }
    return make_report(test.t_start_s, test.y, estimates, counts);
}

double median_count(std::span<const int> values) {
    if (values.empty()) {
        throw InvalidInput("median of an empty set");
    }
    std::vector<int> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted[(sorted.size() - 1) / 2];
}

EvalReport baseline_report(std::span<const int> train_y, std::span<const int> test_y) {
    if (test_y.empty()) {
        throw InvalidInput("baseline_report: empty test targets");
    }
    const double m = median_count(train_y);
    std::vector<double> t(test_y.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = static_cast<double>(k);
    }
    const std::vector<double> estimates(test_y.size(), m);
    const std::vector<int> counts(test_y.size(), round_count(m));
    return make_report(t, test_y, estimates, counts);
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "format=feeder-nilm-report-1\n";
    out << "fingerprint=" << (report.fingerprint.empty() ? "-" : report.fingerprint) << "\n";
    out << "n_test_windows=" << report.n_test_windows << "\n";
    out << "mae_continuous=" << format_real(report.mae_continuous) << "\n";
    out << "mae_rounded=" << format_real(report.mae_rounded) << "\n";
    out << "exact_count_accuracy=" << format_real(report.exact_count_accuracy) << "\n";
    for (const auto& [count, b] : report.per_true_count) {
        out << "count." << count << ".windows=" << b.windows << "\n";
        out << "count." << count << ".mae_continuous=" << format_real(b.mae_continuous) << "\n";
        out << "count." << count << ".mae_rounded=" << format_real(b.mae_rounded) << "\n";
    }
    return out.str();
}

EvalReport report_from_text(const std::string& text, const std::string& source_name) {
    EvalReport report;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool have_format = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = source_name + ":" + std::to_string(line_no);
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ContractViolation(where + ": expected key=value");
        }
        const std::string key(body.substr(0, eq));
        const std::string value(body.substr(eq + 1));
        try {
            if (key == "format") {
                if (value != "feeder-nilm-report-1") {
                    throw ContractViolation(where + ": unsupported report format '" + value + "'");
                }
                have_format = true;
            } else if (key == "fingerprint") {
                report.fingerprint = value == "-" ? "" : value;
            } else if (key == "n_test_windows") {
                report.n_test_windows = static_cast<std::size_t>(parse_integer(value, where));
            } else if (key == "mae_continuous") {
                report.mae_continuous = parse_real(value, where);
            } else if (key == "mae_rounded") {
                report.mae_rounded = parse_real(value, where);
            } else if (key == "exact_count_accuracy") {
                report.exact_count_accuracy = parse_real(value, where);
            } else if (key.rfind("count.", 0) == 0) {
                const auto dot = key.find('.', 6);
                if (dot == std::string::npos) {
                    throw ContractViolation(where + ": malformed key '" + key + "'");
                }
                const auto count = static_cast<int>(parse_integer(key.substr(6, dot - 6), where));
                const auto field = key.substr(dot + 1);
                auto& b = report.per_true_count[count];
                if (field == "windows") {
                    b.windows = static_cast<std::size_t>(parse_integer(value, where));
                } else if (field == "mae_continuous") {
                    b.mae_continuous = parse_real(value, where);
                } else if (field == "mae_rounded") {
                    b.mae_rounded = parse_real(value, where);
                } else {
                    throw ContractViolation(where + ": unknown key '" + key + "'");
                }
            } else {
                throw ContractViolation(where + ": unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            throw ContractViolation(e.what());
        }
    }
    if (!have_format) {
        throw ContractViolation(source_name + ": not a report file");
    }
    return report;
}

std::string residuals_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "t_start_s,y,y_hat,count,residual\n";
    for (std::size_t k = 0; k < report.targets.size(); ++k) {
        out << format_real(report.t_start_s[k]) << "," << report.targets[k] << "," << format_real(report.estimates[k])
            << "," << report.counts[k] << "," << format_real(report.estimates[k] - report.targets[k]) << "\n";
    }
    return out.str();
}

}  // namespace feeder_nilm
