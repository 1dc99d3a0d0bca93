#include "feeder_nilm/dataset.hpp"

#include <cmath>
#include <sstream>

#include "feeder_nilm/error.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace feeder_nilm {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

}  // namespace

FeatureDataset FeatureDataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) {
        throw InvalidInput("dataset slice out of range");
    }
    FeatureDataset out;
    out.spec = spec;
    out.window_s = window_s;
    out.stride_s = stride_s;
    out.x = Matrix(0, x.cols());
    for (auto r = begin; r < end; ++r) {
        out.t_start_s.push_back(t_start_s[r]);
        out.x.append_row(x.row(r));
        out.y.push_back(y[r]);
        out.valid.push_back(valid[r]);
    }
    return out;
}

FeatureDataset FeatureDataset::select(const std::vector<FeatureId>& features) const {
    std::vector<std::size_t> columns;
    for (auto id : features) {
        std::size_t c = 0;
        while (c < spec.features.size() && spec.features[c] != id) {
            ++c;
        }
        if (c == spec.features.size()) {
            throw InvalidInput("dataset has no feature '" + std::string(feature_name(id)) + "'");
        }
        columns.push_back(c);
    }
    FeatureDataset out = *this;
    out.spec.features = features;
    out.x = Matrix(0, columns.size());
    std::vector<double> row(columns.size());
    for (std::size_t r = 0; r < size(); ++r) {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            row[k] = x(r, columns[k]);
        }
        out.x.append_row(row);
    }
    return out;
}

std::size_t window_count(std::size_t total, std::size_t window, std::size_t stride) {
    if (window == 0 || stride == 0 || window > total) {
        return 0;
    }
    return (total - window) / stride + 1;
}

FeatureDataset featurize(const Waveform& voltage, const Waveform& current, const GroundTruthSeries& truth,
                         double window_s, double stride_s, const FeatureSpec& spec) {
    if (voltage.size() != current.size() || voltage.sample_rate_hz() != current.sample_rate_hz() ||
        voltage.start_time_s() != current.start_time_s()) {
        throw InvalidInput("featurize: voltage and current are not aligned");
    }
    if (!(window_s > 0.0) || !(stride_s > 0.0)) {
        throw InvalidInput("featurize: window and stride must be positive");
    }
    const double rate = voltage.sample_rate_hz();
    const auto window_samples = static_cast<std::size_t>(std::llround(window_s * rate));
    const auto stride_samples = static_cast<std::size_t>(std::llround(stride_s * rate));
    if (window_samples == 0 || stride_samples == 0) {
        throw InvalidInput("featurize: window or stride shorter than one sample");
    }
    if (window_samples > voltage.size()) {
        throw InvalidInput("featurize: window of " + format_real(window_s) + " s exceeds the " +
                           format_real(voltage.duration_s()) + " s trace");
    }
    const auto n_windows = window_count(voltage.size(), window_samples, stride_samples);
    const auto targets = window_targets(truth, window_s, stride_s);
    if (targets.size() < n_windows) {
        throw InvalidInput("featurize: ground truth covers " + std::to_string(targets.size()) + " windows, trace has " +
                           std::to_string(n_windows));
    }

    const WindowFeaturizer featurizer(spec, window_samples, rate);
    FeatureDataset ds;
    ds.spec = spec;
    ds.window_s = window_s;
    ds.stride_s = stride_s;
    ds.x = Matrix(0, spec.size());
    for (std::size_t k = 0; k < n_windows; ++k) {
        const WindowView view{k * stride_samples, window_samples};
        const auto row = featurizer.compute(voltage.window(view), current.window(view));
        ds.t_start_s.push_back(voltage.start_time_s() + static_cast<double>(view.offset_samples) / rate);
        ds.x.append_row(row.values);
        ds.y.push_back(targets[k]);
        ds.valid.push_back(row.valid);
    }
    return ds;
}

std::string dataset_to_csv(const FeatureDataset& dataset) {
    std::ostringstream out;
    out << "# window_s=" << format_real(dataset.window_s) << "\n";
    out << "# stride_s=" << format_real(dataset.stride_s) << "\n";
    out << "# f0_hz=" << format_real(dataset.spec.f0_hz) << "\n";
    out << "# max_harmonic=" << dataset.spec.max_harmonic << "\n";
    out << "t_start_s";
    for (const auto& name : dataset.spec.names()) {
        out << "," << name;
    }
    out << ",y,valid\n";
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        out << format_real(dataset.t_start_s[r]);
        for (double v : dataset.x.row(r)) {
            out << "," << format_real(v);
        }
        out << "," << dataset.y[r] << "," << (dataset.valid[r] ? 1 : 0) << "\n";
    }
    return out.str();
}

namespace {

FeatureDataset parse_dataset(const std::string& text, const std::string& source_name) {
    FeatureDataset ds;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool have_header = false;
    bool have_window = false;
    bool have_stride = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto where = source_name + ":" + std::to_string(line_no);
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto body = trim(std::string_view(line).substr(1));
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) {
                continue;
            }
            const auto key = trim(body.substr(0, eq));
            const auto value = trim(body.substr(eq + 1));
            if (key == "window_s") {
                ds.window_s = parse_real(value, where);
                have_window = true;
            } else if (key == "stride_s") {
                ds.stride_s = parse_real(value, where);
                have_stride = true;
            } else if (key == "f0_hz") {
                ds.spec.f0_hz = parse_real(value, where);
            } else if (key == "max_harmonic") {
                ds.spec.max_harmonic = static_cast<int>(parse_integer(value, where));
            }
            continue;
        }
        const auto cells = split_csv(line);
        if (!have_header) {
            if (cells.size() < 4 || cells.front() != "t_start_s" || cells[cells.size() - 2] != "y" ||
                cells.back() != "valid") {
                throw ContractViolation(where + ": expected header 't_start_s,<features...>,y,valid'");
            }
            ds.spec.features.clear();
            for (std::size_t c = 1; c + 2 < cells.size(); ++c) {
                const auto id = parse_feature_id(cells[c]);
                if (!id) {
                    throw ContractViolation(where + ": unknown feature '" + cells[c] + "'");
                }
                ds.spec.features.push_back(*id);
            }
            ds.x = Matrix(0, ds.spec.size());
            have_header = true;
            continue;
        }
        if (cells.size() != ds.spec.size() + 3) {
            throw ContractViolation(where + ": expected " + std::to_string(ds.spec.size() + 3) + " columns, found " +
                                    std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (std::size_t c = 1; c + 2 < cells.size(); ++c) {
            row.push_back(parse_real(cells[c], where));
        }
        const auto y = parse_integer(cells[cells.size() - 2], where);
        const auto valid = parse_integer(cells.back(), where);
        if (y < 0 || (valid != 0 && valid != 1)) {
            throw ContractViolation(where + ": y must be non-negative and valid 0 or 1");
        }
        ds.t_start_s.push_back(parse_real(cells[0], where));
        ds.x.append_row(row);
        ds.y.push_back(static_cast<int>(y));
        ds.valid.push_back(valid == 1);
    }
    if (!have_header || !have_window || !have_stride) {
        throw ContractViolation(source_name + ": missing dataset header or window metadata");
    }
    try {
        ds.spec.validate();
    } catch (const InvalidInput& e) {
        throw ContractViolation(source_name + ": " + e.what());
    }
    return ds;
}

}  // namespace

FeatureDataset dataset_from_csv(const std::string& text, const std::string& source_name) {
    try {
        return parse_dataset(text, source_name);
    } catch (const ConfigError& e) {
        throw ContractViolation(e.what());
    }
}

}  // namespace feeder_nilm
