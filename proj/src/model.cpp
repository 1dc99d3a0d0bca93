#include "feeder_nilm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "feeder_nilm/devices.hpp"
#include "feeder_nilm/error.hpp"
#include "feeder_nilm/keyvalue.hpp"

namespace feeder_nilm {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double huber_derivative(double residual, double delta = 1.0) {
    return std::clamp(residual, -delta, delta);
}

std::vector<double> flatten(const std::vector<Layer>& layers) {
    std::vector<double> out;
    for (const auto& layer : layers) {
        out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

Gradient zero_like(const RegressorParams& params) {
    Gradient g;
    for (const auto& layer : params.layers) {
        g.push_back({Matrix(layer.weights.rows(), layer.weights.cols()), std::vector<double>(layer.bias.size(), 0.0)});
    }
    return g;
}

void check_input(const RegressorParams& params, std::span<const double> x) {
    if (x.size() != params.input_size()) {
        throw InvalidInput("model expects " + std::to_string(params.input_size()) + " inputs, got " +
                           std::to_string(x.size()));
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw InvalidInput("model input contains a non-finite value");
        }
    }
}

// Activations of one forward pass: pre[l] = W_l a[l] + b_l, a[l + 1] = relu(pre[l]).
struct Trace {
    std::vector<std::vector<double>> inputs;  // a[l], the input seen by layer l
    std::vector<std::vector<double>> pre;
    double output = 0.0;
};

void run_forward(const RegressorParams& params, std::span<const double> x, Trace& trace) {
    const auto n_layers = params.layers.size();
    trace.inputs.resize(n_layers);
    trace.pre.resize(n_layers);
    trace.inputs[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = params.layers[l];
        const auto& in = trace.inputs[l];
        auto& z = trace.pre[l];
        z.assign(layer.bias.begin(), layer.bias.end());
        for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
            const auto w = layer.weights.row(o);
            double acc = 0.0;
            for (std::size_t i = 0; i < in.size(); ++i) {
                acc += w[i] * in[i];
            }
            z[o] += acc;
        }
        if (l + 1 < n_layers) {
            auto& next = trace.inputs[l + 1];
            next.resize(z.size());
            for (std::size_t o = 0; o < z.size(); ++o) {
                next[o] = z[o] > 0.0 ? z[o] : 0.0;
            }
        }
    }
    trace.output = softplus(trace.pre.back()[0]);
}

void check_batch(const RegressorParams& params, const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0) {
        throw InvalidInput("empty batch");
    }
    if (x.rows() != y.size()) {
        throw InvalidInput("batch has " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                           " targets");
    }
    if (x.cols() != params.input_size()) {
        throw InvalidInput("batch width " + std::to_string(x.cols()) + " does not match model input " +
                           std::to_string(params.input_size()));
    }
    for (double v : x.data()) {
        if (!std::isfinite(v)) {
            throw InvalidInput("batch contains a non-finite feature value");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw InvalidInput("batch contains a non-finite target");
        }
    }
}

// Data loss and gradient summed (not averaged) over the given rows, in order.
double accumulate_rows(const RegressorParams& params, const Matrix& x, std::span<const double> y,
                       std::span<const std::size_t> rows, Gradient& grad) {
    Trace trace;
    std::vector<double> delta;
    std::vector<double> prev;
    double loss = 0.0;
    for (auto r : rows) {
        run_forward(params, x.row(r), trace);
        const double residual = trace.output - y[r];
        loss += huber(residual);

        delta.assign(1, huber_derivative(residual) * sigmoid(trace.pre.back()[0]));
        for (std::size_t l = params.layers.size(); l-- > 0;) {
            const auto& layer = params.layers[l];
            auto& g = grad[l];
            const auto& in = trace.inputs[l];
            for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
                auto gw = g.weights.row(o);
                for (std::size_t i = 0; i < in.size(); ++i) {
                    gw[i] += delta[o] * in[i];
                }
                g.bias[o] += delta[o];
            }
            if (l == 0) {
                break;
            }
            prev.assign(in.size(), 0.0);
            for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
                const auto w = layer.weights.row(o);
                for (std::size_t i = 0; i < in.size(); ++i) {
                    prev[i] += w[i] * delta[o];
                }
            }
            const auto& z_prev = trace.pre[l - 1];
            for (std::size_t i = 0; i < prev.size(); ++i) {
                if (!(z_prev[i] > 0.0)) {
                    prev[i] = 0.0;
                }
            }
            delta.swap(prev);
        }
    }
    return loss;
}

LossGradient batch_loss_gradient(const RegressorParams& params, const Matrix& x, std::span<const double> y,
                                 std::span<const std::size_t> rows, double l2) {
    LossGradient out;
    out.gradient = zero_like(params);
    const double n = static_cast<double>(rows.size());
    double loss = accumulate_rows(params, x, y, rows, out.gradient) / n;
    double penalty = 0.0;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto w = params.layers[l].weights.data();
        auto gw = out.gradient[l].weights.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            penalty += w[k] * w[k];
            gw[k] = gw[k] / n + l2 * w[k];
        }
        for (auto& gb : out.gradient[l].bias) {
            gb /= n;
        }
    }
    out.loss = loss + l2 * penalty / 2.0;
    return out;
}

std::vector<std::size_t> identity_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t k = 0; k < n; ++k) {
        rows[k] = k;
    }
    return rows;
}

}  // namespace

std::size_t RegressorParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.weights.data().size() + l.bias.size();
    }
    return n;
}

void RegressorParams::validate() const {
    if (layer_sizes.size() < 2 || layer_sizes.back() != 1) {
        throw InvalidInput("layer sizes must list an input and end with a single output");
    }
    if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
        throw InvalidInput("layer sizes must be >= 1");
    }
    if (layers.size() + 1 != layer_sizes.size()) {
        throw InvalidInput("layer count does not match layer sizes");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weights.rows() != layer_sizes[l + 1] || layer.weights.cols() != layer_sizes[l] ||
            layer.bias.size() != layer_sizes[l + 1]) {
            throw InvalidInput("layer " + std::to_string(l) + " has inconsistent dimensions");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weights.data().begin(), layer.weights.data().end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
            throw InvalidInput("layer " + std::to_string(l) + " has non-finite parameters");
        }
    }
}

void for_each_parameter(std::vector<Layer>& layers, const std::function<void(double&)>& fn) {
    for (auto& layer : layers) {
        for (auto& w : layer.weights.data()) {
            fn(w);
        }
        for (auto& b : layer.bias) {
            fn(b);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidInput("learning_rate must be finite and non-negative");
    }
    if (batch_size < 1 || epochs < 1) {
        throw InvalidInput("batch_size and epochs must be >= 1");
    }
    if (!(l2_penalty >= 0.0)) {
        throw InvalidInput("l2_penalty must be non-negative");
    }
}

RegressorParams init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
    RegressorParams params;
    params.layer_sizes = layer_sizes;
    params.init_seed = seed;
    if (layer_sizes.size() < 2 || layer_sizes.back() != 1) {
        throw InvalidInput("layer sizes must list an input and end with a single output");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto fan_in = layer_sizes[l];
        const auto fan_out = layer_sizes[l + 1];
        if (fan_in == 0 || fan_out == 0) {
            throw InvalidInput("layer sizes must be >= 1");
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Layer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        for (auto& w : layer.weights.data()) {
            w = dist(rng);
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double huber(double residual, double delta) {
    const double a = std::abs(residual);
    return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

double forward(const RegressorParams& params, std::span<const double> x) {
    check_input(params, x);
    Trace trace;
    run_forward(params, x, trace);
    return trace.output;
}

LossGradient loss_and_gradient(const RegressorParams& params, const Matrix& batch_x, std::span<const double> batch_y,
                               double l2) {
    check_batch(params, batch_x, batch_y);
    const auto rows = identity_rows(batch_x.rows());
    return batch_loss_gradient(params, batch_x, batch_y, rows, l2);
}

double data_loss(const RegressorParams& params, const Matrix& x, std::span<const double> y) {
    check_batch(params, x, y);
    Trace trace;
    double loss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        run_forward(params, x.row(r), trace);
        loss += huber(trace.output - y[r]);
    }
    return loss / static_cast<double>(x.rows());
}

std::vector<std::size_t> epoch_order(std::size_t n_rows, std::uint64_t shuffle_seed, std::size_t epoch) {
    auto rows = identity_rows(n_rows);
    std::mt19937_64 rng(derive_seed(shuffle_seed, epoch));
    std::shuffle(rows.begin(), rows.end(), rng);
    return rows;
}

TrainResult train(const RegressorParams& initial, const Matrix& train_x, std::span<const double> train_y,
                  const Matrix& val_x, std::span<const double> val_y, const TrainConfig& config,
                  const EpochOrderFn& order) {
    config.validate();
    initial.validate();
    if (train_x.rows() == 0 || val_x.rows() == 0) {
        throw InvalidInput("train: training and validation splits must be non-empty");
    }
    check_batch(initial, train_x, train_y);
    check_batch(initial, val_x, val_y);

    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;

    TrainResult result;
    result.params = initial;
    RegressorParams params = initial;
    const auto n_params = params.parameter_count();
    std::vector<double> m(n_params, 0.0);
    std::vector<double> v(n_params, 0.0);
    std::uint64_t step = 0;

    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    const auto n = train_x.rows();

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto rows = order ? order(epoch, n) : epoch_order(n, config.shuffle_seed, epoch);
        if (rows.size() != n) {
            throw InvalidInput("train: epoch order has the wrong length");
        }
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const auto end = std::min(n, begin + config.batch_size);
            const std::span<const std::size_t> batch(rows.data() + begin, end - begin);
            const auto lg = batch_loss_gradient(params, train_x, train_y, batch, config.l2_penalty);
            const auto g = flatten(lg.gradient);
            ++step;
            std::size_t k = 0;
            if (config.optimizer == Optimizer::adam) {
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for_each_parameter(params.layers, [&](double& w) {
                    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                    const double update = config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
                    if (update != 0.0) {
                        w -= update;
                    }
                    ++k;
                });
            } else {
                for_each_parameter(params.layers, [&](double& w) {
                    const double update = config.learning_rate * g[k++];
                    if (update != 0.0) {
                        w -= update;
                    }
                });
            }
        }

        const EpochLoss losses{data_loss(params, train_x, train_y), data_loss(params, val_x, val_y)};
        result.history.push_back(losses);
        if (!std::isfinite(losses.train) || !std::isfinite(losses.validation)) {
            throw InvalidInput("train: loss diverged at epoch " + std::to_string(epoch));
        }
        if (losses.validation < best_val) {
            best_val = losses.validation;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (config.patience > 0 && ++since_best >= config.patience) {
            break;
        }
    }
    return result;
}

int round_count(double estimate) {
    const double r = std::floor(estimate + 0.5);
    return r > 0.0 ? static_cast<int>(r) : 0;
}

int predict_count(const RegressorParams& params, std::span<const double> x) {
    return round_count(forward(params, x));
}

std::string model_to_text(const CountModel& model) {
    const auto& p = model.params;
    std::ostringstream out;
    out << "feeder-nilm-model " << kModelFormatVersion << "\n";
    out << "layer_sizes";
    for (auto s : p.layer_sizes) {
        out << " " << s;
    }
    out << "\nactivations";
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        out << (l + 1 < p.layers.size() ? " relu" : " softplus");
    }
    out << "\ninit_seed " << p.init_seed << "\n";
    out << "shuffle_seed " << model.shuffle_seed << "\n";
    out << "fingerprint " << (model.fingerprint.empty() ? "-" : model.fingerprint) << "\n";
    out << "f0_hz " << format_real(model.spec.f0_hz) << "\n";
    out << "max_harmonic " << model.spec.max_harmonic << "\n";
    out << "features";
    for (const auto& name : model.spec.names()) {
        out << " " << name;
    }
    out << "\nnorm_mean";
    for (double v : model.norm.mean) {
        out << " " << format_real(v);
    }
    out << "\nnorm_std";
    for (double v : model.norm.stddev) {
        out << " " << format_real(v);
    }
    out << "\nnorm_kept";
    for (bool k : model.norm.kept) {
        out << " " << (k ? 1 : 0);
    }
    out << "\n";
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
            out << "w" << l;
            for (double v : layer.weights.row(o)) {
                out << " " << format_real(v);
            }
            out << "\n";
        }
        out << "b" << l;
        for (double v : layer.bias) {
            out << " " << format_real(v);
        }
        out << "\n";
    }
    return out.str();
}

CountModel model_from_text(const std::string& text, const std::string& source_name) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    CountModel model;
    auto& p = model.params;
    bool have_magic = false;
    std::vector<std::string> activations;
    // Weight rows read so far per layer.
    std::vector<std::vector<std::vector<double>>> rows;
    std::vector<std::vector<double>> biases;

    auto fail = [&](const std::string& msg) -> ContractViolation {
        return ContractViolation(source_name + ":" + std::to_string(line_no) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++line_no;
        const auto where = source_name + ":" + std::to_string(line_no);
        auto words = split_words(line);
        if (words.empty()) {
            continue;
        }
        const auto key = words.front();
        words.erase(words.begin());
        try {
            if (!have_magic) {
                if (key != "feeder-nilm-model" || words.size() != 1) {
                    throw fail("not a model file");
                }
                if (parse_integer(words[0], where) != kModelFormatVersion) {
                    throw fail("unsupported model format version " + words[0]);
                }
                have_magic = true;
            } else if (key == "layer_sizes") {
                for (const auto& w : words) {
                    const auto s = parse_integer(w, where);
                    if (s < 1) {
                        throw fail("layer sizes must be >= 1");
                    }
                    p.layer_sizes.push_back(static_cast<std::size_t>(s));
                }
                if (p.layer_sizes.size() < 2) {
                    throw fail("need at least two layer sizes");
                }
                rows.assign(p.layer_sizes.size() - 1, {});
                biases.assign(p.layer_sizes.size() - 1, {});
            } else if (key == "activations") {
                activations = words;
            } else if (key == "init_seed") {
                p.init_seed = std::stoull(words.at(0));
            } else if (key == "shuffle_seed") {
                model.shuffle_seed = std::stoull(words.at(0));
            } else if (key == "fingerprint") {
                model.fingerprint = words.at(0) == "-" ? "" : words.at(0);
            } else if (key == "f0_hz") {
                model.spec.f0_hz = parse_real(words.at(0), where);
            } else if (key == "max_harmonic") {
                model.spec.max_harmonic = static_cast<int>(parse_integer(words.at(0), where));
            } else if (key == "features") {
                model.spec.features.clear();
                for (const auto& w : words) {
                    const auto id = parse_feature_id(w);
                    if (!id) {
                        throw fail("unknown feature '" + w + "'");
                    }
                    model.spec.features.push_back(*id);
                }
            } else if (key == "norm_mean" || key == "norm_std") {
                auto& dst = key == "norm_mean" ? model.norm.mean : model.norm.stddev;
                for (const auto& w : words) {
                    dst.push_back(parse_real(w, where));
                }
            } else if (key == "norm_kept") {
                for (const auto& w : words) {
                    model.norm.kept.push_back(parse_boolean(w, where));
                }
            } else if ((key[0] == 'w' || key[0] == 'b') && key.size() > 1) {
                const auto l = static_cast<std::size_t>(parse_integer(std::string_view(key).substr(1), where));
                if (l >= rows.size()) {
                    throw fail("parameters for unknown layer " + key);
                }
                std::vector<double> values;
                for (const auto& w : words) {
                    values.push_back(parse_real(w, where));
                }
                if (key[0] == 'w') {
                    rows[l].push_back(std::move(values));
                } else {
                    biases[l] = std::move(values);
                }
            } else {
                throw fail("unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            throw ContractViolation(e.what());
        } catch (const std::logic_error&) {
            throw fail("malformed '" + key + "' line");
        }
    }
    if (!have_magic || p.layer_sizes.empty()) {
        throw ContractViolation(source_name + ": incomplete model file");
    }
    for (std::size_t l = 0; l < rows.size(); ++l) {
        const auto fan_in = p.layer_sizes[l];
        const auto fan_out = p.layer_sizes[l + 1];
        if (rows[l].size() != fan_out) {
            throw ContractViolation(source_name + ": layer " + std::to_string(l) + " has " +
                                    std::to_string(rows[l].size()) + " weight rows, expected " +
                                    std::to_string(fan_out));
        }
        Layer layer{Matrix(0, fan_in), biases[l]};
        for (const auto& r : rows[l]) {
            if (r.size() != fan_in) {
                throw ContractViolation(source_name + ": layer " + std::to_string(l) + " weight row width mismatch");
            }
            layer.weights.append_row(r);
        }
        p.layers.push_back(std::move(layer));
    }
    if (activations.size() != p.layers.size() ||
        !std::all_of(activations.begin(), activations.end() - 1, [](const std::string& a) { return a == "relu"; }) ||
        activations.back() != "softplus") {
        throw ContractViolation(source_name + ": activations must be relu... softplus");
    }
    const auto width = model.norm.mean.size();
    if (model.norm.stddev.size() != width || model.norm.kept.size() != width || width != model.spec.size() ||
        model.norm.output_width() != p.input_size()) {
        throw ContractViolation(source_name + ": normalization statistics do not match features and input size");
    }
    try {
        p.validate();
        model.spec.validate();
    } catch (const InvalidInput& e) {
        throw ContractViolation(source_name + ": " + e.what());
    }
    return model;
}

}  // namespace feeder_nilm
