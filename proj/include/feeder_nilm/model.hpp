#pragma once

// Feedforward count regressor: affine + ReLU hidden layers, affine + softplus
// output, trained from scratch with mini-batch gradient descent.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "feeder_nilm/features.hpp"
#include "feeder_nilm/matrix.hpp"

namespace feeder_nilm {

struct Layer {
    Matrix weights;  // fan_out x fan_in
    std::vector<double> bias;

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct RegressorParams {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., 1
    std::vector<Layer> layers;
    std::uint64_t init_seed = 0;

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t parameter_count() const;
    /// Throws InvalidInput on inconsistent shapes or non-finite values.
    void validate() const;

    friend bool operator==(const RegressorParams&, const RegressorParams&) = default;
};

/// Gradient with the same layout as RegressorParams::layers.
using Gradient = std::vector<Layer>;

/// Visits every scalar parameter (weights row-major, then bias, layer by layer).
void for_each_parameter(std::vector<Layer>& layers, const std::function<void(double&)>& fn);

enum class Optimizer { sgd, adam };

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 16;
    std::size_t epochs = 300;
    double l2_penalty = 1e-4;
    std::uint64_t shuffle_seed = 7;
    std::size_t patience = 50;  // epochs without validation improvement; 0 disables early stop
    Optimizer optimizer = Optimizer::adam;

    void validate() const;
};

struct EpochLoss {
    double train = 0.0;
    double validation = 0.0;

    friend bool operator==(const EpochLoss&, const EpochLoss&) = default;
};

struct TrainResult {
    RegressorParams params;  // best validation loss seen
    std::vector<EpochLoss> history;
    std::size_t best_epoch = 0;
};

struct LossGradient {
    double loss = 0.0;
    Gradient gradient;
};

/// Glorot-uniform weights, zero biases.
RegressorParams init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed);

double softplus(double z);
double huber(double residual, double delta = 1.0);

double forward(const RegressorParams& params, std::span<const double> x);

/// mean huber(y_hat - y) + l2 * ||W||^2 / 2 (weights only), with its exact gradient.
LossGradient loss_and_gradient(const RegressorParams& params, const Matrix& batch_x, std::span<const double> batch_y,
                               double l2);

/// Mean data loss (no penalty) over a dataset.
double data_loss(const RegressorParams& params, const Matrix& x, std::span<const double> y);

/// Row visiting order for one epoch; batches are consecutive runs of it.
std::vector<std::size_t> epoch_order(std::size_t n_rows, std::uint64_t shuffle_seed, std::size_t epoch);
using EpochOrderFn = std::function<std::vector<std::size_t>(std::size_t epoch, std::size_t n_rows)>;

TrainResult train(const RegressorParams& initial, const Matrix& train_x, std::span<const double> train_y,
                  const Matrix& val_x, std::span<const double> val_y, const TrainConfig& config,
                  const EpochOrderFn& order = {});

/// round-half-up of forward(), floored at zero.
int predict_count(const RegressorParams& params, std::span<const double> x);
int round_count(double estimate);

/// A trained network together with everything needed to apply it to a dataset.
struct CountModel {
    RegressorParams params;
    FeatureSpec spec;   // raw feature columns consumed, in order
    NormStats norm;     // fitted on the training split of those columns
    std::uint64_t shuffle_seed = 0;
    std::string fingerprint;

    friend bool operator==(const CountModel&, const CountModel&) = default;
};

inline constexpr int kModelFormatVersion = 1;

std::string model_to_text(const CountModel& model);
CountModel model_from_text(const std::string& text, const std::string& source_name);

}  // namespace feeder_nilm
