#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cwt/dataset.hpp"
#include "cwt/loss.hpp"
#include "cwt/rng.hpp"

namespace cwt {

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// One fully-connected layer; an empty bias vector means bias disabled.
struct Layer {
    Matrix weights;            // out x in
    std::vector<double> bias;  // out, or empty
};

// Multilayer perceptron with tanh hidden activations and linear output.
// Flattening order is fixed: layers in order, weights (row-major) before
// bias within each layer.
struct ModelParams {
    std::vector<Layer> layers;

    std::vector<std::size_t> layer_dims() const;
    std::size_t param_count() const;
};

ModelParams init_model(const std::vector<std::size_t>& dims, Rng& rng,
                       bool with_bias = true);
ModelParams init_model(const std::vector<std::size_t>& dims, std::uint64_t seed,
                       bool with_bias = true);

WeightVector flatten_weights(const ModelParams& model);
void unflatten_weights(ModelParams& model, std::span<const double> flat);

struct LambdaSchedule {
    double initial = 0.0;
    double per_epoch_increment = 0.0;  // the ramp adds this at each epoch end

    double at(std::size_t epoch) const {
        return initial + static_cast<double>(epoch) * per_epoch_increment;
    }
};

enum class LossMode { Concatenated, PerLayer };

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.08;
    std::uint64_t seed = 0;
    LambdaSchedule schedule;
    LossMode mode = LossMode::Concatenated;
    std::vector<double> per_layer_lambdas;  // PerLayer mode: one per layer
    bool include_biases = true;             // biases join the penalized vector
};

struct CombinedLoss {
    double task_loss = 0.0;
    // Concatenated mode: the raw L(w_net). PerLayer mode: the lambda-weighted
    // sum over layers (the quantity actually added to the total).
    double comp_loss = 0.0;
    double total = 0.0;
};

// Softmax cross-entropy plus the sparsity penalty over the model weights.
CombinedLoss combined_loss(const ModelParams& model, const Dataset& batch,
                           double lambda, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    double lambda = 0.0;
    double task_loss = 0.0;
    double comp_loss = 0.0;
    double total_loss = 0.0;
    double train_accuracy = 0.0;
    double eval_accuracy = 0.0;
};

struct TrainResult {
    ModelParams model;
    std::vector<EpochRecord> log;
};

// Minibatch SGD on task loss + lambda * L(w_net) (or the per-layer variant).
// Deterministic for a given (model, data, config). Throws std::runtime_error
// naming the epoch and batch if the loss turns non-finite.
TrainResult train(ModelParams model, const TrainEvalSplit& data,
                  const TrainConfig& config);

// Forward pass helpers.
std::vector<double> predict_logits(const ModelParams& model,
                                   std::span<const double> features,
                                   std::size_t n_rows);
double accuracy(const ModelParams& model, const Dataset& ds);

// Parameter gradients of the combined loss, in model shape, averaged over
// the batch. Exposed for gradient verification.
ModelParams combined_grad(const ModelParams& model, const Dataset& batch,
                          double lambda, const TrainConfig& config);

void write_epoch_log(std::ostream& os, std::span<const EpochRecord> log);

// Checkpoint container: "MLPC" | version u16 | layer count u16 |
// u32 dims manifest | per layer a weight tensor and a bias tensor.
void save_checkpoint(const std::string& path, const ModelParams& model);
ModelParams load_checkpoint(const std::string& path);

}  // namespace cwt
