#include "cwt/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cwt/tensor_io.hpp"

namespace cwt {

namespace {

void check_model(const ModelParams& model) {
    if (model.layers.empty()) throw std::invalid_argument("model has no layers");
    for (std::size_t i = 0; i + 1 < model.layers.size(); ++i) {
        if (model.layers[i].weights.rows != model.layers[i + 1].weights.cols) {
            throw std::invalid_argument("incompatible consecutive layer dimensions");
        }
    }
    for (const auto& layer : model.layers) {
        if (!layer.bias.empty() && layer.bias.size() != layer.weights.rows) {
            throw std::invalid_argument("bias length must match output dimension");
        }
        if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols) {
            throw std::invalid_argument("weight matrix storage mismatch");
        }
    }
}

// acts[0] is the input batch; acts[i+1] the output of layer i (tanh for
// hidden layers, raw logits for the last).
std::vector<std::vector<double>> forward_batch(const ModelParams& model,
                                               std::span<const double> x,
                                               std::size_t n) {
    std::vector<std::vector<double>> acts;
    acts.reserve(model.layers.size() + 1);
    acts.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        const std::size_t in = layer.weights.cols;
        const std::size_t out = layer.weights.rows;
        std::vector<double> z(n * out);
        const std::vector<double>& a = acts.back();
        for (std::size_t r = 0; r < n; ++r) {
            const double* arow = a.data() + r * in;
            double* zrow = z.data() + r * out;
            for (std::size_t o = 0; o < out; ++o) {
                const double* wrow = layer.weights.data.data() + o * in;
                double s = layer.bias.empty() ? 0.0 : layer.bias[o];
                for (std::size_t i = 0; i < in; ++i) s += wrow[i] * arow[i];
                zrow[o] = s;
            }
        }
        if (l + 1 < model.layers.size()) {
            for (double& v : z) v = std::tanh(v);
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

// Mean cross-entropy and its gradient w.r.t. the logits (already divided
// by the batch size).
double softmax_ce(std::span<const double> logits, std::span<const int> labels,
                  std::size_t classes, std::vector<double>* dlogits) {
    const std::size_t n = labels.size();
    if (dlogits) dlogits->assign(n * classes, 0.0);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = logits.data() + r * classes;
        double m = row[0];
        for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
        const double log_sum = std::log(sum) + m;
        loss += log_sum - row[labels[r]];
        if (dlogits) {
            double* drow = dlogits->data() + r * classes;
            for (std::size_t c = 0; c < classes; ++c) {
                drow[c] = std::exp(row[c] - log_sum) / static_cast<double>(n);
            }
            drow[labels[r]] -= 1.0 / static_cast<double>(n);
        }
    }
    return loss / static_cast<double>(n);
}

ModelParams zeros_like(const ModelParams& model) {
    ModelParams g = model;
    for (auto& layer : g.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    return g;
}

// Task-loss gradient via backprop; returns batch-mean gradients in model
// shape and reports the batch task loss.
double task_backprop(const ModelParams& model, std::span<const double> x,
                     std::span<const int> labels, std::size_t n,
                     ModelParams& grads) {
    const auto acts = forward_batch(model, x, n);
    const std::size_t classes = model.layers.back().weights.rows;
    std::vector<double> delta;
    const double loss = softmax_ce(acts.back(), labels, classes, &delta);

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const auto& layer = model.layers[li];
        auto& g = grads.layers[li];
        const std::size_t in = layer.weights.cols;
        const std::size_t out = layer.weights.rows;
        const std::vector<double>& a = acts[li];
        for (std::size_t r = 0; r < n; ++r) {
            const double* drow = delta.data() + r * out;
            const double* arow = a.data() + r * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double d = drow[o];
                if (d == 0.0) continue;
                double* grow = g.weights.data.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) grow[i] += d * arow[i];
            }
            if (!g.bias.empty()) {
                for (std::size_t o = 0; o < out; ++o) g.bias[o] += drow[o];
            }
        }
        if (li > 0) {
            std::vector<double> prev(n * in, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const double* drow = delta.data() + r * out;
                double* prow = prev.data() + r * in;
                for (std::size_t o = 0; o < out; ++o) {
                    const double d = drow[o];
                    if (d == 0.0) continue;
                    const double* wrow = layer.weights.data.data() + o * in;
                    for (std::size_t i = 0; i < in; ++i) prow[i] += d * wrow[i];
                }
                for (std::size_t i = 0; i < in; ++i) {
                    const double t = a.data()[r * in + i];
                    prow[i] *= 1.0 - t * t;
                }
            }
            delta = std::move(prev);
        }
    }
    return loss;
}

// Visits parameter blocks in flattening order; skips biases when asked.
template <typename Model, typename Fn>
void for_each_block(Model& model, bool include_biases, Fn&& fn) {
    for (auto& layer : model.layers) {
        fn(layer.weights.data);
        if (include_biases && !layer.bias.empty()) fn(layer.bias);
    }
}

WeightVector flatten_for_penalty(const ModelParams& model, bool include_biases) {
    WeightVector flat;
    for_each_block(model, include_biases,
                   [&](const std::vector<double>& block) {
                       flat.insert(flat.end(), block.begin(), block.end());
                   });
    return flat;
}

// Adds lambda * dL(w_net)/dw into the gradient accumulator.
void add_penalty_grad(const ModelParams& model, ModelParams& grads,
                      double lambda, const TrainConfig& config) {
    if (config.mode == LossMode::Concatenated) {
        if (lambda == 0.0) return;
        const WeightVector w = flatten_for_penalty(model, config.include_biases);
        const WeightVector g = compressibility_grad(w);
        std::size_t off = 0;
        for_each_block(grads, config.include_biases,
                       [&](std::vector<double>& block) {
                           for (double& v : block) v += lambda * g[off++];
                       });
        return;
    }
    // Per-layer: lambda_i * dL(w^(i)) for each layer's own parameter vector.
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const double li_lambda = config.per_layer_lambdas[li];
        if (li_lambda == 0.0) continue;
        const auto& layer = model.layers[li];
        WeightVector w(layer.weights.data);
        if (config.include_biases) {
            w.insert(w.end(), layer.bias.begin(), layer.bias.end());
        }
        const WeightVector g = compressibility_grad(w);
        auto& gl = grads.layers[li];
        std::size_t off = 0;
        for (double& v : gl.weights.data) v += li_lambda * g[off++];
        if (config.include_biases) {
            for (double& v : gl.bias) v += li_lambda * g[off++];
        }
    }
}

double penalty_value(const ModelParams& model, double lambda,
                     const TrainConfig& config, double* reported) {
    if (config.mode == LossMode::Concatenated) {
        const double comp =
            compressibility_loss(flatten_for_penalty(model, config.include_biases));
        *reported = comp;
        return lambda * comp;
    }
    double weighted = 0.0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        WeightVector w(layer.weights.data);
        if (config.include_biases) {
            w.insert(w.end(), layer.bias.begin(), layer.bias.end());
        }
        weighted += config.per_layer_lambdas[li] * compressibility_loss(w);
    }
    *reported = weighted;
    return weighted;
}

void check_config(const ModelParams& model, const TrainConfig& config) {
    if (config.learning_rate <= 0.0) {
        throw std::invalid_argument("learning_rate must be positive");
    }
    if (config.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (config.batch_size < 1) {
        throw std::invalid_argument("batch_size must be at least 1");
    }
    if (config.schedule.initial < 0.0 || config.schedule.per_epoch_increment < 0.0) {
        throw std::invalid_argument("lambda schedule must be non-negative");
    }
    if (config.mode == LossMode::PerLayer &&
        config.per_layer_lambdas.size() != model.layers.size()) {
        throw std::invalid_argument("per-layer mode needs exactly one lambda per layer");
    }
}

}  // namespace

std::vector<std::size_t> ModelParams::layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers.empty()) return dims;
    dims.push_back(layers.front().weights.cols);
    for (const auto& layer : layers) dims.push_back(layer.weights.rows);
    return dims;
}

std::size_t ModelParams::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += layer.weights.data.size() + layer.bias.size();
    }
    return n;
}

ModelParams init_model(const std::vector<std::size_t>& dims, Rng& rng,
                       bool with_bias) {
    if (dims.size() < 2) {
        throw std::invalid_argument("model needs at least input and output dims");
    }
    ModelParams model;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weights.rows = dims[l + 1];
        layer.weights.cols = dims[l];
        layer.weights.data.resize(dims[l + 1] * dims[l]);
        const double scale = std::sqrt(1.0 / static_cast<double>(dims[l]));
        for (double& w : layer.weights.data) w = rng.uniform(-1.0, 1.0) * scale;
        if (with_bias) layer.bias.assign(dims[l + 1], 0.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

ModelParams init_model(const std::vector<std::size_t>& dims, std::uint64_t seed,
                       bool with_bias) {
    Rng rng(seed);
    return init_model(dims, rng, with_bias);
}

WeightVector flatten_weights(const ModelParams& model) {
    return flatten_for_penalty(model, /*include_biases=*/true);
}

void unflatten_weights(ModelParams& model, std::span<const double> flat) {
    if (flat.size() != model.param_count()) {
        throw std::invalid_argument("flat vector length does not match parameter count");
    }
    std::size_t off = 0;
    for_each_block(model, /*include_biases=*/true,
                   [&](std::vector<double>& block) {
                       std::copy_n(flat.begin() + off, block.size(), block.begin());
                       off += block.size();
                   });
}

CombinedLoss combined_loss(const ModelParams& model, const Dataset& batch,
                           double lambda, const TrainConfig& config) {
    check_model(model);
    if (batch.size() == 0) throw std::invalid_argument("batch must be non-empty");
    CombinedLoss out;
    const auto acts = forward_batch(model, batch.features, batch.size());
    out.task_loss = softmax_ce(acts.back(), batch.labels,
                               model.layers.back().weights.rows, nullptr);
    const double penalty = penalty_value(model, lambda, config, &out.comp_loss);
    out.total = out.task_loss + penalty;
    return out;
}

ModelParams combined_grad(const ModelParams& model, const Dataset& batch,
                          double lambda, const TrainConfig& config) {
    check_model(model);
    ModelParams grads = zeros_like(model);
    task_backprop(model, batch.features, batch.labels, batch.size(), grads);
    add_penalty_grad(model, grads, lambda, config);
    return grads;
}

std::vector<double> predict_logits(const ModelParams& model,
                                   std::span<const double> features,
                                   std::size_t n_rows) {
    return forward_batch(model, features, n_rows).back();
}

double accuracy(const ModelParams& model, const Dataset& ds) {
    const auto logits = predict_logits(model, ds.features, ds.size());
    const std::size_t classes = model.layers.back().weights.rows;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const double* row = logits.data() + r * classes;
        const std::size_t pred =
            std::max_element(row, row + classes) - row;
        if (static_cast<int>(pred) == ds.labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

TrainResult train(ModelParams model, const TrainEvalSplit& data,
                  const TrainConfig& config) {
    check_model(model);
    check_config(model, config);
    if (data.train.size() == 0 || data.eval.size() == 0) {
        throw std::invalid_argument("dataset needs non-empty train and eval splits");
    }

    Rng rng(config.seed);
    const std::size_t n = data.train.size();
    const std::size_t f = data.train.feature_count;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    std::vector<double> bx;
    std::vector<int> by;
    Dataset batch;
    batch.feature_count = f;
    batch.class_count = data.train.class_count;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lambda = config.schedule.at(epoch);
        rng.shuffle(order);
        for (std::size_t start = 0, batch_index = 0; start < n;
             start += config.batch_size, ++batch_index) {
            const std::size_t m = std::min(config.batch_size, n - start);
            bx.resize(m * f);
            by.resize(m);
            for (std::size_t r = 0; r < m; ++r) {
                std::copy_n(data.train.row(order[start + r]), f, bx.begin() + r * f);
                by[r] = data.train.labels[order[start + r]];
            }
            batch.features = bx;
            batch.labels = by;

            ModelParams grads = zeros_like(model);
            const double batch_loss =
                task_backprop(model, batch.features, batch.labels, m, grads);
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error(
                    "non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(batch_index));
            }
            add_penalty_grad(model, grads, lambda, config);

            for (std::size_t li = 0; li < model.layers.size(); ++li) {
                auto& layer = model.layers[li];
                const auto& g = grads.layers[li];
                for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
                    layer.weights.data[i] -= config.learning_rate * g.weights.data[i];
                }
                for (std::size_t i = 0; i < layer.bias.size(); ++i) {
                    layer.bias[i] -= config.learning_rate * g.bias[i];
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lambda = lambda;
        const CombinedLoss el = combined_loss(model, data.train, lambda, config);
        rec.task_loss = el.task_loss;
        rec.comp_loss = el.comp_loss;
        rec.total_loss = el.total;
        rec.train_accuracy = accuracy(model, data.train);
        rec.eval_accuracy = accuracy(model, data.eval);
        if (!std::isfinite(rec.total_loss)) {
            throw std::runtime_error("non-finite loss at epoch " +
                                     std::to_string(epoch) + ", end of epoch");
        }
        result.log.push_back(rec);
    }
    result.model = std::move(model);
    return result;
}

void write_epoch_log(std::ostream& os, std::span<const EpochRecord> log) {
    os << "epoch,lambda,task_loss,comp_loss,total,train_acc,eval_acc\n";
    os.precision(17);
    for (const auto& r : log) {
        os << r.epoch << ',' << r.lambda << ',' << r.task_loss << ','
           << r.comp_loss << ',' << r.total_loss << ',' << r.train_accuracy
           << ',' << r.eval_accuracy << '\n';
    }
}

void save_checkpoint(const std::string& path, const ModelParams& model) {
    check_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    std::vector<std::uint8_t> header = {'M', 'L', 'P', 'C'};
    put_u16(header, 1);
    put_u16(header, static_cast<std::uint16_t>(model.layers.size()));
    for (auto d : model.layer_dims()) put_u32(header, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(header.data()),
              static_cast<std::streamsize>(header.size()));
    for (const auto& layer : model.layers) {
        write_tensor(out, Tensor::from_f64(layer.weights.data,
                                           {layer.weights.rows, layer.weights.cols}));
        write_tensor(out, Tensor::from_f64(layer.bias, {layer.bias.size()}));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MLPC", 4) != 0) {
        throw std::runtime_error(path + ": bad checkpoint magic");
    }
    auto read_le = [&](int bytes) {
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            const int ch = in.get();
            if (ch < 0) throw std::runtime_error(path + ": checkpoint truncated");
            v |= static_cast<std::uint64_t>(ch) << (8 * i);
        }
        return v;
    };
    const auto version = read_le(2);
    if (version != 1) throw std::runtime_error(path + ": unsupported checkpoint version");
    const auto layer_count = read_le(2);
    std::vector<std::size_t> dims(layer_count + 1);
    for (auto& d : dims) d = read_le(4);

    ModelParams model;
    for (std::size_t l = 0; l < layer_count; ++l) {
        const Tensor wt = read_tensor(in);
        const Tensor bt = read_tensor(in);
        if (wt.dims.size() != 2 || wt.dims[0] != dims[l + 1] || wt.dims[1] != dims[l]) {
            throw std::runtime_error(path + ": weight tensor does not match manifest");
        }
        Layer layer;
        layer.weights.rows = wt.dims[0];
        layer.weights.cols = wt.dims[1];
        layer.weights.data = wt.as_f64();
        layer.bias = bt.as_f64();
        model.layers.push_back(std::move(layer));
    }
    check_model(model);
    return model;
}

}  // namespace cwt
