#include "cwt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cwt/rng.hpp"
#include "cwt/tensor_io.hpp"

namespace cwt {

namespace {

Dataset draw_samples(const std::vector<double>& centers, std::size_t classes,
                     std::size_t features, std::size_t per_class, double noise,
                     Rng& rng) {
    Dataset ds;
    ds.feature_count = features;
    ds.class_count = classes;
    const std::size_t n = classes * per_class;
    ds.features.resize(n * features);
    ds.labels.resize(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            for (std::size_t f = 0; f < features; ++f) {
                ds.features[row * features + f] =
                    centers[c * features + f] + rng.normal(0.0, noise);
            }
            ds.labels[row] = static_cast<int>(c);
        }
    }
    // Shuffle rows so minibatches are class-mixed even without reshuffling.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Dataset out;
    out.feature_count = features;
    out.class_count = classes;
    out.features.resize(n * features);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(ds.row(perm[i]), features, out.features.begin() + i * features);
        out.labels[i] = ds.labels[perm[i]];
    }
    return out;
}

}  // namespace

TrainEvalSplit make_blobs(const BlobsSpec& spec) {
    if (spec.classes < 2 || spec.features < 1) {
        throw std::invalid_argument("blobs need at least 2 classes and 1 feature");
    }
    Rng rng(spec.seed);
    std::vector<double> centers(spec.classes * spec.features);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        double norm_sq = 0.0;
        for (std::size_t f = 0; f < spec.features; ++f) {
            const double v = rng.normal();
            centers[c * spec.features + f] = v;
            norm_sq += v * v;
        }
        const double scale = spec.separation / std::sqrt(norm_sq);
        for (std::size_t f = 0; f < spec.features; ++f) {
            centers[c * spec.features + f] *= scale;
        }
    }
    TrainEvalSplit split;
    split.train = draw_samples(centers, spec.classes, spec.features,
                               spec.train_per_class, spec.noise, rng);
    split.eval = draw_samples(centers, spec.classes, spec.features,
                              spec.eval_per_class, spec.noise, rng);
    return split;
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        for (char& ch : line) {
            if (ch == ',' || ch == '\t' || ch == ';') ch = ' ';
        }
        std::istringstream row(line);
        std::vector<double> values;
        double v;
        while (row >> v) values.push_back(v);
        if (values.size() < 2) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     " needs at least one feature and a label");
        }
        const double label = values.back();
        values.pop_back();
        if (ds.feature_count == 0) {
            ds.feature_count = values.size();
        } else if (values.size() != ds.feature_count) {
            throw std::runtime_error(path + ": inconsistent column count at line " +
                                     std::to_string(line_no));
        }
        if (label < 0 || label != std::floor(label)) {
            throw std::runtime_error(path + ": label must be a non-negative integer at line " +
                                     std::to_string(line_no));
        }
        ds.features.insert(ds.features.end(), values.begin(), values.end());
        ds.labels.push_back(static_cast<int>(label));
    }
    if (ds.labels.empty()) throw std::runtime_error(path + ": empty dataset");
    ds.class_count = static_cast<std::size_t>(
                         *std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
    return ds;
}

void save_dataset_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* r = ds.row(i);
        for (std::size_t f = 0; f < ds.feature_count; ++f) out << r[f] << ',';
        out << ds.labels[i] << '\n';
    }
    if (!out) throw std::runtime_error("dataset write failed: " + path);
}

Dataset load_dataset_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    const Tensor xt = read_tensor(in);
    const Tensor yt = read_tensor(in);
    if (xt.dims.size() != 2 || yt.dims.size() != 1 || xt.dims[0] != yt.dims[0]) {
        throw std::runtime_error(path + ": expected f64 [n,f] and i32 [n] tensors");
    }
    Dataset ds;
    ds.features = xt.as_f64();
    ds.feature_count = xt.dims[1];
    const auto labels = yt.as_i32();
    ds.labels.assign(labels.begin(), labels.end());
    ds.class_count = static_cast<std::size_t>(
                         *std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
    return ds;
}

void save_dataset_tensor(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    write_tensor(out, Tensor::from_f64(ds.features,
                                       {ds.size(), ds.feature_count}));
    std::vector<std::int32_t> labels(ds.labels.begin(), ds.labels.end());
    write_tensor(out, Tensor::from_i32(labels, {labels.size()}));
}

Dataset load_dataset(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".tns") {
        return load_dataset_tensor(path);
    }
    return load_dataset_csv(path);
}

}  // namespace cwt
