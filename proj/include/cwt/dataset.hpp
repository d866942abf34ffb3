#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cwt {

// Row-major feature matrix with integer class labels.
struct Dataset {
    std::vector<double> features;  // n * feature_count
    std::vector<int> labels;       // values in [0, class_count)
    std::size_t feature_count = 0;
    std::size_t class_count = 0;

    std::size_t size() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * feature_count; }
};

struct BlobsSpec {
    std::size_t classes = 10;
    std::size_t features = 32;
    std::size_t train_per_class = 200;
    std::size_t eval_per_class = 50;
    double separation = 3.0;  // distance of each class center from the origin
    double noise = 1.0;       // per-dimension Gaussian noise
    std::uint64_t seed = 0;
};

struct TrainEvalSplit {
    Dataset train;
    Dataset eval;
};

// Gaussian blobs around per-class centers drawn once from the seed; train
// and eval splits share the centers and differ only in the samples.
TrainEvalSplit make_blobs(const BlobsSpec& spec);

// Delimited text: one sample per line, features then an integer label in the
// last column. Comma or whitespace separated on load; comma on save.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const std::string& path, const Dataset& ds);

// Binary alternative: two tensor records, features f64 [n, f] then labels
// i32 [n], as laid out by tensor_io.
Dataset load_dataset_tensor(const std::string& path);
void save_dataset_tensor(const std::string& path, const Dataset& ds);

// Dispatches on extension: ".tns" binary, anything else delimited text.
Dataset load_dataset(const std::string& path);

}  // namespace cwt
