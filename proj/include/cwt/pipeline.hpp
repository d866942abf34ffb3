#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwt/codec.hpp"
#include "cwt/mlp.hpp"

namespace cwt {

// The three coding pipelines: mask + raw survivors, mask + k-means labels,
// and the maskless variant with zero as its own cluster.
enum class PipelineMode { MaskOnly, Masked, ZeroCluster };

PipelineMode pipeline_mode_from(const std::string& name);
std::string to_string(PipelineMode mode);

struct CompressOptions {
    double sparsity = 0.0;
    std::size_t k = 256;
    PipelineMode mode = PipelineMode::Masked;
    std::uint64_t seed = 0;
    std::size_t kmeans_iters = 60;
};

struct CompressOutcome {
    // False at sparsity 0, where by convention nothing is compressed and the
    // ratio is reported as 1; the artifact is empty in that case.
    bool compressed = false;
    CompressedArtifact artifact;
    CompressionReport report;
    WeightVector reconstructed;  // what decode(artifact) yields (the original at sparsity 0)
    double theta = 0.0;
};

// prune -> k-means -> quantize -> encode -> measure, in one call.
CompressOutcome compress_weights(std::span<const double> weights,
                                 const CompressOptions& options);

// One sweep cell: the full parameter tuple plus its measurements, or the
// error that stopped the cell.
struct SweepRow {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double sparsity = 0.0;
    std::size_t k = 0;
    PipelineMode mode = PipelineMode::Masked;
    double ratio = 0.0;
    std::optional<double> entropy_bits;
    double dense_accuracy = 0.0;
    double compressed_accuracy = 0.0;
    std::string error;  // empty on success
};

struct SweepConfig {
    std::vector<double> lambda_grid;
    std::vector<double> sparsity_grid;
    std::vector<std::size_t> k_grid;
    std::vector<std::uint64_t> seeds;
    PipelineMode mode = PipelineMode::Masked;
};

// Trains one model per (lambda, seed) and compresses/evaluates it at every
// (sparsity, k) grid point. Rows come back in grid order; a failing cell
// records its error and the sweep continues.
std::vector<SweepRow> run_sweep(const std::vector<std::size_t>& dims,
                                const TrainEvalSplit& data,
                                const TrainConfig& base_config,
                                const SweepConfig& sweep);

void write_sweep_table(std::ostream& os, std::span<const SweepRow> rows);

// Decodes an artifact back into a model with the checkpoint's shape and
// evaluates it; used for post-compression accuracy columns.
double evaluate_compressed(const ModelParams& shape, std::span<const double> decoded,
                           const Dataset& eval);

struct TheoryVerification {
    std::size_t descent_runs = 0;
    std::size_t descent_passes = 0;
    std::vector<std::uint64_t> descent_failures;  // failing run seeds
    std::size_t perturbation_vectors = 0;
    std::size_t perturbation_trials_each = 0;
    std::size_t perturbation_vectors_all_increased = 0;
    bool passed = false;
};

// Descent-to-ternary (with the sqrt(n) identity) over `trials` random
// starts of the given dimension, plus the strict perturbation-increase
// sweep on constructed ternary vectors. At least 95% of descents must
// converge and every perturbation with a zero-support hit must raise the
// loss.
TheoryVerification run_theory_verification(std::size_t dimension,
                                           std::size_t trials,
                                           std::uint64_t seed,
                                           std::ostream* trace_out = nullptr);

}  // namespace cwt
