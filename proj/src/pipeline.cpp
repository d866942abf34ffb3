#include "cwt/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "cwt/rng.hpp"
#include "cwt/theory.hpp"

namespace cwt {

PipelineMode pipeline_mode_from(const std::string& name) {
    if (name == "mask_only") return PipelineMode::MaskOnly;
    if (name == "masked") return PipelineMode::Masked;
    if (name == "zero_cluster") return PipelineMode::ZeroCluster;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (expected mask_only, masked or zero_cluster)");
}

std::string to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::MaskOnly: return "mask_only";
        case PipelineMode::Masked: return "masked";
        case PipelineMode::ZeroCluster: return "zero_cluster";
    }
    return "?";
}

CompressOutcome compress_weights(std::span<const double> weights,
                                 const CompressOptions& options) {
    if (!(options.sparsity >= 0.0 && options.sparsity < 1.0)) {
        throw std::invalid_argument("sparsity must lie in [0, 1)");
    }
    CompressOutcome out;
    if (options.sparsity == 0.0) {
        // Nothing is pruned and nothing encoded: the ratio is 1 by
        // convention. Only the baseline size is measured.
        out.compressed = false;
        out.reconstructed.assign(weights.begin(), weights.end());
        out.report.sparsity = 0.0;
        out.report.ratio = 1.0;
        std::vector<std::uint8_t> f32;
        f32.reserve(weights.size() * 4);
        for (double v : weights) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            for (int b = 0; b < 4; ++b) {
                f32.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
            }
        }
        out.report.baseline_bytes = zlib_compress(f32).size();
        out.report.total_bytes = 0;
        out.report.header_bytes = 0;
        return out;
    }

    const auto pruned = prune_to_sparsity(weights, options.sparsity);
    out.theta = pruned.theta;
    std::vector<double> survivors;
    survivors.reserve(pruned.mask.nonzero_count);
    for (double v : pruned.pruned) {
        if (v != 0.0) survivors.push_back(v);
    }

    if (options.mode == PipelineMode::MaskOnly) {
        out.artifact = encode_mask_only(pruned.mask, survivors);
    } else {
        const Codebook cb = kmeans_fit(survivors, options.k, options.seed,
                                       options.kmeans_iters);
        out.artifact = encode(pruned.mask, cb,
                              options.mode == PipelineMode::Masked
                                  ? EncodeMode::Masked
                                  : EncodeMode::ZeroCluster);
    }
    out.compressed = true;
    out.report = compression_ratio(out.artifact, weights);
    out.reconstructed = decode(out.artifact);
    return out;
}

double evaluate_compressed(const ModelParams& shape, std::span<const double> decoded,
                           const Dataset& eval) {
    ModelParams model = shape;
    unflatten_weights(model, decoded);
    return accuracy(model, eval);
}

std::vector<SweepRow> run_sweep(const std::vector<std::size_t>& dims,
                                const TrainEvalSplit& data,
                                const TrainConfig& base_config,
                                const SweepConfig& sweep) {
    if (sweep.lambda_grid.empty() || sweep.sparsity_grid.empty() ||
        sweep.k_grid.empty() || sweep.seeds.empty()) {
        throw std::invalid_argument("sweep grids must be non-empty");
    }
    for (double s : sweep.sparsity_grid) {
        if (!(s >= 0.0 && s < 1.0)) {
            throw std::invalid_argument("sweep sparsity values must lie in [0, 1)");
        }
    }

    std::vector<SweepRow> rows;
    for (double lambda : sweep.lambda_grid) {
        for (auto seed : sweep.seeds) {
            TrainConfig config = base_config;
            config.seed = seed;
            config.schedule = {lambda, 0.0};
            ModelParams trained;
            double dense_acc = 0.0;
            std::string train_error;
            try {
                auto result = train(init_model(dims, seed), data, config);
                dense_acc = result.log.back().eval_accuracy;
                trained = std::move(result.model);
            } catch (const std::exception& e) {
                train_error = e.what();
            }
            const WeightVector weights =
                train_error.empty() ? flatten_weights(trained) : WeightVector{};

            for (double sparsity : sweep.sparsity_grid) {
                for (auto k : sweep.k_grid) {
                    SweepRow row;
                    row.lambda = lambda;
                    row.seed = seed;
                    row.sparsity = sparsity;
                    row.k = k;
                    row.mode = sweep.mode;
                    row.dense_accuracy = dense_acc;
                    if (!train_error.empty()) {
                        row.error = train_error;
                        rows.push_back(std::move(row));
                        continue;
                    }
                    try {
                        CompressOptions opts;
                        opts.sparsity = sparsity;
                        opts.k = k;
                        opts.mode = sweep.mode;
                        opts.seed = seed;
                        const auto outcome = compress_weights(weights, opts);
                        row.ratio = outcome.report.ratio;
                        row.entropy_bits = outcome.report.entropy_bits;
                        row.compressed_accuracy = evaluate_compressed(
                            trained, outcome.reconstructed, data.eval);
                    } catch (const std::exception& e) {
                        row.error = e.what();
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

void write_sweep_table(std::ostream& os, std::span<const SweepRow> rows) {
    os << "lambda,seed,sparsity,k,mode,ratio,entropy_bits,dense_acc,compressed_acc,error\n";
    os.precision(12);
    for (const auto& r : rows) {
        os << r.lambda << ',' << r.seed << ',' << r.sparsity << ',' << r.k << ','
           << to_string(r.mode) << ',' << r.ratio << ',';
        if (r.entropy_bits) os << *r.entropy_bits;
        os << ',' << r.dense_accuracy << ',' << r.compressed_accuracy << ','
           << r.error << '\n';
    }
}

TheoryVerification run_theory_verification(std::size_t dimension,
                                           std::size_t trials,
                                           std::uint64_t seed,
                                           std::ostream* trace_out) {
    if (dimension < 2) {
        throw std::invalid_argument("dimension must be at least 2");
    }
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");

    TheoryVerification v;
    v.descent_runs = trials;
    Rng rng(seed);

    if (trace_out) *trace_out << "run,step,loss,ternary_deviation\n";
    for (std::size_t run = 0; run < trials; ++run) {
        WeightVector x0(dimension);
        for (double& x : x0) x = rng.uniform(-1.0, 1.0);
        const DescentTrace trace = minimize_loss(x0);
        const auto& r = trace.final_report;
        const bool ok = trace.converged && r.ternary_deviation / r.c < 1e-3 &&
                        r.sqrt_n_gap < 1e-3;
        if (ok) {
            ++v.descent_passes;
        } else {
            v.descent_failures.push_back(run);
        }
        if (trace_out) {
            trace_out->precision(17);
            for (const auto& s : trace.iterates) {
                *trace_out << run << ',' << s.step_index << ',' << s.loss_value
                           << ',' << s.ternary_deviation << '\n';
            }
        }
    }

    // Strict loss increase for zero-support perturbations on constructed
    // ternary vectors of the same dimension.
    const std::size_t n_vectors = 20;
    const std::size_t sweep_trials = std::max<std::size_t>(trials, 100);
    v.perturbation_vectors = n_vectors;
    v.perturbation_trials_each = sweep_trials;
    for (std::size_t i = 0; i < n_vectors; ++i) {
        // Random support size in [1, d-1] keeps at least one zero.
        const std::size_t support = 1 + rng.uniform_below(dimension - 1);
        const double c = rng.uniform(0.1, 10.0);
        WeightVector x(dimension, 0.0);
        std::vector<std::size_t> idx(dimension);
        for (std::size_t j = 0; j < dimension; ++j) idx[j] = j;
        rng.shuffle(idx);
        for (std::size_t j = 0; j < support; ++j) {
            x[idx[j]] = rng.uniform_below(2) == 0 ? c : -c;
        }
        const double fraction =
            sweep_perturbations(x, c / 1e4, sweep_trials, rng.next_u64());
        if (fraction == 1.0) ++v.perturbation_vectors_all_increased;
    }

    const bool descent_ok =
        v.descent_passes * 100 >= v.descent_runs * 95;
    const bool perturb_ok =
        v.perturbation_vectors_all_increased == v.perturbation_vectors;
    v.passed = descent_ok && perturb_ok;
    return v;
}

}  // namespace cwt
