#include "cwt/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "cwt/config.hpp"
#include "cwt/dataset.hpp"
#include "cwt/pipeline.hpp"

namespace cwt {

namespace {

std::vector<std::size_t> parse_dims(const Config& cfg) {
    const auto raw = cfg.get_u64_list("dims");
    std::vector<std::size_t> dims(raw.begin(), raw.end());
    if (dims.size() < 2) {
        throw std::invalid_argument("dims needs at least input and output sizes");
    }
    return dims;
}

TrainEvalSplit resolve_dataset(const Config& cfg) {
    if (cfg.has("dataset")) {
        TrainEvalSplit split;
        split.train = load_dataset(cfg.get_string("dataset"));
        if (cfg.has("eval_dataset")) {
            split.eval = load_dataset(cfg.get_string("eval_dataset"));
            if (split.eval.feature_count != split.train.feature_count) {
                throw std::invalid_argument("train and eval feature counts differ");
            }
            split.eval.class_count = split.train.class_count =
                std::max(split.train.class_count, split.eval.class_count);
            return split;
        }
        // Deterministic split of a single file.
        const double frac = cfg.get_double("eval_fraction", 0.2);
        if (!(frac > 0.0 && frac < 1.0)) {
            throw std::invalid_argument("eval_fraction must lie in (0, 1)");
        }
        const Dataset& all = split.train;
        Rng rng(cfg.get_u64("seed", 0));
        std::vector<std::size_t> idx(all.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        const std::size_t eval_n =
            std::max<std::size_t>(1, static_cast<std::size_t>(frac * all.size()));
        Dataset train, eval;
        train.feature_count = eval.feature_count = all.feature_count;
        train.class_count = eval.class_count = all.class_count;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            Dataset& dst = i < eval_n ? eval : train;
            dst.features.insert(dst.features.end(), all.row(idx[i]),
                                all.row(idx[i]) + all.feature_count);
            dst.labels.push_back(all.labels[idx[i]]);
        }
        return {std::move(train), std::move(eval)};
    }
    if (cfg.get_string("synthetic", "") == "blobs") {
        BlobsSpec spec;
        spec.classes = cfg.get_u64("classes", 10);
        spec.features = cfg.get_u64("features", 32);
        spec.train_per_class = cfg.get_u64("train_per_class", 200);
        spec.eval_per_class = cfg.get_u64("eval_per_class", 50);
        spec.separation = cfg.get_double("separation", 3.0);
        spec.noise = cfg.get_double("noise", 1.0);
        spec.seed = cfg.get_u64("data_seed", cfg.get_u64("seed", 0));
        return make_blobs(spec);
    }
    throw std::invalid_argument(
        "config needs either 'dataset = <path>' or 'synthetic = blobs'");
}

TrainConfig train_config_from(const Config& cfg, std::size_t layer_count) {
    TrainConfig tc;
    tc.epochs = cfg.get_u64("epochs", 100);
    tc.batch_size = cfg.get_u64("batch_size", 32);
    tc.learning_rate = cfg.get_double("learning_rate", 0.08);
    tc.seed = cfg.get_u64("seed", 0);
    tc.schedule.initial = cfg.get_double("lambda_initial", 0.0);
    tc.schedule.per_epoch_increment = cfg.get_double("lambda_increment", 0.0);
    tc.include_biases = cfg.get_bool("include_biases", true);
    const std::string mode = cfg.get_string("loss_mode", "concatenated");
    if (mode == "concatenated") {
        tc.mode = LossMode::Concatenated;
    } else if (mode == "per_layer") {
        tc.mode = LossMode::PerLayer;
        tc.per_layer_lambdas = cfg.get_double_list("per_layer_lambdas");
        if (tc.per_layer_lambdas.size() != layer_count) {
            throw std::invalid_argument("per_layer_lambdas needs one value per layer");
        }
    } else {
        throw std::invalid_argument("loss_mode must be concatenated or per_layer");
    }
    return tc;
}

// Overlays non-empty CLI flag values onto the config file contents.
struct Override {
    std::string key;
    std::string value;
};

Config merged_config(const std::string& config_path,
                     const std::vector<Override>& overrides) {
    Config cfg = config_path.empty() ? Config{} : Config::from_file(config_path);
    for (const auto& o : overrides) {
        if (!o.value.empty()) cfg.set(o.key, o.value);
    }
    return cfg;
}

int cmd_train(const Config& cfg) {
    const auto dims = parse_dims(cfg);
    const TrainEvalSplit data = resolve_dataset(cfg);
    if (data.train.feature_count != dims.front()) {
        throw std::invalid_argument("dims[0] must equal the dataset feature count");
    }
    if (data.train.class_count > dims.back()) {
        throw std::invalid_argument("dims back must cover every class label");
    }
    const TrainConfig tc = train_config_from(cfg, dims.size() - 1);
    const std::string checkpoint_out =
        cfg.get_string("checkpoint_out", "checkpoint.mlpc");
    const std::string log_out = cfg.get_string("log_out", "train_log.csv");

    ModelParams model = init_model(dims, tc.seed);
    TrainResult result = train(std::move(model), data, tc);

    save_checkpoint(checkpoint_out, result.model);
    std::ofstream log(log_out);
    if (!log) throw std::runtime_error("cannot write log: " + log_out);
    write_epoch_log(log, result.log);

    const auto& last = result.log.back();
    std::cout << "trained " << result.log.size() << " epochs: task_loss="
              << last.task_loss << " comp_loss=" << last.comp_loss
              << " train_acc=" << last.train_accuracy
              << " eval_acc=" << last.eval_accuracy << "\n"
              << "checkpoint: " << checkpoint_out << "\nlog: " << log_out << "\n";
    return 0;
}

void write_compress_report(std::ostream& os, const CompressOutcome& outcome,
                           const CompressOptions& opts, bool have_eval,
                           double dense_acc, double compressed_acc) {
    os << "sparsity,k,mode,seed,theta,ratio,entropy_bits,mask_bytes,label_bytes,"
          "centroid_bytes,total_bytes,baseline_bytes,dense_acc,compressed_acc\n";
    os.precision(12);
    const auto& r = outcome.report;
    os << opts.sparsity << ',' << opts.k << ',' << to_string(opts.mode) << ','
       << opts.seed << ',' << outcome.theta << ',' << r.ratio << ',';
    if (r.entropy_bits) os << *r.entropy_bits;
    os << ',' << r.mask_bytes << ',' << r.label_bytes << ',' << r.centroid_bytes
       << ',' << r.total_bytes << ',' << r.baseline_bytes << ',';
    if (have_eval) os << dense_acc;
    os << ',';
    if (have_eval) os << compressed_acc;
    os << '\n';
}

int cmd_compress(const Config& cfg) {
    const std::string checkpoint_path = cfg.get_string("checkpoint");
    CompressOptions opts;
    opts.sparsity = cfg.get_double("sparsity");
    if (!(opts.sparsity >= 0.0 && opts.sparsity < 1.0)) {
        throw std::invalid_argument("sparsity must lie in [0, 1)");
    }
    opts.k = cfg.get_u64("k", 256);
    opts.mode = pipeline_mode_from(cfg.get_string("mode", "masked"));
    opts.seed = cfg.get_u64("seed", 0);

    const ModelParams model = load_checkpoint(checkpoint_path);
    const WeightVector weights = flatten_weights(model);
    const CompressOutcome outcome = compress_weights(weights, opts);

    double dense_acc = 0.0, compressed_acc = 0.0;
    const bool have_eval = cfg.has("eval_data");
    if (have_eval) {
        const Dataset eval = load_dataset(cfg.get_string("eval_data"));
        dense_acc = accuracy(model, eval);
        compressed_acc = evaluate_compressed(model, outcome.reconstructed, eval);
    }

    if (outcome.compressed && cfg.has("artifact_out")) {
        write_artifact(cfg.get_string("artifact_out"), outcome.artifact);
    }
    const std::string report_out = cfg.get_string("report_out", "");
    if (!report_out.empty()) {
        std::ofstream rf(report_out);
        if (!rf) throw std::runtime_error("cannot write report: " + report_out);
        write_compress_report(rf, outcome, opts, have_eval, dense_acc,
                              compressed_acc);
    }
    write_compress_report(std::cout, outcome, opts, have_eval, dense_acc,
                          compressed_acc);
    return 0;
}

int cmd_sweep(const Config& cfg) {
    const auto dims = parse_dims(cfg);
    const TrainEvalSplit data = resolve_dataset(cfg);
    const TrainConfig base = train_config_from(cfg, dims.size() - 1);

    SweepConfig sweep;
    sweep.lambda_grid = cfg.get_double_list("lambda_grid");
    sweep.sparsity_grid = cfg.get_double_list("sparsity_grid");
    const auto ks = cfg.get_u64_list("k_grid");
    sweep.k_grid.assign(ks.begin(), ks.end());
    sweep.seeds = cfg.get_u64_list("seeds");
    sweep.mode = pipeline_mode_from(cfg.get_string("mode", "masked"));

    const auto rows = run_sweep(dims, data, base, sweep);

    const std::string report_out = cfg.get_string("report_out", "");
    if (!report_out.empty()) {
        std::ofstream rf(report_out);
        if (!rf) throw std::runtime_error("cannot write report: " + report_out);
        write_sweep_table(rf, rows);
    }
    write_sweep_table(std::cout, rows);
    return 0;
}

int cmd_verify_theory(const Config& cfg) {
    const std::size_t dimension = cfg.get_u64("dimension", 8);
    const std::size_t trials = cfg.get_u64("trials", 50);
    const std::uint64_t seed = cfg.get_u64("seed", 1);

    std::ofstream trace;
    std::ostream* trace_os = nullptr;
    if (cfg.has("trace_out")) {
        trace.open(cfg.get_string("trace_out"));
        if (!trace) {
            throw std::runtime_error("cannot write trace: " + cfg.get_string("trace_out"));
        }
        trace_os = &trace;
    }

    const TheoryVerification v =
        run_theory_verification(dimension, trials, seed, trace_os);
    std::cout << "descent to ternary: " << v.descent_passes << "/" << v.descent_runs
              << " runs with ternary_deviation/c < 1e-3 and |L - sqrt(n)| < 1e-3\n";
    if (!v.descent_failures.empty()) {
        std::cout << "failing runs:";
        for (auto r : v.descent_failures) std::cout << ' ' << r;
        std::cout << '\n';
    }
    std::cout << "zero-support perturbations: " << v.perturbation_vectors_all_increased
              << "/" << v.perturbation_vectors << " ternary vectors with all "
              << v.perturbation_trials_each << " perturbations increasing the loss\n";
    std::cout << (v.passed ? "PASS" : "FAIL") << "\n";
    return v.passed ? 0 : 3;
}

int cmd_gen_data(const Config& cfg) {
    BlobsSpec spec;
    spec.classes = cfg.get_u64("classes", 10);
    spec.features = cfg.get_u64("features", 32);
    spec.train_per_class = cfg.get_u64("train_per_class", 200);
    spec.eval_per_class = cfg.get_u64("eval_per_class", 50);
    spec.separation = cfg.get_double("separation", 3.0);
    spec.noise = cfg.get_double("noise", 1.0);
    spec.seed = cfg.get_u64("seed", 0);

    const std::string out = cfg.get_string("out");
    const TrainEvalSplit split = make_blobs(spec);
    const bool binary = cfg.get_string("format", "csv") == "tns";
    if (binary) {
        save_dataset_tensor(out, split.train);
    } else {
        save_dataset_csv(out, split.train);
    }
    std::cout << "train: " << out << " (" << split.train.size() << " samples)\n";
    if (cfg.has("eval_out")) {
        const std::string eval_out = cfg.get_string("eval_out");
        if (binary) {
            save_dataset_tensor(eval_out, split.eval);
        } else {
            save_dataset_csv(eval_out, split.eval);
        }
        std::cout << "eval: " << eval_out << " (" << split.eval.size()
                  << " samples)\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"compressibility-loss training, pruning, quantization and coding toolkit"};
    app.require_subcommand(1);

    std::function<int()> action;

    // train
    {
        auto* sub = app.add_subcommand("train", "train an MLP with the sparsity penalty");
        auto config_path = std::make_shared<std::string>();
        sub->add_option("--config", *config_path, "flat key-value config file");
        auto dataset = std::make_shared<std::string>();
        auto eval_dataset = std::make_shared<std::string>();
        auto dims = std::make_shared<std::string>();
        auto epochs = std::make_shared<std::string>();
        auto batch = std::make_shared<std::string>();
        auto lr = std::make_shared<std::string>();
        auto lambda = std::make_shared<std::string>();
        auto lambda_inc = std::make_shared<std::string>();
        auto seed = std::make_shared<std::string>();
        auto ckpt = std::make_shared<std::string>();
        auto log = std::make_shared<std::string>();
        sub->add_option("--dataset", *dataset, "training data (csv or .tns)");
        sub->add_option("--eval-dataset", *eval_dataset, "held-out data");
        sub->add_option("--dims", *dims, "layer sizes, e.g. 32,64,64,10");
        sub->add_option("--epochs", *epochs, "training epochs");
        sub->add_option("--batch-size", *batch, "minibatch size");
        sub->add_option("--learning-rate", *lr, "SGD step size");
        sub->add_option("--lambda", *lambda, "initial penalty weight");
        sub->add_option("--lambda-increment", *lambda_inc, "per-epoch penalty ramp");
        sub->add_option("--seed", *seed, "RNG seed");
        sub->add_option("--checkpoint-out", *ckpt, "output checkpoint path");
        sub->add_option("--log-out", *log, "output epoch log path");
        sub->callback([=, &action]() {
            action = [=]() {
                const std::vector<Override> ov = {
                    {"dataset", *dataset},     {"eval_dataset", *eval_dataset},
                    {"dims", *dims},           {"epochs", *epochs},
                    {"batch_size", *batch},    {"learning_rate", *lr},
                    {"lambda_initial", *lambda}, {"lambda_increment", *lambda_inc},
                    {"seed", *seed},           {"checkpoint_out", *ckpt},
                    {"log_out", *log}};
                return cmd_train(merged_config(*config_path, ov));
            };
        });
    }

    // compress
    {
        auto* sub = app.add_subcommand("compress",
                                       "prune, quantize and encode a checkpoint");
        auto config_path = std::make_shared<std::string>();
        auto checkpoint = std::make_shared<std::string>();
        auto sparsity = std::make_shared<std::string>();
        auto k = std::make_shared<std::string>();
        auto mode = std::make_shared<std::string>();
        auto seed = std::make_shared<std::string>();
        auto artifact = std::make_shared<std::string>();
        auto report = std::make_shared<std::string>();
        auto eval_data = std::make_shared<std::string>();
        sub->add_option("--config", *config_path, "flat key-value config file");
        sub->add_option("--checkpoint", *checkpoint, "input checkpoint");
        sub->add_option("--sparsity", *sparsity, "target sparsity in [0,1)");
        sub->add_option("--k", *k, "cluster count (default 256)");
        sub->add_option("--mode", *mode, "mask_only, masked or zero_cluster");
        sub->add_option("--seed", *seed, "k-means seed");
        sub->add_option("--artifact-out", *artifact, "output artifact path");
        sub->add_option("--report-out", *report, "output report path");
        sub->add_option("--eval-data", *eval_data, "evaluate accuracy on this data");
        sub->callback([=, &action]() {
            action = [=]() {
                const std::vector<Override> ov = {
                    {"checkpoint", *checkpoint}, {"sparsity", *sparsity},
                    {"k", *k},                   {"mode", *mode},
                    {"seed", *seed},             {"artifact_out", *artifact},
                    {"report_out", *report},     {"eval_data", *eval_data}};
                return cmd_compress(merged_config(*config_path, ov));
            };
        });
    }

    // sweep
    {
        auto* sub = app.add_subcommand("sweep", "grid of trainings and compressions");
        auto config_path = std::make_shared<std::string>();
        auto report = std::make_shared<std::string>();
        auto mode = std::make_shared<std::string>();
        sub->add_option("--config", *config_path, "flat key-value config file")
            ->required();
        sub->add_option("--report-out", *report, "output table path");
        sub->add_option("--mode", *mode, "mask_only, masked or zero_cluster");
        sub->callback([=, &action]() {
            action = [=]() {
                const std::vector<Override> ov = {{"report_out", *report},
                                                  {"mode", *mode}};
                return cmd_sweep(merged_config(*config_path, ov));
            };
        });
    }

    // verify-theory
    {
        auto* sub = app.add_subcommand("verify-theory",
                                       "check the ternary critical-point claims numerically");
        auto config_path = std::make_shared<std::string>();
        auto dimension = std::make_shared<std::string>();
        auto trials = std::make_shared<std::string>();
        auto seed = std::make_shared<std::string>();
        auto trace = std::make_shared<std::string>();
        sub->add_option("--config", *config_path, "flat key-value config file");
        sub->add_option("--dimension", *dimension, "vector dimension (>= 2)");
        sub->add_option("--trials", *trials, "descent runs (>= 1)");
        sub->add_option("--seed", *seed, "RNG seed");
        sub->add_option("--trace-out", *trace, "write descent traces here");
        sub->callback([=, &action]() {
            action = [=]() {
                const std::vector<Override> ov = {{"dimension", *dimension},
                                                  {"trials", *trials},
                                                  {"seed", *seed},
                                                  {"trace_out", *trace}};
                return cmd_verify_theory(merged_config(*config_path, ov));
            };
        });
    }

    // gen-data
    {
        auto* sub = app.add_subcommand("gen-data", "synthesize a blobs dataset");
        auto config_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto eval_out = std::make_shared<std::string>();
        auto classes = std::make_shared<std::string>();
        auto features = std::make_shared<std::string>();
        auto train_pc = std::make_shared<std::string>();
        auto eval_pc = std::make_shared<std::string>();
        auto separation = std::make_shared<std::string>();
        auto noise = std::make_shared<std::string>();
        auto seed = std::make_shared<std::string>();
        auto format = std::make_shared<std::string>();
        sub->add_option("--config", *config_path, "flat key-value config file");
        sub->add_option("--out", *out, "training data output path");
        sub->add_option("--eval-out", *eval_out, "held-out data output path");
        sub->add_option("--classes", *classes, "class count");
        sub->add_option("--features", *features, "feature count");
        sub->add_option("--train-per-class", *train_pc, "train samples per class");
        sub->add_option("--eval-per-class", *eval_pc, "eval samples per class");
        sub->add_option("--separation", *separation, "center distance from origin");
        sub->add_option("--noise", *noise, "per-dimension noise");
        sub->add_option("--seed", *seed, "RNG seed");
        sub->add_option("--format", *format, "csv or tns");
        sub->callback([=, &action]() {
            action = [=]() {
                const std::vector<Override> ov = {
                    {"out", *out},           {"eval_out", *eval_out},
                    {"classes", *classes},   {"features", *features},
                    {"train_per_class", *train_pc}, {"eval_per_class", *eval_pc},
                    {"separation", *separation},    {"noise", *noise},
                    {"seed", *seed},         {"format", *format}};
                return cmd_gen_data(merged_config(*config_path, ov));
            };
        });
    }

    std::vector<const char*> argv;
    argv.push_back("cwt");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return action ? action() : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace cwt
