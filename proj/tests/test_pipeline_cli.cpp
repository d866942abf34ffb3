#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwt/cli.hpp"
#include "cwt/config.hpp"
#include "cwt/dataset.hpp"
#include "cwt/mlp.hpp"
#include "cwt/pipeline.hpp"

using namespace cwt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cwt_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("config text parses keys, lists and comments") {
    const auto cfg = Config::from_text(
        "# a comment\n"
        "epochs = 12\n"
        "learning_rate = 0.5  # trailing comment\n"
        "grid = 0.1, 0.2,0.3\n"
        "name = blobs\n"
        "flag = true\n");
    CHECK(cfg.get_u64("epochs") == 12);
    CHECK(cfg.get_double("learning_rate") == 0.5);
    CHECK(cfg.get_double_list("grid") == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(cfg.get_string("name") == "blobs");
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_u64("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.get_string("missing"), std::invalid_argument);
    CHECK_THROWS_AS(Config::from_text("no equals sign\n"), std::invalid_argument);
    CHECK_THROWS_AS(
        Config::from_text("epochs = twelve\n").get_u64("epochs"),
        std::invalid_argument);
}

TEST_CASE("dataset csv round-trips") {
    TempDir dir;
    BlobsSpec spec;
    spec.classes = 3;
    spec.features = 4;
    spec.train_per_class = 10;
    spec.eval_per_class = 2;
    spec.seed = 6;
    const auto split = make_blobs(spec);
    const auto path = dir.file("data.csv");
    save_dataset_csv(path, split.train);
    const auto loaded = load_dataset_csv(path);
    CHECK(loaded.size() == split.train.size());
    CHECK(loaded.feature_count == split.train.feature_count);
    CHECK(loaded.labels == split.train.labels);
    for (std::size_t i = 0; i < loaded.features.size(); ++i) {
        CHECK(loaded.features[i] == doctest::Approx(split.train.features[i]).epsilon(1e-15));
    }
}

TEST_CASE("dataset tensor container round-trips exactly") {
    TempDir dir;
    BlobsSpec spec;
    spec.classes = 2;
    spec.features = 3;
    spec.train_per_class = 8;
    spec.eval_per_class = 2;
    spec.seed = 3;
    const auto split = make_blobs(spec);
    const auto path = dir.file("data.tns");
    save_dataset_tensor(path, split.train);
    const auto loaded = load_dataset(path);
    CHECK(loaded.features == split.train.features);
    CHECK(loaded.labels == split.train.labels);
}

TEST_CASE("compress pipeline at sparsity zero reports ratio 1 by convention") {
    WeightVector w{0.5, -1.5, 2.0, 0.25, -0.75};
    CompressOptions opts;
    opts.sparsity = 0.0;
    const auto outcome = compress_weights(w, opts);
    CHECK_FALSE(outcome.compressed);
    CHECK(outcome.report.ratio == 1.0);
    CHECK(outcome.report.total_bytes == 0);
    CHECK(outcome.reconstructed == w);
    CHECK(outcome.report.baseline_bytes > 0);
}

TEST_CASE("zero-cluster pipeline yields an empty mask stream") {
    Rng rng(40);
    WeightVector w(400);
    for (double& v : w) v = rng.normal();
    CompressOptions opts;
    opts.sparsity = 0.5;
    opts.k = 8;
    opts.mode = PipelineMode::ZeroCluster;
    const auto outcome = compress_weights(w, opts);
    CHECK(outcome.compressed);
    CHECK(outcome.artifact.mask_stream.empty());
    CHECK(outcome.artifact.zero_cluster_mode);
}

TEST_CASE("degenerate 1x1x1x1 sweep equals a single compression") {
    BlobsSpec spec;
    spec.classes = 2;
    spec.features = 2;
    spec.train_per_class = 40;
    spec.eval_per_class = 10;
    spec.seed = 8;
    const auto data = make_blobs(spec);
    const std::vector<std::size_t> dims{2, 8, 2};

    TrainConfig base;
    base.epochs = 20;
    base.batch_size = 16;
    base.learning_rate = 0.1;

    SweepConfig grid;
    grid.lambda_grid = {0.01};
    grid.sparsity_grid = {0.5};
    grid.k_grid = {4};
    grid.seeds = {3};

    const auto rows = run_sweep(dims, data, base, grid);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].error.empty());

    // The same computation done by hand.
    TrainConfig config = base;
    config.seed = 3;
    config.schedule = {0.01, 0.0};
    const auto result = train(init_model(dims, config.seed), data, config);
    CompressOptions opts;
    opts.sparsity = 0.5;
    opts.k = 4;
    opts.seed = 3;
    const auto outcome = compress_weights(flatten_weights(result.model), opts);
    CHECK(rows[0].ratio == outcome.report.ratio);
    CHECK(rows[0].entropy_bits == outcome.report.entropy_bits);
    CHECK(rows[0].dense_accuracy == result.log.back().eval_accuracy);
}

TEST_CASE("sweep rows carry the full parameter tuple and survive cell failures") {
    BlobsSpec spec;
    spec.classes = 2;
    spec.features = 2;
    spec.train_per_class = 30;
    spec.eval_per_class = 10;
    spec.seed = 9;
    const auto data = make_blobs(spec);

    TrainConfig base;
    base.epochs = 5;
    base.batch_size = 16;
    base.learning_rate = 0.1;

    SweepConfig grid;
    grid.lambda_grid = {0.0, 0.01};
    grid.sparsity_grid = {0.3, 0.9};
    grid.k_grid = {4};
    grid.seeds = {1};

    const auto rows = run_sweep({2, 4, 2}, data, base, grid);
    REQUIRE(rows.size() == 4);
    std::ostringstream os;
    write_sweep_table(os, rows);
    const std::string table = os.str();
    CHECK(table.rfind("lambda,seed,sparsity,k,mode,", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 5);

    // 18 parameters cannot be 90% pruned without losing every weight of some
    // layer; that is fine — but sparsity 0.9 of 18 weights still leaves 2, so
    // every cell should actually succeed here.
    for (const auto& row : rows) CHECK(row.error.empty());

    SweepConfig bad = grid;
    bad.sparsity_grid = {};
    CHECK_THROWS_AS(run_sweep({2, 4, 2}, data, base, bad), std::invalid_argument);
}

TEST_CASE("theory verification runs and validates its arguments") {
    CHECK_THROWS_AS(run_theory_verification(1, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(run_theory_verification(8, 0, 0), std::invalid_argument);
    const auto v = run_theory_verification(8, 10, 1);
    CHECK(v.passed);
    CHECK(v.descent_passes == 10);
    CHECK(v.perturbation_vectors_all_increased == v.perturbation_vectors);
}

TEST_CASE("cli: missing dataset exits with a config error and no checkpoint") {
    TempDir dir;
    const auto ckpt = dir.file("out.mlpc");
    const int code = run_cli({"train", "--dataset", dir.file("absent.csv"),
                              "--dims", "2,4,2", "--checkpoint-out", ckpt,
                              "--log-out", dir.file("log.csv")});
    CHECK(code != 0);
    CHECK_FALSE(fs::exists(ckpt));
}

TEST_CASE("cli: train writes a checkpoint and a ramping lambda column") {
    TempDir dir;
    const auto cfg = dir.file("train.cfg");
    write_file(cfg,
               "synthetic = blobs\n"
               "classes = 2\nfeatures = 2\ntrain_per_class = 30\n"
               "eval_per_class = 10\nseparation = 2.0\nnoise = 0.4\n"
               "data_seed = 4\ndims = 2,8,2\nepochs = 4\nbatch_size = 16\n"
               "learning_rate = 0.1\nseed = 2\n"
               "lambda_initial = 0\nlambda_increment = 0.007\n" +
                   std::string("checkpoint_out = ") + dir.file("m.mlpc") + "\n" +
                   "log_out = " + dir.file("log.csv") + "\n");
    CHECK(run_cli({"train", "--config", cfg}) == 0);
    CHECK(fs::exists(dir.file("m.mlpc")));

    const std::string log = slurp(dir.file("log.csv"));
    std::istringstream lines(log);
    std::string line;
    std::getline(lines, line);  // header
    double expected = 0.0;
    while (std::getline(lines, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) ==
              doctest::Approx(expected).epsilon(1e-12));
        expected += 0.007;
    }
    CHECK(expected == doctest::Approx(4 * 0.007).epsilon(1e-12));

    // Re-running overwrites identically.
    const std::string first = slurp(dir.file("log.csv"));
    CHECK(run_cli({"train", "--config", cfg}) == 0);
    CHECK(slurp(dir.file("log.csv")) == first);
}

TEST_CASE("cli: compress produces artifact and self-describing report") {
    TempDir dir;
    write_file(dir.file("train.cfg"),
               "synthetic = blobs\nclasses = 2\nfeatures = 2\n"
               "train_per_class = 30\neval_per_class = 10\ndata_seed = 4\n"
               "dims = 2,8,2\nepochs = 10\nseed = 2\n"
               "checkpoint_out = " + dir.file("m.mlpc") + "\n" +
               "log_out = " + dir.file("log.csv") + "\n");
    REQUIRE(run_cli({"train", "--config", dir.file("train.cfg")}) == 0);

    CHECK(run_cli({"compress", "--checkpoint", dir.file("m.mlpc"), "--sparsity",
                   "0.5", "--k", "4", "--mode", "masked", "--artifact-out",
                   dir.file("a.cwgt"), "--report-out", dir.file("r.csv")}) == 0);
    CHECK(fs::exists(dir.file("a.cwgt")));
    const std::string report = slurp(dir.file("r.csv"));
    CHECK(report.rfind("sparsity,k,mode,seed,theta,ratio,", 0) == 0);
    CHECK(report.find("0.5,4,masked,") != std::string::npos);

    // Decoded artifact matches the quantized pipeline output.
    const auto artifact = read_artifact(dir.file("a.cwgt"));
    const auto model = load_checkpoint(dir.file("m.mlpc"));
    CHECK(decode(artifact).size() == flatten_weights(model).size());

    // Sparsity 1 is an argument error.
    CHECK(run_cli({"compress", "--checkpoint", dir.file("m.mlpc"), "--sparsity",
                   "1.0"}) == 1);

    // Sparsity 0 writes no artifact and reports ratio 1.
    CHECK(run_cli({"compress", "--checkpoint", dir.file("m.mlpc"), "--sparsity",
                   "0", "--report-out", dir.file("r0.csv"), "--artifact-out",
                   dir.file("a0.cwgt")}) == 0);
    CHECK_FALSE(fs::exists(dir.file("a0.cwgt")));
    CHECK(slurp(dir.file("r0.csv")).find(",1,") != std::string::npos);
}

TEST_CASE("cli: verify-theory exit codes") {
    CHECK(run_cli({"verify-theory", "--dimension", "8", "--trials", "20",
                   "--seed", "1"}) == 0);
    CHECK(run_cli({"verify-theory", "--dimension", "1"}) == 1);
    CHECK(run_cli({"verify-theory", "--trials", "0"}) == 1);
    CHECK(run_cli({"unknown-subcommand"}) == 1);
}

TEST_CASE("cli: gen-data writes loadable files") {
    TempDir dir;
    CHECK(run_cli({"gen-data", "--out", dir.file("train.csv"), "--eval-out",
                   dir.file("eval.csv"), "--classes", "3", "--features", "4",
                   "--train-per-class", "10", "--eval-per-class", "5", "--seed",
                   "7"}) == 0);
    const auto train = load_dataset(dir.file("train.csv"));
    const auto eval = load_dataset(dir.file("eval.csv"));
    CHECK(train.size() == 30);
    CHECK(eval.size() == 15);
    CHECK(train.feature_count == 4);
}
