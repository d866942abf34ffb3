#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "cwt/codec.hpp"
#include "cwt/kmeans.hpp"
#include "cwt/prune.hpp"
#include "cwt/rng.hpp"

using namespace cwt;

namespace {

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 15]);
    }
    return out;
}

SparsityMask mask_of(std::vector<std::uint8_t> bits) {
    SparsityMask m;
    m.bits = std::move(bits);
    for (auto b : m.bits) m.nonzero_count += (b != 0);
    return m;
}

struct Fixture {
    WeightVector quantized;
    SparsityMask mask;
    Codebook codebook;
};

Fixture random_fixture(Rng& rng, std::size_t d, double sparsity, std::size_t k) {
    WeightVector w(d);
    for (double& v : w) {
        v = rng.normal();
        if (v == 0.0) v = 0.25;
    }
    const auto pruned = prune_to_sparsity(w, sparsity);
    std::vector<double> survivors;
    for (double v : pruned.pruned) {
        if (v != 0.0) survivors.push_back(v);
    }
    Fixture f;
    f.codebook = kmeans_fit(survivors, k, rng.next_u64(), 25);
    f.mask = pruned.mask;
    f.quantized = quantize(pruned.pruned, f.mask, f.codebook);
    return f;
}

}  // namespace

TEST_CASE("mask bits pack LSB-first") {
    CHECK(pack_mask(mask_of({1, 0, 1, 1, 0, 0, 0, 0})) ==
          std::vector<std::uint8_t>{13});
    CHECK(pack_mask(mask_of({1, 1, 1, 1, 1, 1, 1, 1})) ==
          std::vector<std::uint8_t>{255});
    CHECK(pack_mask(mask_of({1, 1, 0, 0, 0, 0, 0, 0, 1, 1})) ==
          std::vector<std::uint8_t>{3, 3});
}

TEST_CASE("mask raw size is ceil(d/8) bytes") {
    Rng rng(1);
    for (std::size_t d : {1u, 7u, 8u, 9u, 100u, 1023u}) {
        std::vector<std::uint8_t> bits(d);
        for (auto& b : bits) b = rng.uniform_below(2);
        const auto m = mask_of(bits);
        const auto packed = pack_mask(m);
        CHECK(packed.size() == (d + 7) / 8);
        const auto back = unpack_mask(packed, d);
        CHECK(back.bits == m.bits);
        CHECK(back.nonzero_count == m.nonzero_count);
    }
}

TEST_CASE("labels pack at fixed width, LSB-first") {
    CHECK(label_width_for(1) == 1);
    CHECK(label_width_for(2) == 1);
    CHECK(label_width_for(3) == 2);
    CHECK(label_width_for(256) == 8);
    CHECK(label_width_for(257) == 9);

    const std::vector<std::uint32_t> labels{5, 2, 7};
    const auto packed = pack_labels(labels, 3);
    // 101 010 111 -> bits 101 010 111 LSB-first = 0b01010101, 0b0000001
    CHECK(packed == std::vector<std::uint8_t>{0b11010101, 0b00000001});
    CHECK(unpack_labels(packed, 3, 3) == labels);
}

TEST_CASE("round trips are bit-exact in all modes") {
    Rng rng(77);
    int checked = 0;
    for (int t = 0; t < 60; ++t) {
        const std::size_t d = 1 + rng.uniform_below(2000);
        const double sparsity = rng.uniform(0.0, 0.95);
        const std::size_t k = 1 + rng.uniform_below(300);
        if (static_cast<std::size_t>(std::ceil(sparsity * d - 1e-12)) >= d) continue;
        const auto f = random_fixture(rng, d, sparsity, k);

        const auto masked = encode(f.mask, f.codebook, EncodeMode::Masked);
        CHECK(decode(masked) == f.quantized);
        const auto reparsed = parse_artifact(serialize_artifact(masked));
        CHECK(decode(reparsed) == f.quantized);

        const auto zc = encode(f.mask, f.codebook, EncodeMode::ZeroCluster);
        CHECK(zc.mask_stream.empty());
        CHECK(decode(zc) == f.quantized);
        ++checked;
    }
    CHECK(checked >= 50);
}

TEST_CASE("mask-only artifacts return the survivors at 32-bit precision") {
    Rng rng(3);
    WeightVector w(333);
    for (double& v : w) v = rng.normal();
    const auto pruned = prune_to_sparsity(w, 0.6);
    std::vector<double> survivors;
    for (double v : pruned.pruned) {
        if (v != 0.0) survivors.push_back(v);
    }
    const auto artifact = encode_mask_only(pruned.mask, survivors);
    CHECK(artifact.raw_values);
    CHECK(artifact.k == 0);
    const auto decoded = decode(artifact);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (pruned.pruned[i] == 0.0) {
            CHECK(decoded[i] == 0.0);
        } else {
            CHECK(decoded[i] ==
                  static_cast<double>(static_cast<float>(survivors[rank])));
            ++rank;
        }
    }
}

TEST_CASE("the two-survivor fixture encodes to frozen golden bytes") {
    WeightVector w(16, 0.0);
    w[3] = 0.5;
    w[11] = 0.5;
    const auto mask = mask_from(w);
    Codebook cb;
    cb.centroids = {0.5};
    cb.labels = {0, 0};
    cb.counts = {2};

    const auto masked = serialize_artifact(encode(mask, cb, EncodeMode::Masked));
    CHECK(to_hex(masked) ==
          "43574754010001001000000000000000020000000000000001000000010000000a"
          "0000000000000009000000000000000c0000000000000078dae3e00000001a0011"
          "78da6300000001000178da636060b0070000430040");

    // Header fields at their fixed offsets.
    CHECK(masked[0] == 'C');
    CHECK(masked[1] == 'W');
    CHECK(masked[2] == 'G');
    CHECK(masked[3] == 'T');
    CHECK((masked[4] | (masked[5] << 8)) == 1);  // version
    CHECK(masked[6] == kCodecBackendZlib9);
    CHECK(masked[7] == 0);   // flags
    CHECK(masked[8] == 16);  // d
    CHECK(masked[16] == 2);  // nonzero_count
    CHECK(masked[24] == 1);  // k
    CHECK(masked[28] == 1);  // label bit width

    const auto zc = serialize_artifact(encode(mask, cb, EncodeMode::ZeroCluster));
    CHECK(to_hex(zc) ==
          "435747540100010110000000000000000200000000000000010000000100000000"
          "000000000000000a000000000000000e0000000000000078dafbfe1d0002e701ef"
          "78da636060b06700020001430040");
    CHECK(zc[7] == 1);  // zero-cluster flag

    // Decodes to the original 16-vector in both modes.
    CHECK(decode(parse_artifact(masked)) == w);
    CHECK(decode(parse_artifact(zc)) == w);
}

TEST_CASE("truncated streams fail loudly, naming the stream") {
    Rng rng(9);
    const auto f = random_fixture(rng, 200, 0.5, 7);
    auto artifact = encode(f.mask, f.codebook, EncodeMode::Masked);
    artifact.label_stream.resize(artifact.label_stream.size() / 2);
    CHECK_THROWS_AS(decode(artifact), DecodeError);
    try {
        decode(artifact);
    } catch (const DecodeError& e) {
        CHECK(e.stream() == "label");
    }
}

TEST_CASE("labels outside the codebook fail loudly") {
    // k = 3, width 2: the label value 3 fits the width but not the codebook.
    const auto mask = mask_of({1, 1, 0, 0});
    CompressedArtifact artifact;
    artifact.d = 4;
    artifact.nonzero_count = 2;
    artifact.k = 3;
    artifact.label_bit_width = 2;
    artifact.mask_stream = zlib_compress(pack_mask(mask));
    artifact.label_stream =
        zlib_compress(pack_labels(std::vector<std::uint32_t>{3, 1}, 2));
    artifact.centroid_stream = zlib_compress(std::vector<std::uint8_t>(12, 0));
    try {
        decode(artifact);
        CHECK(false);
    } catch (const DecodeError& e) {
        CHECK(e.stream() == "label");
        CHECK(std::string(e.what()).find("out of range") != std::string::npos);
    }
}

TEST_CASE("corrupt containers are rejected") {
    Rng rng(10);
    const auto f = random_fixture(rng, 64, 0.4, 4);
    auto bytes = serialize_artifact(encode(f.mask, f.codebook, EncodeMode::Masked));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(parse_artifact(bad_magic), DecodeError);
    auto bad_len = bytes;
    bad_len.pop_back();
    CHECK_THROWS_AS(parse_artifact(bad_len), DecodeError);
}

TEST_CASE("report sizes add up exactly") {
    Rng rng(12);
    WeightVector original(500);
    for (double& v : original) v = rng.normal();
    const auto pruned = prune_to_sparsity(original, 0.5);
    std::vector<double> survivors;
    for (double v : pruned.pruned) {
        if (v != 0.0) survivors.push_back(v);
    }
    const auto cb = kmeans_fit(survivors, 16, 0);
    const auto artifact = encode(pruned.mask, cb, EncodeMode::Masked);
    const auto report = compression_ratio(artifact, original);

    CHECK(report.total_bytes == serialize_artifact(artifact).size());
    CHECK(report.total_bytes == report.header_bytes + report.mask_bytes +
                                    report.label_bytes + report.centroid_bytes);
    CHECK(report.sparsity == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.ratio > 0.0);
    REQUIRE(report.entropy_bits.has_value());
    CHECK(*report.entropy_bits == doctest::Approx(cluster_entropy(cb)).epsilon(1e-12));
    CHECK_THROWS_AS(compression_ratio(artifact, WeightVector(499, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("ratio is 1 by convention when nothing is pruned") {
    Rng rng(20);
    WeightVector w(64);
    for (double& v : w) {
        v = rng.normal();
        if (v == 0.0) v = 0.5;
    }
    const auto mask = mask_from(w);
    std::vector<double> survivors(w.begin(), w.end());
    const auto cb = kmeans_fit(survivors, 4, 0);
    const auto artifact = encode(mask, cb, EncodeMode::Masked);
    const auto report = compression_ratio(artifact, w);
    CHECK(report.sparsity == 0.0);
    CHECK(report.ratio == 1.0);
}

TEST_CASE("mask-only ratio grows with sparsity") {
    Rng rng(30);
    WeightVector w(4000);
    for (double& v : w) v = rng.normal();
    double previous = 0.0;
    for (double s : {0.3, 0.5, 0.7, 0.9}) {
        const auto pruned = prune_to_sparsity(w, s);
        std::vector<double> survivors;
        for (double v : pruned.pruned) {
            if (v != 0.0) survivors.push_back(v);
        }
        const auto artifact = encode_mask_only(pruned.mask, survivors);
        const auto report = compression_ratio(artifact, w);
        CHECK(report.ratio > previous);
        previous = report.ratio;
    }
}

TEST_CASE("inconsistent encode inputs fail before producing bytes") {
    const auto mask = mask_of({1, 0, 1});
    Codebook cb;
    cb.centroids = {1.0};
    cb.labels = {0};  // mask says two survivors
    cb.counts = {1};
    CHECK_THROWS_AS(encode(mask, cb, EncodeMode::Masked), std::invalid_argument);
    CHECK_THROWS_AS(encode_mask_only(mask, std::vector<double>{1.0}),
                    std::invalid_argument);
    Codebook bad_label;
    bad_label.centroids = {1.0};
    bad_label.labels = {0, 1};
    bad_label.counts = {2};
    CHECK_THROWS_AS(encode(mask, bad_label, EncodeMode::Masked),
                    std::invalid_argument);
}
