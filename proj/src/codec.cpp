#include "cwt/codec.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cwt/tensor_io.hpp"

namespace cwt {

namespace {

constexpr char kMagic[4] = {'C', 'W', 'G', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagZeroCluster = 0x01;
constexpr std::uint8_t kFlagRawValues = 0x02;

std::vector<std::uint8_t> pack_f32(std::span<const double> values) {
    std::vector<std::uint8_t> out;
    out.reserve(values.size() * 4);
    for (double v : values) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) {
            out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
        }
    }
    return out;
}

std::vector<double> unpack_f32(std::span<const std::uint8_t> bytes) {
    std::vector<double> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
        }
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

void check_consistency(const SparsityMask& mask, const Codebook& codebook) {
    if (mask.size() == 0) throw std::invalid_argument("mask must be non-empty");
    std::size_t set = 0;
    for (auto b : mask.bits) set += (b != 0);
    if (set != mask.nonzero_count) {
        throw std::invalid_argument("mask nonzero_count does not match its bits");
    }
    if (codebook.labels.size() != mask.nonzero_count) {
        throw std::invalid_argument("label count does not match mask non-zero count");
    }
    if (codebook.centroids.empty()) {
        throw std::invalid_argument("codebook has no centroids");
    }
    for (auto label : codebook.labels) {
        if (label >= codebook.centroids.size()) {
            throw std::invalid_argument("label indexes past the end of the codebook");
        }
    }
}

}  // namespace

unsigned label_width_for(std::uint64_t domain) {
    unsigned w = 0;
    while ((std::uint64_t{1} << w) < domain) ++w;
    return w == 0 ? 1 : w;
}

std::vector<std::uint8_t> pack_mask(const SparsityMask& mask) {
    if (mask.size() == 0) throw std::invalid_argument("mask must be non-empty");
    std::vector<std::uint8_t> out((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask.bits[i]) out[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    return out;
}

SparsityMask unpack_mask(std::span<const std::uint8_t> bytes, std::uint64_t d) {
    if (bytes.size() != (d + 7) / 8) {
        throw DecodeError("mask", "byte length does not match element count");
    }
    SparsityMask mask;
    mask.bits.resize(d);
    for (std::uint64_t i = 0; i < d; ++i) {
        mask.bits[i] = (bytes[i >> 3] >> (i & 7)) & 1u;
        mask.nonzero_count += mask.bits[i];
    }
    // Padding bits in the final partial byte must be zero.
    for (std::uint64_t i = d; i < bytes.size() * 8; ++i) {
        if ((bytes[i >> 3] >> (i & 7)) & 1u) {
            throw DecodeError("mask", "non-zero padding bits");
        }
    }
    return mask;
}

std::vector<std::uint8_t> pack_labels(std::span<const std::uint32_t> labels,
                                      unsigned bit_width) {
    if (bit_width == 0 || bit_width > 32) {
        throw std::invalid_argument("label bit width must lie in [1, 32]");
    }
    std::vector<std::uint8_t> out((labels.size() * bit_width + 7) / 8, 0);
    std::size_t t = 0;
    for (auto v : labels) {
        for (unsigned b = 0; b < bit_width; ++b, ++t) {
            if ((v >> b) & 1u) out[t >> 3] |= static_cast<std::uint8_t>(1u << (t & 7));
        }
    }
    return out;
}

std::vector<std::uint32_t> unpack_labels(std::span<const std::uint8_t> bytes,
                                         std::size_t count, unsigned bit_width) {
    if (bytes.size() != (count * bit_width + 7) / 8) {
        throw DecodeError("label", "byte length does not match label count");
    }
    std::vector<std::uint32_t> out(count, 0);
    std::size_t t = 0;
    for (auto& v : out) {
        for (unsigned b = 0; b < bit_width; ++b, ++t) {
            v |= static_cast<std::uint32_t>((bytes[t >> 3] >> (t & 7)) & 1u) << b;
        }
    }
    for (; t < bytes.size() * 8; ++t) {
        if ((bytes[t >> 3] >> (t & 7)) & 1u) {
            throw DecodeError("label", "non-zero padding bits");
        }
    }
    return out;
}

std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    const int rc = compress2(out.data(), &bound, raw.data(),
                             static_cast<uLong>(raw.size()), 9);
    if (rc != Z_OK) throw std::runtime_error("zlib compression failed");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> compressed,
                                          std::size_t expected_size) {
    std::vector<std::uint8_t> out(expected_size);
    uLongf size = static_cast<uLongf>(expected_size);
    const int rc = uncompress(out.data(), &size, compressed.data(),
                              static_cast<uLong>(compressed.size()));
    if (rc != Z_OK || size != expected_size) {
        throw std::runtime_error("zlib decompression failed");
    }
    return out;
}

CompressedArtifact encode(const SparsityMask& mask, const Codebook& codebook,
                          EncodeMode mode) {
    check_consistency(mask, codebook);

    CompressedArtifact a;
    a.d = mask.size();
    a.nonzero_count = mask.nonzero_count;
    a.k = static_cast<std::uint32_t>(codebook.centroids.size());

    if (mode == EncodeMode::Masked) {
        a.zero_cluster_mode = false;
        a.label_bit_width = static_cast<std::uint8_t>(label_width_for(a.k));
        a.mask_stream = zlib_compress(pack_mask(mask));
        a.label_stream =
            zlib_compress(pack_labels(codebook.labels, a.label_bit_width));
        a.centroid_stream = zlib_compress(pack_f32(codebook.centroids));
        return a;
    }

    // Zero-cluster mode: centroid 0 joins as cluster k, labels span all d
    // positions, and the mask stream stays empty.
    a.zero_cluster_mode = true;
    a.label_bit_width = static_cast<std::uint8_t>(label_width_for(a.k + 1));
    std::vector<std::uint32_t> full(a.d, a.k);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask.bits[i]) full[i] = codebook.labels[rank++];
    }
    std::vector<double> centroids = codebook.centroids;
    centroids.push_back(0.0);
    a.label_stream = zlib_compress(pack_labels(full, a.label_bit_width));
    a.centroid_stream = zlib_compress(pack_f32(centroids));
    return a;
}

CompressedArtifact encode_mask_only(const SparsityMask& mask,
                                    std::span<const double> values) {
    if (mask.size() == 0) throw std::invalid_argument("mask must be non-empty");
    if (values.size() != mask.nonzero_count) {
        throw std::invalid_argument("value count does not match mask non-zero count");
    }
    CompressedArtifact a;
    a.d = mask.size();
    a.nonzero_count = mask.nonzero_count;
    a.k = 0;
    a.raw_values = true;
    a.label_bit_width = 0;
    a.mask_stream = zlib_compress(pack_mask(mask));
    a.centroid_stream = zlib_compress(pack_f32(values));
    return a;
}

namespace {

std::vector<std::uint8_t> inflate_stream(const char* name,
                                         std::span<const std::uint8_t> data,
                                         std::size_t expected_size) {
    try {
        return zlib_decompress(data, expected_size);
    } catch (const std::runtime_error&) {
        throw DecodeError(name, "corrupt or truncated");
    }
}

}  // namespace

WeightVector decode(const CompressedArtifact& artifact) {
    if (artifact.d == 0) throw DecodeError("header", "d must be positive");
    if (artifact.nonzero_count > artifact.d) {
        throw DecodeError("header", "nonzero_count exceeds d");
    }

    if (artifact.raw_values) {
        if (!artifact.label_stream.empty()) {
            throw DecodeError("label", "must be empty in raw-values mode");
        }
        const auto mask_raw = inflate_stream("mask", artifact.mask_stream,
                                             (artifact.d + 7) / 8);
        const SparsityMask mask = unpack_mask(mask_raw, artifact.d);
        if (mask.nonzero_count != artifact.nonzero_count) {
            throw DecodeError("mask", "non-zero count does not match header");
        }
        const auto values_raw = inflate_stream("centroid", artifact.centroid_stream,
                                               artifact.nonzero_count * 4);
        const std::vector<double> values = unpack_f32(values_raw);
        WeightVector out(artifact.d, 0.0);
        std::size_t rank = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (mask.bits[i]) out[i] = values[rank++];
        }
        return out;
    }

    if (artifact.k == 0) throw DecodeError("header", "k must be positive");

    if (artifact.zero_cluster_mode) {
        if (!artifact.mask_stream.empty()) {
            throw DecodeError("mask", "must be empty in zero-cluster mode");
        }
        if (artifact.label_bit_width != label_width_for(artifact.k + 1)) {
            throw DecodeError("header", "label bit width does not match k");
        }
        const auto label_raw =
            inflate_stream("label", artifact.label_stream,
                           (artifact.d * artifact.label_bit_width + 7) / 8);
        const auto labels =
            unpack_labels(label_raw, artifact.d, artifact.label_bit_width);
        const auto centroid_raw = inflate_stream(
            "centroid", artifact.centroid_stream, (artifact.k + 1ull) * 4);
        const std::vector<double> centroids = unpack_f32(centroid_raw);
        WeightVector out(artifact.d, 0.0);
        std::uint64_t nonzeros = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (labels[i] > artifact.k) {
                throw DecodeError("label", "label out of range");
            }
            out[i] = centroids[labels[i]];
            nonzeros += (labels[i] != artifact.k);
        }
        if (nonzeros != artifact.nonzero_count) {
            throw DecodeError("label", "non-zero count does not match header");
        }
        return out;
    }

    if (artifact.label_bit_width != label_width_for(artifact.k)) {
        throw DecodeError("header", "label bit width does not match k");
    }
    const auto mask_raw =
        inflate_stream("mask", artifact.mask_stream, (artifact.d + 7) / 8);
    const SparsityMask mask = unpack_mask(mask_raw, artifact.d);
    if (mask.nonzero_count != artifact.nonzero_count) {
        throw DecodeError("mask", "non-zero count does not match header");
    }
    const auto label_raw = inflate_stream(
        "label", artifact.label_stream,
        (artifact.nonzero_count * artifact.label_bit_width + 7) / 8);
    const auto labels = unpack_labels(label_raw, artifact.nonzero_count,
                                      artifact.label_bit_width);
    const auto centroid_raw = inflate_stream(
        "centroid", artifact.centroid_stream, artifact.k * 4ull);
    const std::vector<double> centroids = unpack_f32(centroid_raw);
    WeightVector out(artifact.d, 0.0);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!mask.bits[i]) continue;
        const auto label = labels[rank++];
        if (label >= artifact.k) throw DecodeError("label", "label out of range");
        out[i] = centroids[label];
    }
    return out;
}

std::vector<std::uint8_t> serialize_artifact(const CompressedArtifact& a) {
    std::vector<std::uint8_t> out;
    out.reserve(a.byte_size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    out.push_back(kCodecBackendZlib9);
    std::uint8_t flags = 0;
    if (a.zero_cluster_mode) flags |= kFlagZeroCluster;
    if (a.raw_values) flags |= kFlagRawValues;
    out.push_back(flags);
    put_u64(out, a.d);
    put_u64(out, a.nonzero_count);
    put_u32(out, a.k);
    out.push_back(a.label_bit_width);
    out.insert(out.end(), 3, 0);
    put_u64(out, a.mask_stream.size());
    put_u64(out, a.label_stream.size());
    put_u64(out, a.centroid_stream.size());
    out.insert(out.end(), a.mask_stream.begin(), a.mask_stream.end());
    out.insert(out.end(), a.label_stream.begin(), a.label_stream.end());
    out.insert(out.end(), a.centroid_stream.begin(), a.centroid_stream.end());
    return out;
}

CompressedArtifact parse_artifact(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kArtifactHeaderSize) {
        throw DecodeError("header", "container shorter than header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DecodeError("header", "bad magic");
    }
    auto u16 = [&](std::size_t off) {
        return static_cast<std::uint16_t>(bytes[off] | (bytes[off + 1] << 8));
    };
    auto u32 = [&](std::size_t off) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
        return v;
    };
    auto u64 = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[off + i]) << (8 * i);
        return v;
    };
    if (u16(4) != kVersion) throw DecodeError("header", "unsupported version");
    if (bytes[6] != kCodecBackendZlib9) {
        throw DecodeError("header", "unknown compression backend");
    }
    CompressedArtifact a;
    const std::uint8_t flags = bytes[7];
    a.zero_cluster_mode = flags & kFlagZeroCluster;
    a.raw_values = flags & kFlagRawValues;
    a.d = u64(8);
    a.nonzero_count = u64(16);
    a.k = u32(24);
    a.label_bit_width = bytes[28];
    const std::uint64_t mask_len = u64(32);
    const std::uint64_t label_len = u64(40);
    const std::uint64_t centroid_len = u64(48);
    if (bytes.size() != kArtifactHeaderSize + mask_len + label_len + centroid_len) {
        throw DecodeError("header", "stream lengths do not match container size");
    }
    auto cursor = bytes.begin() + kArtifactHeaderSize;
    a.mask_stream.assign(cursor, cursor + mask_len);
    cursor += mask_len;
    a.label_stream.assign(cursor, cursor + label_len);
    cursor += label_len;
    a.centroid_stream.assign(cursor, cursor + centroid_len);
    return a;
}

void write_artifact(const std::string& path, const CompressedArtifact& artifact) {
    const auto bytes = serialize_artifact(artifact);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write artifact: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("artifact write failed: " + path);
}

CompressedArtifact read_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open artifact: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_artifact(bytes);
}

CompressionReport compression_ratio(const CompressedArtifact& artifact,
                                    std::span<const double> original) {
    if (original.size() != artifact.d) {
        throw std::invalid_argument("original length does not match artifact d");
    }
    CompressionReport r;
    r.mask_bytes = artifact.mask_stream.size();
    r.label_bytes = artifact.label_stream.size();
    r.centroid_bytes = artifact.centroid_stream.size();
    r.total_bytes = artifact.byte_size();
    r.baseline_bytes = zlib_compress(pack_f32(original)).size();
    r.sparsity = 1.0 - static_cast<double>(artifact.nonzero_count) /
                           static_cast<double>(artifact.d);
    r.ratio = r.sparsity == 0.0
                  ? 1.0
                  : static_cast<double>(r.baseline_bytes) /
                        static_cast<double>(r.total_bytes);
    if (!artifact.raw_values) {
        const std::size_t count =
            artifact.zero_cluster_mode ? artifact.d : artifact.nonzero_count;
        const auto label_raw = inflate_stream(
            "label", artifact.label_stream,
            (count * artifact.label_bit_width + 7) / 8);
        const auto labels =
            unpack_labels(label_raw, count, artifact.label_bit_width);
        std::vector<std::uint64_t> counts(artifact.k, 0);
        for (auto label : labels) {
            if (artifact.zero_cluster_mode && label == artifact.k) continue;
            if (label >= artifact.k) throw DecodeError("label", "label out of range");
            ++counts[label];
        }
        r.entropy_bits = entropy_from_counts(counts);
    }
    return r;
}

}  // namespace cwt
