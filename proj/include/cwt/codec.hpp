#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cwt/kmeans.hpp"
#include "cwt/loss.hpp"
#include "cwt/prune.hpp"

namespace cwt {

// Container layout (little-endian, 56-byte header):
//   magic "CWGT" | version u16 | backend u8 | flags u8 | d u64 |
//   nonzero_count u64 | k u32 | label_bit_width u8 | reserved u8[3] |
//   mask_len u64 | label_len u64 | centroid_len u64 |
//   mask stream | label stream | centroid stream
// Streams are bit-packed (mask LSB-first, labels fixed-width LSB-first;
// centroids raw 32-bit floats) and then deflated with zlib at level 9, the
// single pinned backend (id 1). flags: bit0 = zero-cluster mode (no mask,
// labels cover all d positions, centroid 0 appended), bit1 = raw values
// (mask-only pipeline: no quantization, the centroid stream carries one f32
// per surviving weight).
inline constexpr std::uint8_t kCodecBackendZlib9 = 1;
inline constexpr std::size_t kArtifactHeaderSize = 56;

enum class EncodeMode { Masked, ZeroCluster };

struct CompressedArtifact {
    std::uint64_t d = 0;
    std::uint64_t nonzero_count = 0;
    std::uint32_t k = 0;             // weight-cluster count; 0 in raw-values mode
    std::uint8_t label_bit_width = 0;
    bool zero_cluster_mode = false;
    bool raw_values = false;
    std::vector<std::uint8_t> mask_stream;      // compressed
    std::vector<std::uint8_t> label_stream;     // compressed
    std::vector<std::uint8_t> centroid_stream;  // compressed

    std::size_t byte_size() const {
        return kArtifactHeaderSize + mask_stream.size() + label_stream.size() +
               centroid_stream.size();
    }
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& stream, const std::string& what)
        : std::runtime_error(stream + " stream: " + what), stream_(stream) {}
    const std::string& stream() const { return stream_; }

private:
    std::string stream_;
};

// Bits packed LSB-first within each byte; final partial byte zero-padded.
std::vector<std::uint8_t> pack_mask(const SparsityMask& mask);
SparsityMask unpack_mask(std::span<const std::uint8_t> bytes, std::uint64_t d);

// Fixed-width values appended LSB-first to one continuous bit stream.
std::vector<std::uint8_t> pack_labels(std::span<const std::uint32_t> labels,
                                      unsigned bit_width);
std::vector<std::uint32_t> unpack_labels(std::span<const std::uint8_t> bytes,
                                         std::size_t count, unsigned bit_width);

std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> raw);
std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> compressed,
                                          std::size_t expected_size);

unsigned label_width_for(std::uint64_t domain);  // ceil(log2(domain)), min 1

// Masked mode: mask + labels over non-zeros + k centroids. Zero-cluster
// mode: no mask, centroid 0 appended as cluster k, labels over all d
// positions. Inconsistent mask/codebook input throws std::invalid_argument
// before anything is encoded.
CompressedArtifact encode(const SparsityMask& mask, const Codebook& codebook,
                          EncodeMode mode);

// Mask-only pipeline: surviving weights stored as raw 32-bit floats, no
// quantization. `values` are the non-zero weights in index order.
CompressedArtifact encode_mask_only(const SparsityMask& mask,
                                    std::span<const double> values);

// Reconstructs the length-d weight vector. Throws DecodeError naming the
// offending stream on corruption, truncation or out-of-range labels.
WeightVector decode(const CompressedArtifact& artifact);

std::vector<std::uint8_t> serialize_artifact(const CompressedArtifact& artifact);
CompressedArtifact parse_artifact(std::span<const std::uint8_t> bytes);
void write_artifact(const std::string& path, const CompressedArtifact& artifact);
CompressedArtifact read_artifact(const std::string& path);

struct CompressionReport {
    double sparsity = 0.0;
    double ratio = 0.0;
    // Entropy of the surviving-weight cluster populations; absent for the
    // mask-only pipeline.
    std::optional<double> entropy_bits;
    std::uint64_t mask_bytes = 0;
    std::uint64_t label_bytes = 0;
    std::uint64_t centroid_bytes = 0;
    std::uint64_t header_bytes = kArtifactHeaderSize;
    std::uint64_t total_bytes = 0;
    std::uint64_t baseline_bytes = 0;
};

// baseline = the original dense weights as 32-bit floats run through the
// same zlib backend. ratio = baseline / artifact size, except at sparsity 0
// where it is 1 by convention (no compression is applied there).
CompressionReport compression_ratio(const CompressedArtifact& artifact,
                                    std::span<const double> original);

}  // namespace cwt
