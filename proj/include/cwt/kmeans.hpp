#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwt/loss.hpp"
#include "cwt/prune.hpp"

namespace cwt {

// Centroids plus per-point labels for the surviving (non-pruned) weights.
// Centroids are pre-rounded to 32-bit float precision, the exact values the
// codec stores, so quantized vectors round-trip bit-for-bit.
struct Codebook {
    std::vector<double> centroids;       // length k
    std::vector<std::uint32_t> labels;   // one per non-zero, values in [0, k)
    std::vector<std::uint64_t> counts;   // cluster populations, length k
    std::vector<double> objective_trace; // sum of squared distances per Lloyd iteration
};

// 1-D Lloyd's algorithm with seeded k-means++ initialization. Deterministic
// for a given (data, k, seed). Ties in assignment go to the lowest centroid
// index; empty clusters keep their previous centroid. k may exceed the
// number of distinct values, leaving the surplus clusters empty.
Codebook kmeans_fit(std::span<const double> nonzeros, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters = 60);

// Shannon entropy (bits) of the normalized cluster populations; empty
// clusters contribute nothing. Lies in [0, log2 k].
double cluster_entropy(const Codebook& codebook);
double entropy_from_counts(std::span<const std::uint64_t> counts);

// Replaces each surviving weight with its assigned centroid; zeros stay
// zero. Labels pair with the mask's non-zero positions in index order.
WeightVector quantize(std::span<const double> w, const SparsityMask& mask,
                      const Codebook& codebook);

}  // namespace cwt
