#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwt/loss.hpp"

namespace cwt {

// Zero/non-zero pattern of a pruned weight vector.
struct SparsityMask {
    std::vector<std::uint8_t> bits;  // one entry per weight, 0 or 1
    std::size_t nonzero_count = 0;

    std::size_t size() const { return bits.size(); }
};

SparsityMask mask_from(std::span<const double> w);

// The ceil(sparsity*d)-th smallest magnitude; pruning at this threshold with
// the index tie rule yields exactly that many zeros. sparsity must lie in
// [0, 1): pruning everything would leave an invalid all-zero vector.
double threshold_for_sparsity(std::span<const double> w, double sparsity);

struct PruneResult {
    WeightVector pruned;
    SparsityMask mask;
};

// Zeroes every element with |w_i| <= theta. Throws std::domain_error if
// nothing would survive.
PruneResult prune(std::span<const double> w, double theta);

// Threshold derived from the target sparsity, with ties at the threshold
// broken in ascending index order so exactly ceil(sparsity*d) elements are
// zeroed on inputs without prior zeros.
struct PruneToSparsityResult {
    WeightVector pruned;
    SparsityMask mask;
    double theta = 0.0;
};

PruneToSparsityResult prune_to_sparsity(std::span<const double> w, double sparsity);

}  // namespace cwt
