#include "cwt/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cwt {

namespace {

std::size_t target_zero_count(std::size_t d, double sparsity) {
    return static_cast<std::size_t>(
        std::ceil(sparsity * static_cast<double>(d) - 1e-12));
}

}  // namespace

SparsityMask mask_from(std::span<const double> w) {
    SparsityMask m;
    m.bits.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        m.bits[i] = w[i] != 0.0;
        m.nonzero_count += m.bits[i];
    }
    return m;
}

double threshold_for_sparsity(std::span<const double> w, double sparsity) {
    if (w.empty()) throw std::invalid_argument("empty weight vector");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
        throw std::invalid_argument("sparsity must lie in [0, 1)");
    }
    const std::size_t zeros = target_zero_count(w.size(), sparsity);
    if (zeros == 0) return 0.0;
    std::vector<double> mags(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) mags[i] = std::abs(w[i]);
    std::nth_element(mags.begin(), mags.begin() + (zeros - 1), mags.end());
    return mags[zeros - 1];
}

PruneResult prune(std::span<const double> w, double theta) {
    if (theta < 0.0) throw std::invalid_argument("theta must be non-negative");
    PruneResult r;
    r.pruned.assign(w.begin(), w.end());
    for (double& v : r.pruned) {
        if (std::abs(v) <= theta) v = 0.0;
    }
    r.mask = mask_from(r.pruned);
    if (r.mask.nonzero_count == 0) {
        throw std::domain_error("pruning removed every weight");
    }
    return r;
}

PruneToSparsityResult prune_to_sparsity(std::span<const double> w, double sparsity) {
    const double theta = threshold_for_sparsity(w, sparsity);
    const std::size_t zeros = target_zero_count(w.size(), sparsity);

    PruneToSparsityResult r;
    r.theta = theta;
    r.pruned.assign(w.begin(), w.end());
    std::size_t zeroed = 0;
    // Strictly-below-threshold elements always go; ties at the threshold are
    // pruned in ascending index order until the target count is met.
    for (double& v : r.pruned) {
        if (std::abs(v) < theta) {
            v = 0.0;
            ++zeroed;
        }
    }
    for (std::size_t i = 0; i < r.pruned.size() && zeroed < zeros; ++i) {
        if (r.pruned[i] != 0.0 && std::abs(r.pruned[i]) == theta) {
            r.pruned[i] = 0.0;
            ++zeroed;
        }
    }
    r.mask = mask_from(r.pruned);
    if (r.mask.nonzero_count == 0) {
        throw std::domain_error("pruning removed every weight");
    }
    return r;
}

}  // namespace cwt
