#include "cwt/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cwt/rng.hpp"

namespace cwt {

namespace {

std::size_t nearest_centroid(double v, std::span<const double> centroids) {
    std::size_t best = 0;
    double best_d = std::abs(v - centroids[0]);
    for (std::size_t j = 1; j < centroids.size(); ++j) {
        const double d = std::abs(v - centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// k-means++: first centroid uniform, the rest sampled proportionally to the
// squared distance from the nearest chosen centroid. Distances are updated
// incrementally, O(n) per new centroid.
std::vector<double> seed_centroids(std::span<const double> data, std::size_t k,
                                   Rng& rng) {
    std::vector<double> centroids;
    centroids.reserve(k);
    centroids.push_back(data[rng.uniform_below(data.size())]);
    std::vector<double> dist_sq(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double d = data[i] - centroids[0];
        dist_sq[i] = d * d;
    }
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : dist_sq) total += d;
        if (total == 0.0) {
            // Fewer distinct values than k: duplicate; the copies end up as
            // empty clusters.
            centroids.push_back(centroids.back());
            continue;
        }
        const double r = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = data.size() - 1;
        for (std::size_t i = 0; i < data.size(); ++i) {
            acc += dist_sq[i];
            if (acc > r) {
                pick = i;
                break;
            }
        }
        centroids.push_back(data[pick]);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double d = data[i] - centroids.back();
            dist_sq[i] = std::min(dist_sq[i], d * d);
        }
    }
    return centroids;
}

}  // namespace

Codebook kmeans_fit(std::span<const double> nonzeros, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters) {
    if (nonzeros.empty()) throw std::invalid_argument("kmeans_fit needs data");
    if (k == 0) throw std::invalid_argument("k must be positive");

    Rng rng(seed);
    std::vector<double> centroids = seed_centroids(nonzeros, k, rng);
    std::vector<std::uint32_t> labels(nonzeros.size(), 0);
    std::vector<std::uint64_t> counts(k, 0);
    std::vector<double> objective_trace;

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = (iter == 0);
        double objective = 0.0;
        std::fill(counts.begin(), counts.end(), 0);
        std::vector<double> sums(k, 0.0);
        for (std::size_t i = 0; i < nonzeros.size(); ++i) {
            const auto j = static_cast<std::uint32_t>(
                nearest_centroid(nonzeros[i], centroids));
            if (j != labels[i]) changed = true;
            labels[i] = j;
            ++counts[j];
            sums[j] += nonzeros[i];
            const double d = nonzeros[i] - centroids[j];
            objective += d * d;
        }
        objective_trace.push_back(objective);
        if (!changed) break;
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                centroids[j] = sums[j] / static_cast<double>(counts[j]);
            }
        }
    }

    // Snap centroids to the 32-bit precision the codec stores, then one
    // final assignment pass so labels/counts match the returned centroids.
    for (double& c : centroids) c = static_cast<double>(static_cast<float>(c));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < nonzeros.size(); ++i) {
        labels[i] = static_cast<std::uint32_t>(nearest_centroid(nonzeros[i], centroids));
        ++counts[labels[i]];
    }

    Codebook cb;
    cb.centroids = std::move(centroids);
    cb.labels = std::move(labels);
    cb.counts = std::move(counts);
    cb.objective_trace = std::move(objective_trace);
    return cb;
}

double entropy_from_counts(std::span<const std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw std::invalid_argument("entropy needs at least one sample");
    double h = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

double cluster_entropy(const Codebook& codebook) {
    return entropy_from_counts(codebook.counts);
}

WeightVector quantize(std::span<const double> w, const SparsityMask& mask,
                      const Codebook& codebook) {
    if (mask.size() != w.size()) {
        throw std::invalid_argument("mask length does not match weight vector");
    }
    if (codebook.labels.size() != mask.nonzero_count) {
        throw std::invalid_argument("label count does not match mask non-zero count");
    }
    WeightVector out(w.size(), 0.0);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!mask.bits[i]) continue;
        const auto label = codebook.labels[rank++];
        if (label >= codebook.centroids.size()) {
            throw std::invalid_argument("label indexes past the end of the codebook");
        }
        out[i] = codebook.centroids[label];
    }
    return out;
}

}  // namespace cwt
