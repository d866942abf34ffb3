#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cwt {

using WeightVector = std::vector<double>;

// Default tolerance below which an element counts as zero when sizing the
// support of a vector.
inline constexpr double kDefaultZeroTol = 1e-8;

// Diagnostics of a vector against the ternary critical-point structure of
// the L1/L2 loss: the critical magnitude c, how far the vector is from the
// nearest exactly-ternary signal, and how far the loss is from sqrt(n).
struct CriticalPointReport {
    double c = 0.0;                 // (||x||2)^2 / ||x||1
    double ternary_deviation = 0.0; // max_i min(|x_i|, ||x_i| - c|)
    double loss_value = 0.0;
    std::size_t nonzero_count_n = 0;
    double sqrt_n_gap = 0.0;        // |loss_value - sqrt(n)|
};

double l1_norm(std::span<const double> x);
double l2_norm(std::span<const double> x);

// L(x) = ||x||1 / ||x||2. Throws std::domain_error on an all-zero (or
// empty) vector. Result lies in [1, sqrt(d)].
double compressibility_loss(std::span<const double> x);

// dL/dx_i = sign(x_i)/||x||2 - x_i * ||x||1 / (||x||2)^3, with sign(0) = 0
// so exact zeros stay stationary. Throws std::domain_error on all-zero input.
WeightVector compressibility_grad(std::span<const double> x);

// c = (||x||2)^2 / ||x||1, the magnitude every non-zero element takes at a
// critical point. Throws std::domain_error on all-zero input.
double critical_point_c(std::span<const double> x);

CriticalPointReport diagnose_critical_point(std::span<const double> x,
                                            double zero_tol = kDefaultZeroTol);

}  // namespace cwt
