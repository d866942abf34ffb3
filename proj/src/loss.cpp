#include "cwt/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwt {

namespace {

void require_nonzero(double l2) {
    if (l2 == 0.0) {
        throw std::domain_error(
            "compressibility loss undefined for an all-zero vector");
    }
}

}  // namespace

double l1_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

double l2_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double compressibility_loss(std::span<const double> x) {
    const double l2 = l2_norm(x);
    require_nonzero(l2);
    return l1_norm(x) / l2;
}

WeightVector compressibility_grad(std::span<const double> x) {
    double l1 = 0.0, sq = 0.0;
    for (double v : x) {
        l1 += std::abs(v);
        sq += v * v;
    }
    const double l2 = std::sqrt(sq);
    require_nonzero(l2);
    const double inv_l2 = 1.0 / l2;
    const double scale = l1 / (sq * l2);
    WeightVector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        g[i] = sign * inv_l2 - x[i] * scale;
    }
    return g;
}

double critical_point_c(std::span<const double> x) {
    double l1 = 0.0, sq = 0.0;
    for (double v : x) {
        l1 += std::abs(v);
        sq += v * v;
    }
    require_nonzero(std::sqrt(sq));
    return sq / l1;
}

CriticalPointReport diagnose_critical_point(std::span<const double> x,
                                            double zero_tol) {
    if (zero_tol < 0.0) {
        throw std::invalid_argument("zero_tol must be non-negative");
    }
    double l1 = 0.0, sq = 0.0;
    for (double v : x) {
        l1 += std::abs(v);
        sq += v * v;
    }
    const double l2 = std::sqrt(sq);
    require_nonzero(l2);

    CriticalPointReport r;
    r.c = sq / l1;
    r.loss_value = l1 / l2;
    r.nonzero_count_n = 0;
    r.ternary_deviation = 0.0;
    for (double v : x) {
        const double a = std::abs(v);
        if (a > zero_tol) ++r.nonzero_count_n;
        r.ternary_deviation =
            std::max(r.ternary_deviation, std::min(a, std::abs(a - r.c)));
    }
    r.sqrt_n_gap =
        std::abs(r.loss_value - std::sqrt(static_cast<double>(r.nonzero_count_n)));
    return r;
}

}  // namespace cwt
