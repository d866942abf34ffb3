#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cwt/loss.hpp"
#include "cwt/rng.hpp"

using namespace cwt;

namespace {

// Independent finite-difference oracle, central differences.
WeightVector fd_gradient(WeightVector x, double h) {
    WeightVector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = compressibility_loss(x);
        x[i] = keep - h;
        const double down = compressibility_loss(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

WeightVector random_vector(Rng& rng, std::size_t d, double away_from_zero) {
    WeightVector x(d);
    for (double& v : x) {
        const double sign = rng.uniform_below(2) == 0 ? 1.0 : -1.0;
        v = sign * (away_from_zero + (1.0 - away_from_zero) * rng.uniform());
    }
    return x;
}

}  // namespace

TEST_CASE("loss on fixed vectors") {
    CHECK(compressibility_loss(WeightVector{1, 0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(compressibility_loss(WeightVector{3, -3, 0, 3}) ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    // ||x||1 = 5, ||x||2 = 3
    CHECK(compressibility_loss(WeightVector{1, 2, 2}) ==
          doctest::Approx(5.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("loss rejects the all-zero vector") {
    CHECK_THROWS_AS(compressibility_loss(WeightVector{0, 0, 0}), std::domain_error);
    CHECK_THROWS_AS(compressibility_grad(WeightVector{0.0}), std::domain_error);
    CHECK_THROWS_AS(critical_point_c(WeightVector{}), std::domain_error);
    CHECK_THROWS_AS(diagnose_critical_point(WeightVector{0, 0}), std::domain_error);
}

TEST_CASE("gradient on fixed vectors") {
    const auto g0 = compressibility_grad(WeightVector{1, 1});
    CHECK(g0[0] == 0.0);
    CHECK(g0[1] == 0.0);

    const auto g1 = compressibility_grad(WeightVector{1, 2});
    const auto fd = fd_gradient({1, 2}, 1e-6);
    CHECK(g1[0] == doctest::Approx(fd[0]).epsilon(1e-7));
    CHECK(g1[1] == doctest::Approx(fd[1]).epsilon(1e-7));
    CHECK(g1[0] == doctest::Approx(0.178885).epsilon(1e-5));
    CHECK(g1[1] == doctest::Approx(-0.089443).epsilon(1e-5));

    for (double c : {0.5, 1.0, 7.25}) {
        const auto g = compressibility_grad(WeightVector{-c, 0.0, c});
        for (double v : g) CHECK(std::abs(v) < 1e-15);
    }
}

TEST_CASE("critical magnitude on fixed vectors") {
    CHECK(critical_point_c(WeightVector{2, 0, -2}) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(critical_point_c(WeightVector{1, 1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(critical_point_c(WeightVector{1, 2}) == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("diagnosis of exact ternary vectors") {
    const auto r = diagnose_critical_point(WeightVector{5, 0, -5, 5});
    CHECK(r.c == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(r.ternary_deviation == doctest::Approx(0.0).scale(1.0));
    CHECK(r.nonzero_count_n == 3);
    CHECK(r.sqrt_n_gap < 1e-12);

    const auto r2 = diagnose_critical_point(WeightVector{1, 1});
    CHECK(r2.c == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r2.ternary_deviation == doctest::Approx(0.0).scale(1.0));
    CHECK(r2.nonzero_count_n == 2);
    CHECK(r2.sqrt_n_gap < 1e-12);
}

TEST_CASE("diagnosis of a non-ternary vector by direct arithmetic") {
    // c = 5/3; element distances to {-c, 0, c} are 2/3 and 1/3, and the
    // deviation takes the max. The loss itself is 3/sqrt(5).
    const auto r = diagnose_critical_point(WeightVector{1, 2});
    CHECK(r.c == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
    CHECK(r.ternary_deviation == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.nonzero_count_n == 2);
    CHECK(r.loss_value == doctest::Approx(3.0 / std::sqrt(5.0)).epsilon(1e-14));
    CHECK(r.sqrt_n_gap ==
          doctest::Approx(std::abs(3.0 / std::sqrt(5.0) - std::sqrt(2.0)))
              .epsilon(1e-12));
}

TEST_CASE("loss is scale invariant") {
    Rng rng(42);
    for (int t = 0; t < 200; ++t) {
        const auto x = random_vector(rng, 1 + rng.uniform_below(128), 1e-6);
        const double base = compressibility_loss(x);
        double a = rng.uniform(1e-3, 1e3);
        if (rng.uniform_below(2) == 0) a = -a;
        WeightVector scaled = x;
        for (double& v : scaled) v *= a;
        CHECK(std::abs(compressibility_loss(scaled) - base) / base < 1e-12);
    }
}

TEST_CASE("loss lies in [1, sqrt(d)]") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 1 + rng.uniform_below(64);
        WeightVector x(d);
        for (double& v : x) v = rng.normal();
        if (l2_norm(x) == 0.0) continue;
        const double L = compressibility_loss(x);
        CHECK(L >= 1.0 - 1e-12);
        CHECK(L <= std::sqrt(static_cast<double>(d)) + 1e-12);
    }
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto x = random_vector(rng, 64, 1e-3);
        const auto g = compressibility_grad(x);
        const auto fd = fd_gradient(x, 1e-6);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double tol =
                std::max(1e-5 * std::max(std::abs(g[i]), std::abs(fd[i])), 1e-7);
            CHECK(std::abs(g[i] - fd[i]) <= tol);
        }
    }
}

TEST_CASE("gradient is orthogonal to the scaling direction") {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        const auto x = random_vector(rng, 32, 1e-4);
        const auto g = compressibility_grad(x);
        double dot = 0.0, gx_scale = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += g[i] * x[i];
            gx_scale += std::abs(g[i] * x[i]);
        }
        CHECK(std::abs(dot) <= 1e-9 * std::max(1.0, gx_scale));
    }
}

TEST_CASE("random ternary vectors diagnose cleanly") {
    Rng rng(19);
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + rng.uniform_below(64);
        const double c = rng.uniform(1e-3, 1e3);
        WeightVector x(d, 0.0);
        const std::size_t n = 1 + rng.uniform_below(d);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform_below(2) == 0 ? c : -c;
        }
        const auto r = diagnose_critical_point(x);
        CHECK(r.nonzero_count_n == n);
        CHECK(r.ternary_deviation <= 1e-12 * c);
        CHECK(r.sqrt_n_gap <= 1e-10 * std::sqrt(static_cast<double>(n)));
    }
}
