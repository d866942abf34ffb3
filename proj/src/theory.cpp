#include "cwt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "cwt/rng.hpp"

namespace cwt {

namespace {

constexpr std::size_t kStallLimit = 100;

double ternary_deviation_of(std::span<const double> x) {
    double l1 = 0.0, sq = 0.0;
    for (double v : x) {
        l1 += std::abs(v);
        sq += v * v;
    }
    const double c = sq / l1;
    double dev = 0.0;
    for (double v : x) {
        const double a = std::abs(v);
        dev = std::max(dev, std::min(a, std::abs(a - c)));
    }
    return dev;
}

}  // namespace

bool is_exactly_ternary(std::span<const double> x) {
    double sq = 0.0;
    for (double v : x) sq += v * v;
    if (sq == 0.0) return false;
    const double c = critical_point_c(x);
    for (double v : x) {
        const double a = std::abs(v);
        if (a != 0.0 && std::abs(a - c) > 1e-12 * c) return false;
    }
    return true;
}

DescentTrace minimize_loss(std::span<const double> x0, const DescentOptions& opts) {
    if (opts.step_size <= 0.0) {
        throw std::invalid_argument("step_size must be positive");
    }
    if (opts.zero_tol < 0.0) {
        throw std::invalid_argument("zero_tol must be non-negative");
    }

    DescentTrace trace;
    WeightVector x(x0.begin(), x0.end());
    std::vector<char> frozen(x.size(), 0);
    for (std::size_t i = 0; i < x.size(); ++i) frozen[i] = (x[i] == 0.0);

    double loss = compressibility_loss(x);  // throws on all-zero input
    trace.iterates.push_back({0, loss, ternary_deviation_of(x)});

    auto converged_at = [&](const CriticalPointReport& r) {
        return r.ternary_deviation / r.c < opts.convergence_tol &&
               r.sqrt_n_gap < opts.convergence_tol;
    };

    {
        const auto r0 = diagnose_critical_point(x, opts.zero_tol);
        if (converged_at(r0)) {
            trace.final_x = std::move(x);
            trace.final_report = r0;
            trace.converged = true;
            return trace;
        }
    }

    double eta = opts.step_size;
    std::size_t rejected_in_row = 0;
    WeightVector proposal(x.size());

    for (std::size_t t = 0; t < opts.max_steps; ++t) {
        const WeightVector g = compressibility_grad(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            proposal[i] = frozen[i] ? 0.0 : x[i] - eta * g[i];
        }
        const double proposal_loss = compressibility_loss(proposal);
        if (proposal_loss > loss) {
            eta *= 0.5;
            if (++rejected_in_row >= kStallLimit) {
                trace.failed = true;
                break;
            }
            continue;
        }
        rejected_in_row = 0;
        x.swap(proposal);
        loss = proposal_loss;
        ++trace.steps_taken;

        // Freeze elements that crossed below zero_tol, but never the last
        // live one: the loss is undefined on the all-zero vector.
        std::size_t live = 0;
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (frozen[i]) continue;
            ++live;
            if (std::abs(x[i]) < opts.zero_tol) candidates.push_back(i);
        }
        if (candidates.size() == live && !candidates.empty()) {
            const auto spare = *std::max_element(
                candidates.begin(), candidates.end(),
                [&](std::size_t a, std::size_t b) {
                    return std::abs(x[a]) < std::abs(x[b]);
                });
            std::erase(candidates, spare);
        }
        if (!candidates.empty()) {
            for (std::size_t i : candidates) {
                x[i] = 0.0;
                frozen[i] = 1;
            }
            eta = opts.step_size;
            loss = compressibility_loss(x);
        }

        trace.iterates.push_back({trace.steps_taken, loss, ternary_deviation_of(x)});

        const auto r = diagnose_critical_point(x, opts.zero_tol);
        if (converged_at(r)) {
            trace.converged = true;
            break;
        }
    }

    trace.final_report = diagnose_critical_point(x, opts.zero_tol);
    trace.final_x = std::move(x);
    return trace;
}

void write_trace(std::ostream& os, const DescentTrace& trace) {
    os << "step,loss,ternary_deviation\n";
    os << std::setprecision(17);
    for (const auto& s : trace.iterates) {
        os << s.step_index << ',' << s.loss_value << ',' << s.ternary_deviation
           << '\n';
    }
}

PerturbationSpec make_perturbation_spec(std::span<const double> x,
                                        std::vector<int> pattern,
                                        double epsilon) {
    if (pattern.size() != x.size()) {
        throw std::invalid_argument("pattern length must match vector length");
    }
    std::size_t nonzero_entries = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] < -1 || pattern[i] > 1) {
            throw std::invalid_argument("pattern entries must be -1, 0 or +1");
        }
        if (pattern[i] != 0) {
            ++nonzero_entries;
            if (x[i] == 0.0) ++hits;
        }
    }
    if (nonzero_entries == 0) {
        throw std::invalid_argument("pattern must have at least one non-zero entry");
    }
    if (epsilon <= 0.0) {
        throw std::invalid_argument("epsilon must be positive");
    }
    const double c = critical_point_c(x);
    if (epsilon > c / 1000.0) {
        throw std::invalid_argument("epsilon must satisfy epsilon <= c/1000");
    }
    return PerturbationSpec{epsilon, std::move(pattern), hits};
}

PerturbationResult perturbation_test(std::span<const double> x,
                                     const PerturbationSpec& spec) {
    if (!is_exactly_ternary(x)) {
        throw std::invalid_argument("perturbation_test requires an exactly ternary vector");
    }
    if (spec.pattern.size() != x.size()) {
        throw std::invalid_argument("pattern length must match vector length");
    }
    PerturbationResult r;
    r.loss_before = compressibility_loss(x);
    WeightVector y(x.begin(), x.end());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += spec.epsilon * spec.pattern[i];
    }
    r.loss_after = compressibility_loss(y);
    r.increased = r.loss_after > r.loss_before;
    return r;
}

double sweep_perturbations(std::span<const double> x, double epsilon,
                           std::size_t trials, std::uint64_t seed) {
    if (trials < 1) {
        throw std::invalid_argument("trials must be at least 1");
    }
    if (!is_exactly_ternary(x)) {
        throw std::invalid_argument("sweep_perturbations requires an exactly ternary vector");
    }
    bool has_zero = false;
    for (double v : x) has_zero |= (v == 0.0);
    if (!has_zero) {
        throw std::invalid_argument(
            "vector has no zero element; no direction can hit the zero support");
    }

    Rng rng(seed);
    std::vector<int> pattern(x.size());
    std::size_t increased = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        // Entries -1/0/+1 with probability 1/3 each, resampled until the
        // pattern hits the zero support at least once.
        std::size_t hits = 0;
        do {
            hits = 0;
            for (std::size_t i = 0; i < pattern.size(); ++i) {
                pattern[i] = static_cast<int>(rng.uniform_below(3)) - 1;
                if (pattern[i] != 0 && x[i] == 0.0) ++hits;
            }
        } while (hits == 0);
        const auto spec = make_perturbation_spec(x, pattern, epsilon);
        if (perturbation_test(x, spec).increased) ++increased;
    }
    return static_cast<double>(increased) / static_cast<double>(trials);
}

}  // namespace cwt
