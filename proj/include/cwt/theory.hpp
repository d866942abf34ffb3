#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cwt/loss.hpp"

namespace cwt {

// One accepted descent step.
struct DescentStep {
    std::size_t step_index = 0;
    double loss_value = 0.0;
    double ternary_deviation = 0.0;
};

struct DescentTrace {
    std::vector<DescentStep> iterates;  // includes the initial state at index 0
    WeightVector final_x;
    CriticalPointReport final_report;
    bool converged = false;  // hit the ternary/sqrt(n) convergence thresholds
    bool failed = false;     // stalled: 100 consecutive rejected proposals
    std::size_t steps_taken = 0;
};

struct DescentOptions {
    double step_size = 1e-2;
    std::size_t max_steps = 200000;
    // Elements whose magnitude falls below zero_tol are clamped to exactly 0
    // and frozen. Plain descent oscillates across the sign kink, so this must
    // be well above machine precision; 1e-4 works for unit-scale inputs.
    double zero_tol = 1e-4;
    // Stop once ternary_deviation/c and |L - sqrt(n)| both fall below this.
    double convergence_tol = 1e-4;
};

// Gradient descent on the compressibility loss alone. Backtracking: a step
// that would increase the loss is rejected and the step size halved; the
// step size resets to its initial value after each freezing event. Recorded
// loss values are therefore non-increasing.
DescentTrace minimize_loss(std::span<const double> x0, const DescentOptions& opts = {});

// Writes iterates as CSV lines "step,loss,ternary_deviation" with a header.
void write_trace(std::ostream& os, const DescentTrace& trace);

// A signed ternary direction scaled by epsilon, for probing a critical point.
struct PerturbationSpec {
    double epsilon = 0.0;
    std::vector<int> pattern;           // entries in {-1, 0, +1}
    std::size_t zero_support_hits = 0;  // non-zero pattern entries where x_i == 0
};

// Validates the spec against x: pattern length and content, epsilon > 0 and
// epsilon <= c/1000, at least one non-zero entry. Throws std::invalid_argument.
PerturbationSpec make_perturbation_spec(std::span<const double> x,
                                        std::vector<int> pattern,
                                        double epsilon);

struct PerturbationResult {
    double loss_before = 0.0;
    double loss_after = 0.0;
    bool increased = false;
};

// Evaluates L(x + eps) against L(x). Requires x exactly ternary (up to FP
// roundoff in c); throws std::invalid_argument otherwise.
PerturbationResult perturbation_test(std::span<const double> x,
                                     const PerturbationSpec& spec);

// Samples `trials` random {-1,0,+1} patterns, rejection-sampled until at
// least one entry lands on the zero support of x, and returns the fraction
// of perturbations that strictly increased the loss. Throws
// std::invalid_argument if x has no zero element or is not exactly ternary.
double sweep_perturbations(std::span<const double> x, double epsilon,
                           std::size_t trials, std::uint64_t seed);

// True when every element of x lies in {-c, 0, c} up to relative roundoff.
bool is_exactly_ternary(std::span<const double> x);

}  // namespace cwt
