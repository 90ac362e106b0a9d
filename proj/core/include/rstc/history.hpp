#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

// Fixed-step delay lines. Both the predictor and the measurement composer
// integrate matrix-weighted history terms over delay windows, so the buffer
// enforces a strict grid discipline: the span must be an exact multiple of
// the step, lookups must land on grid points, and quadrature endpoints are
// inclusive (a 0.4 s window at dt = 0.01 holds 41 samples).

namespace rstc {

class DelayedSignal {
public:
    // A buffer covering offsets [-span, 0] on a dt grid, zero-initialised
    // over the whole span (matching the quiescent pre-start assumption).
    // Throws std::invalid_argument when span is not an integer multiple of
    // dt or either is non-positive (span zero is allowed: one slot).
    DelayedSignal(double dt, double span);

    // Append the newest sample; called exactly once per control step. The
    // oldest sample falls off the far end.
    void push(double value);

    // Sample at a grid-aligned offset in [-span, 0]; offset 0 is the newest
    // pushed sample. Throws std::invalid_argument for off-grid offsets and
    // std::out_of_range outside the span.
    double at_offset(double offset) const;

    // Sample k steps back from the newest (k = 0 is the newest).
    double at_steps_back(int k) const;

    double dt() const { return dt_; }
    double span() const { return span_; }
    int points() const { return static_cast<int>(buf_.size()); }

private:
    double dt_ = 0.0;
    double span_ = 0.0;
    std::vector<double> buf_;
    int head_ = 0;  // ring index of the newest sample
};

// Composite-trapezoid integral of weight(theta) * signal(theta) over
// [from, to], both grid-aligned offsets within the signal's span. Exact for
// weights and signals that are affine in theta; O(dt^2) otherwise. The
// weight callback returns the (vector) integrand factor at each node.
Eigen::VectorXd weighted_integral(const DelayedSignal& sig, double from, double to,
                                  const std::function<Eigen::VectorXd(double)>& weight);

}  // namespace rstc
