#include "rstc/history.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rstc {

namespace {

// Convert a nominally grid-aligned time to its step count, rejecting values
// that are off the grid by more than 1e-9 s (loose enough for accumulated
// floating-point drift, tight enough to catch genuine misuse).
int to_steps(double value, double dt, const char* what) {
    const double ratio = value / dt;
    const long long k = std::llround(ratio);
    if (std::abs(value - static_cast<double>(k) * dt) > 1e-9) {
        throw std::invalid_argument(std::string(what) + " " + std::to_string(value) +
                                    " is not an integer multiple of dt=" + std::to_string(dt));
    }
    return static_cast<int>(k);
}

}  // namespace

DelayedSignal::DelayedSignal(double dt, double span) : dt_(dt), span_(span) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("DelayedSignal: dt must be positive");
    }
    if (span < 0.0) {
        throw std::invalid_argument("DelayedSignal: span must be non-negative");
    }
    const int k = to_steps(span, dt, "DelayedSignal span");
    buf_.assign(static_cast<std::size_t>(k) + 1, 0.0);
    head_ = 0;
}

void DelayedSignal::push(double value) {
    head_ = (head_ + 1) % static_cast<int>(buf_.size());
    buf_[static_cast<std::size_t>(head_)] = value;
}

double DelayedSignal::at_steps_back(int k) const {
    const int npts = static_cast<int>(buf_.size());
    if (k < 0 || k >= npts) {
        throw std::out_of_range("DelayedSignal: lookup " + std::to_string(k) +
                                " steps back outside the stored span of " + std::to_string(npts) +
                                " samples");
    }
    return buf_[static_cast<std::size_t>((head_ - k + npts) % npts)];
}

double DelayedSignal::at_offset(double offset) const {
    if (offset > 1e-9 || offset < -span_ - 1e-9) {
        throw std::out_of_range("DelayedSignal: offset " + std::to_string(offset) +
                                " outside [-" + std::to_string(span_) + ", 0]");
    }
    return at_steps_back(to_steps(-offset, dt_, "DelayedSignal offset"));
}

Eigen::VectorXd weighted_integral(const DelayedSignal& sig, double from, double to,
                                  const std::function<Eigen::VectorXd(double)>& weight) {
    if (!(from < to)) {
        throw std::invalid_argument("weighted_integral: need from < to");
    }
    if (from < -sig.span() - 1e-9 || to > 1e-9) {
        throw std::invalid_argument("weighted_integral: window outside the signal span");
    }
    const double dt = sig.dt();
    const int m = to_steps(to - from, dt, "weighted_integral window");
    if (m < 1) {
        throw std::invalid_argument("weighted_integral: window shorter than one step");
    }
    Eigen::VectorXd acc;
    for (int j = 0; j <= m; ++j) {
        const double theta = from + static_cast<double>(j) * dt;
        const double w = (j == 0 || j == m) ? 0.5 * dt : dt;
        const Eigen::VectorXd node = weight(theta) * sig.at_offset(theta);
        if (acc.size() == 0) {
            acc = Eigen::VectorXd::Zero(node.size());
        }
        acc += w * node;
    }
    return acc;
}

}  // namespace rstc
