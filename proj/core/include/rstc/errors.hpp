#pragma once

#include <stdexcept>
#include <string>

namespace rstc {

// Invalid or inconsistent user-supplied configuration. The CLI maps this to
// exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine failed to meet its accuracy or convergence contract
// (e.g. a Riccati iteration that does not converge). The CLI maps this to
// exit code 3.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rstc
