#pragma once

#include <string>

#include "mitd/nn.hpp"

namespace mitd {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst;          // coordinate with the largest error, e.g. "ssm.A_log[5]" or "input[3]"
    std::size_t coordinates = 0;
    bool valid = true;          // false if two forward passes disagreed
    bool passed = false;
};

/// Gradients smaller than this are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares analytic gradients of sum(forward(input)) against central differences for every
/// parameter coordinate and (when backward returns one) every input coordinate.
/// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
GradCheckReport grad_check(Module& module, const Tensor& input, double epsilon, double tol);

} // namespace mitd
