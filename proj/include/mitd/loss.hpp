#pragma once

#include <span>

#include "mitd/tensor.hpp"

namespace mitd {

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy over T steps; probabilities are clamped to
/// [1e-7, 1 - 1e-7] before taking logs. Throws InputError on length mismatch.
double bce_loss(std::span<const double> p, std::span<const int> y);
/// dL/dp for bce_loss (zero where the clamp is active).
std::vector<double> bce_grad(std::span<const double> p, std::span<const int> y);

/// Mean of g (1 - g) over all gate coordinates.
double gate_regularizer(std::span<const double> g);
std::vector<double> gate_regularizer_grad(std::span<const double> g);

/// bce + lambda * gate term.
double total_loss(std::span<const double> p, std::span<const int> y, std::span<const double> g, double lambda_gate);

} // namespace mitd
