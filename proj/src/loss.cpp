#include "mitd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

void check_lengths(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size()) {
        throw InputError("bce: " + std::to_string(p.size()) + " probabilities vs " + std::to_string(y.size()) + " labels");
    }
    if (p.empty()) {
        throw InputError("bce: empty sequence");
    }
}

} // namespace

double bce_loss(std::span<const double> p, std::span<const int> y) {
    check_lengths(p, y);
    double sum = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
        const double q = std::clamp(p[t], kBceClamp, 1.0 - kBceClamp);
        sum += y[t] != 0 ? std::log(q) : std::log1p(-q);
    }
    return -sum / static_cast<double>(p.size());
}

std::vector<double> bce_grad(std::span<const double> p, std::span<const int> y) {
    check_lengths(p, y);
    const double inv_t = 1.0 / static_cast<double>(p.size());
    std::vector<double> g(p.size(), 0.0);
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t] < kBceClamp || p[t] > 1.0 - kBceClamp) {
            continue;
        }
        g[t] = (y[t] != 0 ? -1.0 / p[t] : 1.0 / (1.0 - p[t])) * inv_t;
    }
    return g;
}

double gate_regularizer(std::span<const double> g) {
    if (g.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double v : g) {
        sum += v * (1.0 - v);
    }
    return sum / static_cast<double>(g.size());
}

std::vector<double> gate_regularizer_grad(std::span<const double> g) {
    std::vector<double> out(g.size());
    const double inv = g.empty() ? 0.0 : 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        out[i] = (1.0 - 2.0 * g[i]) * inv;
    }
    return out;
}

double total_loss(std::span<const double> p, std::span<const int> y, std::span<const double> g, double lambda_gate) {
    return bce_loss(p, y) + lambda_gate * gate_regularizer(g);
}

} // namespace mitd
