#pragma once

#include <array>
#include <cstddef>
#include <random>

#include "mitd/detection.hpp"

namespace mitd::testing {

/// Exhaustive reference: evaluate every split t with both classes non-empty and keep the
/// first maximizer of w0 w1 (mu0 - mu1)^2.
inline std::size_t otsu_reference(const std::array<double, kOtsuBins>& mass) {
    std::size_t best = kOtsuBins;
    double best_var = -1.0;
    for (std::size_t t = 0; t + 1 < kOtsuBins; ++t) {
        double w0 = 0.0, m0 = 0.0, w1 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < kOtsuBins; ++i) {
            if (i <= t) {
                w0 += mass[i];
                m0 += static_cast<double>(i) * mass[i];
            } else {
                w1 += mass[i];
                m1 += static_cast<double>(i) * mass[i];
            }
        }
        if (w0 <= 0.0 || w1 <= 0.0) {
            continue;
        }
        const double gap = m0 / w0 - m1 / w1;
        const double v = w0 * w1 * gap * gap;
        if (v > best_var) {
            best_var = v;
            best = t;
        }
    }
    return best;
}

/// Random 100-bin mass vector. Even cases are dense; odd cases keep only a few occupied
/// bins, which produces plateaus of exactly tied splits.
inline std::array<double, kOtsuBins> random_histogram(std::mt19937_64& rng, std::size_t case_index) {
    std::array<std::size_t, kOtsuBins> counts{};
    std::size_t total = 0;
    if (case_index % 2 == 0) {
        std::uniform_int_distribution<std::size_t> c(0, 50);
        for (auto& v : counts) {
            v = c(rng);
            total += v;
        }
    } else {
        std::uniform_int_distribution<std::size_t> bin(0, kOtsuBins - 1), c(1, 20), k(1, 4);
        const auto occupied = k(rng);
        for (std::size_t j = 0; j < occupied; ++j) {
            const auto n = c(rng);
            counts[bin(rng)] += n;
            total += n;
        }
    }
    if (total == 0) {
        counts[0] = 1;
        total = 1;
    }
    std::array<double, kOtsuBins> mass{};
    for (std::size_t i = 0; i < kOtsuBins; ++i) {
        mass[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    }
    return mass;
}

} // namespace mitd::testing
