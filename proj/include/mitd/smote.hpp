#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/featurize.hpp"

namespace mitd {

struct SmoteResult {
    std::vector<FeaturizedSession> sessions;   // originals first, then synthetic sessions
    std::size_t synthesized = 0;
    bool duplicated = false;   // fell back to plain duplication
    bool skipped = false;      // no minority sessions to draw from
};

/// x_s + u (x_n - x_s).
std::vector<double> smote_interpolate(std::span<const double> from, std::span<const double> to, double u);

/// Indices of the k nearest rows to `rows[query]` (Euclidean, excluding itself; ties by index).
std::vector<std::size_t> nearest_neighbors(const std::vector<std::vector<double>>& rows, std::size_t query, std::size_t k);

/// Oversamples sessions containing any anomalous step until they match the normal count.
/// Neighbors are found on standardized statistical vectors; synthetic sessions interpolate
/// the statistical vector and copy s_b, s_c and labels from their seed session.
/// Falls back to duplication when fewer than k + 1 minority sessions exist or mode is Duplicate.
SmoteResult smote_oversample(const std::vector<FeaturizedSession>& train, std::size_t k, std::uint64_t seed,
                             const Standardizer& standardizer, SmoteMode mode = SmoteMode::Stats);

} // namespace mitd
