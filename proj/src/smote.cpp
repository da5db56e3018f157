#include "mitd/smote.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mitd/nn.hpp"

namespace mitd {

std::vector<double> smote_interpolate(std::span<const double> from, std::span<const double> to, double u) {
    std::vector<double> out(from.size());
    for (std::size_t j = 0; j < from.size(); ++j) {
        out[j] = from[j] + u * (to[j] - from[j]);
    }
    return out;
}

std::vector<std::size_t> nearest_neighbors(const std::vector<std::vector<double>>& rows, std::size_t query, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == query) {
            continue;
        }
        double d2 = 0.0;
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            const double diff = rows[i][j] - rows[query][j];
            d2 += diff * diff;
        }
        dist.emplace_back(d2, i);
    }
    const auto take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back(dist[i].second);
    }
    return out;
}

SmoteResult smote_oversample(const std::vector<FeaturizedSession>& train, std::size_t k, std::uint64_t seed,
                             const Standardizer& standardizer, SmoteMode mode) {
    SmoteResult result;
    result.sessions = train;
    if (mode == SmoteMode::Off) {
        return result;
    }
    std::vector<std::size_t> minority;
    std::size_t majority = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].anomalous()) {
            minority.push_back(i);
        } else {
            ++majority;
        }
    }
    if (minority.empty()) {
        result.skipped = true;
        return result;
    }
    if (minority.size() >= majority) {
        return result;
    }
    const std::size_t need = majority - minority.size();
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
    result.sessions.reserve(train.size() + need);

    if (mode == SmoteMode::Duplicate || minority.size() < k + 1) {
        result.duplicated = true;
        for (std::size_t n = 0; n < need; ++n) {
            result.sessions.push_back(train[minority[pick(rng)]]);
        }
        result.synthesized = need;
        return result;
    }

    std::vector<std::vector<double>> z;
    z.reserve(minority.size());
    for (auto idx : minority) {
        z.push_back(standardizer.transform(train[idx].x));
    }
    std::vector<std::vector<std::size_t>> neighbors(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i) {
        neighbors[i] = nearest_neighbors(z, i, k);
    }
    std::uniform_int_distribution<std::size_t> pick_neighbor(0, k - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t n = 0; n < need; ++n) {
        const std::size_t s = pick(rng);
        const std::size_t nb = neighbors[s][pick_neighbor(rng)];
        const double u = unit(rng);
        FeaturizedSession synth = train[minority[s]];
        // Standardization is affine, so interpolating raw vectors equals interpolating z-scores.
        synth.x = smote_interpolate(train[minority[s]].x, train[minority[nb]].x, u);
        result.sessions.push_back(std::move(synth));
    }
    result.synthesized = need;
    return result;
}

} // namespace mitd
