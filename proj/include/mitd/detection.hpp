#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mitd/config.hpp"

namespace mitd {

inline constexpr std::size_t kOtsuBins = 100;
inline constexpr double kFallbackThreshold = 0.5;

struct Histogram {
    std::array<std::size_t, kOtsuBins> counts{};
    std::array<double, kOtsuBins> mass{};   // counts / T
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false;   // max == min; bin positions are meaningless
};

/// Bin index floor((p - min) / (max - min) * 100), with the maximum folded into the last bin.
Histogram build_histogram(std::span<const double> scores);

/// Bin t maximizing w0 w1 (mu0 - mu1)^2 over masses for {<= t} vs {> t}; smallest t on ties.
/// Returns kOtsuBins when no split leaves both classes non-empty.
std::size_t otsu_bin(std::span<const double, kOtsuBins> mass);
inline std::size_t otsu_bin(const Histogram& h) { return otsu_bin(std::span<const double, kOtsuBins>(h.mass)); }

/// Maps a bin index back to probability space.
double map_threshold(std::size_t bin, double p_min, double p_max);

struct Threshold {
    double value = kFallbackThreshold;
    std::size_t bin = kOtsuBins;   // Otsu split bin; kOtsuBins when falling back
    bool fallback = false;         // constant scores: no informative split
};

/// Otsu split of one group's scores mapped back to probability space. With the upper edge
/// the threshold is map_threshold(t + 1), the boundary between the bins Otsu assigned to
/// the two classes; with the lower edge it is map_threshold(t).
Threshold otsu_threshold(std::span<const double> scores, ThresholdEdge edge = ThresholdEdge::Upper);

/// One scored step.
struct ScoredStep {
    std::string user_id;
    std::int64_t day = 0;
    std::size_t step = 0;      // position within the user's day
    double prob = 0.0;
    int truth = 0;
    int decision = 0;
};

struct GroupThreshold {
    std::string key;
    Threshold threshold;
    std::size_t steps = 0;
};

/// Thresholds each group (user or user/day) and sets `decision = prob >= tau`.
std::vector<GroupThreshold> classify(std::vector<ScoredStep>& steps, ThresholdScope scope,
                                     ThresholdEdge edge = ThresholdEdge::Upper);

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0, fpr = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
    bool fpr_undefined = false;
};

Metrics compute_metrics(std::span<const int> truth, std::span<const int> decision);
Metrics compute_metrics(const std::vector<ScoredStep>& steps);

void write_decisions_csv(const std::filesystem::path& path, const std::vector<ScoredStep>& steps);
std::vector<ScoredStep> read_decisions_csv(const std::filesystem::path& path);

/// report.json: metrics, confusion counts, undefined flags and per-group thresholds.
void write_report_json(const std::filesystem::path& path, const Metrics& m, const std::vector<GroupThreshold>& groups,
                       ThresholdScope scope, ThresholdEdge edge);

std::string format_double(double v);

} // namespace mitd
