#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mitd/config.hpp"

namespace mitd {

struct ScalingRow {
    std::size_t length = 0;
    double median_ms = 0.0;
};

/// Median wall time of one encoder forward pass per sequence length.
std::vector<ScalingRow> bench_encoder(const ModelConfig& cfg, const std::vector<std::size_t>& lengths, std::size_t runs,
                                      std::uint64_t seed);

void write_scaling_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows);

} // namespace mitd
