#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mitd {

enum class StatTokens { PerFeature, Pooled };
enum class FusionResidual { Both, MixOnly };
enum class SmoteMode { Stats, Duplicate, Off };
enum class ThresholdScope { User, UserDay };
/// Which edge of the Otsu bin becomes the probability threshold: `upper` separates exactly
/// the bins above the Otsu split; `lower` maps the split bin's own lower edge.
enum class ThresholdEdge { Upper, Lower };

/// Preprocessing knobs shared by ingest and featurize.
struct PreprocessConfig {
    double alpha = 0.2;             // EWMA smoothing factor
    int work_start_hour = 8;        // working hours are [start, end) local time
    int work_end_hour = 18;
    std::size_t t_max = 512;        // max events per session chunk
    std::int64_t utc_offset_seconds = 0;
    std::vector<std::string> internal_domains{"dtaa.com"};
};

struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_state = 16;
    std::size_t layers = 2;
    std::size_t expand = 2;         // d_inner = expand * d_model
    std::size_t dt_rank = 0;        // 0 selects ceil(d_model / 16)
    std::size_t hidden = 128;
    std::size_t head_layers = 3;
    StatTokens stat_tokens = StatTokens::PerFeature;
    FusionResidual residual = FusionResidual::Both;

    std::size_t d_inner() const { return expand * d_model; }
    std::size_t resolved_dt_rank() const { return dt_rank != 0 ? dt_rank : (d_model + 15) / 16; }
};

struct TrainConfig {
    double lambda_gate = 0.01;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 7;
    double split = 0.8;
    std::size_t smote_k = 5;
    SmoteMode smote = SmoteMode::Stats;
};

struct DetectConfig {
    ThresholdScope scope = ThresholdScope::User;
    ThresholdEdge edge = ThresholdEdge::Upper;
};

struct Config {
    PreprocessConfig preprocess;
    ModelConfig model;
    TrainConfig train;
    DetectConfig detect;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

void to_json(nlohmann::json& j, const Config& c);
void from_json(const nlohmann::json& j, Config& c);

/// Reads a JSON config; absent keys keep their defaults.
Config load_config(const std::filesystem::path& path);

/// Parses "+HH:MM" / "-HH:MM" / "UTC" into an offset in seconds.
std::int64_t parse_utc_offset(const std::string& text);
std::string format_utc_offset(std::int64_t seconds);

} // namespace mitd
