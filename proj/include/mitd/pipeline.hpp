#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/detection.hpp"
#include "mitd/featurize.hpp"
#include "mitd/model.hpp"
#include "mitd/training.hpp"

namespace mitd {

struct IngestSummary {
    std::size_t rows = 0;
    std::vector<std::string> errors;   // "<file>:<line>: <message>"
    std::size_t labeled = 0;
    FeaturizeReport featurize;
};

/// Reads the five channel CSVs (missing files are skipped), applies answers.txt when present,
/// sessionizes and featurizes.
std::vector<FeaturizedSession> featurize_directory(const std::filesystem::path& dir, const PreprocessConfig& cfg,
                                                   IngestSummary* summary = nullptr);

/// Metadata stored in model files: the full config as JSON.
std::string model_metadata(const Config& cfg);
Config config_from_metadata(const std::string& metadata);

void save_model(MambaItd& model, const Config& cfg, const std::filesystem::path& path);
struct LoadedModel {
    Config config;
    MambaItd model;
};
LoadedModel load_model(const std::filesystem::path& path);

/// Trains and writes model.bin, history.csv and test.jsonl (the held-out split) into out_dir.
TrainResult train_to_directory(const std::vector<FeaturizedSession>& sessions, const Config& cfg,
                               const std::filesystem::path& out_dir);

struct DetectionResult {
    std::vector<ScoredStep> steps;
    std::vector<GroupThreshold> thresholds;
    Metrics metrics;
};

DetectionResult detect(MambaItd& model, const std::vector<FeaturizedSession>& sessions, const DetectConfig& cfg);

/// Writes report.json and decisions.csv into out_dir.
void write_detection(const DetectionResult& result, const DetectConfig& cfg, const std::filesystem::path& out_dir);

} // namespace mitd
