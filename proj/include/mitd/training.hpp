#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/featurize.hpp"
#include "mitd/model.hpp"

namespace mitd {

/// Adam with bias correction; state is keyed by parameter position.
class Adam {
public:
    Adam(ParameterList params, double lr, double beta1, double beta2, double eps);
    void step();
    std::size_t steps() const { return t_; }

private:
    ParameterList params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct SessionSplit {
    std::vector<FeaturizedSession> train;
    std::vector<FeaturizedSession> test;
};

/// Seeded session-level shuffle, first round(ratio * n) sessions go to train.
/// Both halves keep the input's relative order.
SessionSplit split_sessions(const std::vector<FeaturizedSession>& sessions, double ratio, std::uint64_t seed);

struct EpochStats {
    std::size_t epoch = 0;
    double bce = 0.0;
    double gate_reg = 0.0;
    double total = 0.0;
    /// Largest |total - (bce + lambda * gate_reg)| over this epoch's batches.
    double composition_gap = 0.0;
};

/// Instrumentation hook: called with a stage name ("standardize", "smote", "gradient")
/// for each session that enters that stage.
using TrainObserver = std::function<void(std::string_view stage, const FeaturizedSession&)>;

struct TrainResult {
    MambaItd model;
    std::vector<EpochStats> history;
    SessionSplit split;
    std::size_t synthesized = 0;
    bool smote_duplicated = false;
    bool smote_skipped = false;
};

/// Splits, fits the standardizer and SMOTE on the training half, then runs Adam.
/// Throws ConfigError for fewer than 10 sessions or a single-class training half.
TrainResult train_model(const std::vector<FeaturizedSession>& sessions, const Config& cfg,
                        const TrainObserver& observer = {});

/// Batches of `batch_size` over `order`; a trailing batch of one joins the previous batch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

} // namespace mitd
