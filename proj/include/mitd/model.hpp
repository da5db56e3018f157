#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/encoder.hpp"
#include "mitd/featurize.hpp"
#include "mitd/fusion.hpp"
#include "mitd/model_io.hpp"

namespace mitd {

struct BatchLoss {
    double bce = 0.0;
    double gate_reg = 0.0;
    double total = 0.0;
};

struct SessionScores {
    std::vector<double> probs;
    std::vector<double> gate;
};

/// Full network: embeddings -> two Mamba encoders -> gated fusion -> MLP head.
class MambaItd {
public:
    MambaItd(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParameterList parameters();

    void set_standardizer(Standardizer s) { standardizer_ = std::move(s); }
    const Standardizer& standardizer() const { return standardizer_; }

    /// Training-mode forward over a batch (batch-normalization statistics from the batch).
    /// With `backward`, also accumulates d(mean batch loss)/dtheta into the parameter grads.
    BatchLoss run_batch(std::span<const FeaturizedSession* const> batch, double lambda_gate, bool backward);

    /// Eval-mode probabilities (running batch-normalization statistics).
    std::vector<SessionScores> predict(std::span<const FeaturizedSession> sessions);

    ModelFile to_file(const std::string& metadata);
    /// Rebuilds a model from a file whose metadata carries the model config.
    static MambaItd from_file(const ModelFile& file, const ModelConfig& cfg);

    BehaviorEmbedding& behavior_embedding() { return embed_b_; }
    IntervalEmbedding& interval_embedding() { return embed_c_; }
    StatEmbedding& stat_embedding() { return stat_; }
    MambaEncoder& behavior_encoder() { return enc_b_; }
    MambaEncoder& interval_encoder() { return enc_c_; }
    Gate& gate() { return gate_; }
    GatedFusion& fusion() { return fusion_; }
    MlpHead& head() { return head_; }

private:
    Tensor standardized_batch(std::span<const FeaturizedSession* const> batch) const;
    struct Forward {
        Tensor session;
        Tensor gate;
        Tensor probs;
    };
    Forward forward_session(const FeaturizedSession& s, const Tensor& tokens);

    ModelConfig cfg_;
    Rng rng_;
    Standardizer standardizer_;
    BehaviorEmbedding embed_b_;
    IntervalEmbedding embed_c_;
    StatEmbedding stat_;
    MambaEncoder enc_b_;
    MambaEncoder enc_c_;
    Gate gate_;
    GatedFusion fusion_;
    MlpHead head_;
};

} // namespace mitd
