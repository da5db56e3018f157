#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/nn.hpp"

namespace mitd {

/// Trainable lookup table of shape [193 x d_model]; row 0 is reserved for padding.
class BehaviorEmbedding final : public Module {
public:
    static constexpr std::size_t kRows = 193;

    BehaviorEmbedding(std::string name, std::size_t d_model, Rng& rng);

    Tensor forward_ids(std::span<const int> ids);
    /// Input is a [T] tensor of integral IDs; the returned input gradient is empty.
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return {&table_}; }

    Parameter& table() { return table_; }

private:
    Parameter table_;
    std::vector<int> ids_;
};

/// E_c = log1p(c) * w + b per timestep; input is [T] or [T x 1] of non-negative intervals.
class IntervalEmbedding final : public Module {
public:
    IntervalEmbedding(std::string name, std::size_t d_model, Rng& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return {&weight_, &bias_}; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

/// E_x = BN(FC(X)) over a batch of standardized statistical vectors [B x 22].
/// The FC map has no bias: batch normalization subtracts it exactly.
///
/// per_feature: each scalar feature is lifted to d_model by one shared 1 -> d_model map,
/// giving [B x 22 x d_model]; batch normalization keeps statistics and scale/shift per
/// (feature, channel) unit.
/// pooled: one 22 -> d_model affine map, giving [B x 1 x d_model], normalized per channel.
///
/// Training mode normalizes with batch statistics and updates running estimates
/// (momentum 0.1, unbiased variance); eval mode uses the running estimates.
class StatEmbedding final : public Module {
public:
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

    StatEmbedding(std::string name, std::size_t n_features, std::size_t d_model, StatTokens mode, Rng& rng);

    void set_training(bool training) { training_ = training; }
    bool training() const { return training_; }
    bool has_running_stats() const { return has_stats_; }
    void mark_running_stats_ready() { has_stats_ = true; }

    std::size_t tokens() const { return mode_ == StatTokens::PerFeature ? n_features_ : 1; }

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    std::string name_;
    std::size_t n_features_;
    std::size_t d_model_;
    StatTokens mode_;
    bool training_ = true;
    bool has_stats_ = false;

    Parameter fc_weight_;   // [d] (per_feature) or [22 x d] (pooled)
    Parameter gamma_;       // [units]
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;

    // caches
    Tensor input_;
    Tensor normalized_;     // [B x units]
    AlignedVector inv_std_;
    bool cached_training_ = true;
};

/// Selective diagonal state-space scan over [T x d_inner].
///
///   delta_t = softplus(up(down(u_t)) + b_dt)     per channel, > 0
///   B_t = u_t W_B, C_t = u_t W_C                  shared across channels
///   h_t = exp(delta_t * A) . h_{t-1} + delta_t * B_t * u_t,  h_0 = 0
///   y_t = C_t . h_t + D . u_t
///
/// A = -exp(A_log) is input independent and strictly negative.
class SelectiveScan final : public Module {
public:
    SelectiveScan(std::string name, std::size_t d_inner, std::size_t n_state, std::size_t dt_rank, Rng& rng);

    /// When false, forward keeps only the running state and backward is unavailable.
    void set_record(bool record) { record_ = record; }

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    Parameter& a_log() { return a_log_; }
    Parameter& skip() { return d_; }
    Linear& dt_up() { return dt_up_; }

private:
    std::size_t d_inner_;
    std::size_t n_state_;
    bool record_ = true;

    Linear dt_down_;
    Linear dt_up_;
    Linear b_proj_;
    Linear c_proj_;
    Parameter a_log_;
    Parameter d_;

    // caches
    Tensor u_;
    Tensor dt_raw_;
    Tensor delta_;
    Tensor b_;
    Tensor c_;
    AlignedVector states_;   // [T x d_inner x n_state]
    AlignedVector decay_;    // exp(delta * A), same layout
};

/// One Mamba-style block: expand to d_inner, selective scan on one branch, gate it with
/// SiLU of the parallel branch, project back to d_model. No depthwise convolution.
class SsmLayer final : public Module {
public:
    SsmLayer(std::string name, const ModelConfig& cfg, Rng& rng);

    void set_record(bool record) { scan_.set_record(record); }

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    SelectiveScan& scan() { return scan_; }
    Linear& in_proj() { return in_proj_; }
    Linear& out_proj() { return out_proj_; }

private:
    std::size_t d_inner_;
    Linear in_proj_;
    SelectiveScan scan_;
    Linear out_proj_;

    Tensor scanned_;
    Tensor z_;
};

/// Residual stack: x <- x + SsmLayer(LayerNorm(x)) per layer. Causal in time.
class MambaEncoder final : public Module {
public:
    MambaEncoder(std::string name, const ModelConfig& cfg, Rng& rng);

    void set_record(bool record);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    std::size_t depth() const { return layers_.size(); }
    SsmLayer& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<LayerNorm>> norms_;
    std::vector<std::unique_ptr<SsmLayer>> layers_;
};

} // namespace mitd
