#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/nn.hpp"

namespace mitd {

/// Mean over the token rows of E_x ([N x d] or [1 x N x d]) -> [d].
Tensor session_pool(const Tensor& tokens);
/// Spreads a [d] cotangent evenly back over n_tokens rows -> [n_tokens x d].
Tensor session_pool_backward(const Tensor& grad_session, std::size_t n_tokens);

/// G = sigmoid(W_g e + b_g) for a per-session vector e of width d_model.
class Gate final : public Module {
public:
    Gate(std::string name, std::size_t d_model, Rng& rng);

    /// Input [d] (or [1 x d]); output [d], every entry strictly inside (0, 1).
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return proj_.parameters(); }

    Parameter& weight() { return proj_.weight(); }
    Parameter& bias() { return proj_.bias(); }

private:
    Linear proj_;
    Tensor out_;
};

/// mix[t, j] = g_j h_b[t, j] + (1 - g_j) h_c[t, j]; gate broadcast over time.
Tensor gated_mix(const Tensor& h_b, const Tensor& h_c, const Tensor& g);

/// LayerNorm(mix + h_b + h_c) (residual = both) or LayerNorm(mix) (mix_only).
class GatedFusion {
public:
    struct Grads {
        Tensor h_b;
        Tensor h_c;
        Tensor g;
    };

    GatedFusion(std::string name, std::size_t d_model, FusionResidual residual);

    Tensor forward(const Tensor& h_b, const Tensor& h_c, const Tensor& g);
    Grads backward(const Tensor& grad_output);
    ParameterList parameters() { return norm_.parameters(); }

private:
    FusionResidual residual_;
    LayerNorm norm_;
    Tensor h_b_;
    Tensor h_c_;
    Tensor g_;
};

/// [T x d] | broadcast [d] -> [T x 2d].
Tensor concat_final(const Tensor& fused, const Tensor& session);
/// Splits a [T x 2d] cotangent into the fused part [T x d] and the summed session part [d].
std::pair<Tensor, Tensor> concat_final_backward(const Tensor& grad_output, std::size_t d_model);

/// Per-timestep MLP: (Linear, ReLU) x (layers - 1), Linear -> 1, sigmoid.
/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] so they stay strictly inside (0, 1)
/// in double precision.
class MlpHead final : public Module {
public:
    static constexpr double kProbFloor = 1e-7;

    MlpHead(std::string name, std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng);

    /// [T x in] -> [T x 1] probabilities.
    Tensor forward(const Tensor& input) override;
    /// Takes dL/dP [T x 1]; zero gradient where the clamp is active.
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    std::size_t depth() const { return layers_.size(); }
    Linear& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Linear>> layers_;
    std::vector<Tensor> pre_activations_;
    Tensor logits_;
};

} // namespace mitd
