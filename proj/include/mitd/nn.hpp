#pragma once

#include <random>
#include <string>

#include "mitd/tensor.hpp"

namespace mitd {

using Rng = std::mt19937_64;

/// Differentiable map with hand-derived pullback. `forward` caches what `backward` needs;
/// `backward` accumulates into every Parameter::grad and returns dL/dinput (an empty tensor
/// when the input is not differentiable, e.g. integer IDs).
class Module {
public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_output) = 0;
    virtual ParameterList parameters() = 0;
};

class Identity final : public Module {
public:
    Tensor forward(const Tensor& input) override { return input; }
    Tensor backward(const Tensor& grad_output) override { return grad_output; }
    ParameterList parameters() override { return {}; }
};

/// y = x W + b over the rows of x. W is [in x out].
class Linear final : public Module {
public:
    Linear(std::string name, std::size_t in, std::size_t out, bool bias, Rng& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override;

    std::size_t in_features() const { return weight_.value.dim(0); }
    std::size_t out_features() const { return weight_.value.dim(1); }
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    bool has_bias() const { return has_bias_; }

private:
    Parameter weight_;
    Parameter bias_;
    bool has_bias_;
    Tensor input_;
};

/// Per-row normalization over the last axis with learned scale and shift.
class LayerNorm final : public Module {
public:
    static constexpr double kEps = 1e-5;

    LayerNorm(std::string name, std::size_t dim);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return {&gamma_, &beta_}; }

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }

private:
    Parameter gamma_;
    Parameter beta_;
    Tensor normalized_;
    std::vector<double> inv_std_;
};

/// Fills with U(-bound, bound).
void init_uniform(Tensor& t, double bound, Rng& rng);
void init_normal(Tensor& t, double stddev, Rng& rng);

} // namespace mitd
