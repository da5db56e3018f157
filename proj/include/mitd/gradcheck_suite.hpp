#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mitd/grad_check.hpp"
#include "mitd/model.hpp"

namespace mitd {

/// Multiplies a wrapped module's output by fixed random weights so that the summed output
/// exercises every output coordinate differently (a plain sum is blind to normalizations).
class WeightedProbe final : public Module {
public:
    WeightedProbe(Module& inner, std::uint64_t seed) : inner_(inner), seed_(seed) {}

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return inner_.parameters(); }

private:
    Module& inner_;
    std::uint64_t seed_;
    Tensor weights_;
};

/// Mean training loss of a full model over a fixed batch, exposed as a [1] output.
/// The input tensor is ignored; only parameter gradients are checked.
class ModelLossProbe final : public Module {
public:
    ModelLossProbe(MambaItd& model, std::vector<FeaturizedSession> batch, double lambda_gate);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    ParameterList parameters() override { return model_.parameters(); }

    BatchLoss last() const { return last_; }

private:
    MambaItd& model_;
    std::vector<FeaturizedSession> batch_;
    double lambda_;
    BatchLoss last_;
};

struct GradCheckLine {
    std::string name;
    GradCheckReport report;
};

/// Small config used by the suite: d_model 4, n_state 3, two layers, hidden 8.
ModelConfig gradcheck_config();

/// Checks every parameterized layer and the total loss at T <= 8.
std::vector<GradCheckLine> run_gradcheck_suite(std::uint64_t seed, double epsilon = 1e-5, double tol = 1e-4);

} // namespace mitd
