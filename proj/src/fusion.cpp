#include "mitd/fusion.hpp"

#include <algorithm>

#include "mitd/errors.hpp"

namespace mitd {

Tensor session_pool(const Tensor& tokens) {
    if (tokens.empty() || tokens.rank() < 2) {
        throw ShapeError("session_pool: expected token rows, got " + shape_string(tokens.shape()));
    }
    const std::size_t d = tokens.shape().back();
    const std::size_t n = tokens.size() / d;
    Tensor out = Tensor::vector(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out[j] += tokens[i * d + j];
        }
    }
    out *= 1.0 / static_cast<double>(n);
    return out;
}

Tensor session_pool_backward(const Tensor& grad_session, std::size_t n_tokens) {
    const std::size_t d = grad_session.size();
    Tensor out = Tensor::matrix(n_tokens, d);
    const double w = 1.0 / static_cast<double>(n_tokens);
    for (std::size_t i = 0; i < n_tokens; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out.at(i, j) = grad_session[j] * w;
        }
    }
    return out;
}

Gate::Gate(std::string name, std::size_t d_model, Rng& rng) : proj_(std::move(name), d_model, d_model, true, rng) {}

Tensor Gate::forward(const Tensor& input) {
    const std::size_t d = proj_.in_features();
    if (input.size() != d) {
        throw ShapeError("gate: expected [" + std::to_string(d) + "], got " + shape_string(input.shape()));
    }
    Tensor z = proj_.forward(input.reshaped({1, d}));
    out_ = Tensor::vector(d);
    for (std::size_t j = 0; j < d; ++j) {
        out_[j] = sigmoid(z[j]);
    }
    return out_;
}

Tensor Gate::backward(const Tensor& grad_output) {
    const std::size_t d = out_.size();
    if (grad_output.size() != d) {
        throw ShapeError("gate backward: expected [" + std::to_string(d) + "], got " + shape_string(grad_output.shape()));
    }
    Tensor dz = Tensor::matrix(1, d);
    for (std::size_t j = 0; j < d; ++j) {
        dz[j] = grad_output[j] * out_[j] * (1.0 - out_[j]);
    }
    return proj_.backward(dz).reshaped({d});
}

Tensor gated_mix(const Tensor& h_b, const Tensor& h_c, const Tensor& g) {
    require_shape(h_c, h_b.shape(), "fuse h_c");
    if (h_b.rank() != 2 || g.size() != h_b.cols()) {
        throw ShapeError("fuse: gate " + shape_string(g.shape()) + " does not match " + shape_string(h_b.shape()));
    }
    const std::size_t d = h_b.cols();
    Tensor mix(h_b.shape());
    for (std::size_t t = 0; t < h_b.rows(); ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t i = t * d + j;
            mix[i] = g[j] * h_b[i] + (1.0 - g[j]) * h_c[i];
        }
    }
    return mix;
}

GatedFusion::GatedFusion(std::string name, std::size_t d_model, FusionResidual residual)
    : residual_(residual), norm_(std::move(name) + ".norm", d_model) {}

Tensor GatedFusion::forward(const Tensor& h_b, const Tensor& h_c, const Tensor& g) {
    Tensor pre = gated_mix(h_b, h_c, g);
    if (residual_ == FusionResidual::Both) {
        pre += h_b;
        pre += h_c;
    }
    h_b_ = h_b;
    h_c_ = h_c;
    g_ = g;
    return norm_.forward(pre);
}

GatedFusion::Grads GatedFusion::backward(const Tensor& grad_output) {
    const Tensor dpre = norm_.backward(grad_output);
    const std::size_t d = h_b_.cols();
    Grads out{Tensor(h_b_.shape()), Tensor(h_c_.shape()), Tensor::vector(d)};
    const double extra = residual_ == FusionResidual::Both ? 1.0 : 0.0;
    for (std::size_t t = 0; t < h_b_.rows(); ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t i = t * d + j;
            out.h_b[i] = dpre[i] * (g_[j] + extra);
            out.h_c[i] = dpre[i] * (1.0 - g_[j] + extra);
            out.g[j] += dpre[i] * (h_b_[i] - h_c_[i]);
        }
    }
    return out;
}

Tensor concat_final(const Tensor& fused, const Tensor& session) {
    if (fused.rank() != 2 || session.size() != fused.cols()) {
        throw ShapeError("concat_final: " + shape_string(fused.shape()) + " with session " + shape_string(session.shape()));
    }
    const std::size_t T = fused.rows();
    const std::size_t d = fused.cols();
    Tensor out = Tensor::matrix(T, 2 * d);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy(fused.data() + t * d, fused.data() + (t + 1) * d, out.data() + t * 2 * d);
        std::copy(session.data(), session.data() + d, out.data() + t * 2 * d + d);
    }
    return out;
}

std::pair<Tensor, Tensor> concat_final_backward(const Tensor& grad_output, std::size_t d_model) {
    if (grad_output.rank() != 2 || grad_output.cols() != 2 * d_model) {
        throw ShapeError("concat_final backward: got " + shape_string(grad_output.shape()));
    }
    const std::size_t T = grad_output.rows();
    Tensor dfused = Tensor::matrix(T, d_model);
    Tensor dsession = Tensor::vector(d_model);
    for (std::size_t t = 0; t < T; ++t) {
        const double* row = grad_output.data() + t * 2 * d_model;
        std::copy(row, row + d_model, dfused.data() + t * d_model);
        for (std::size_t j = 0; j < d_model; ++j) {
            dsession[j] += row[d_model + j];
        }
    }
    return {std::move(dfused), std::move(dsession)};
}

MlpHead::MlpHead(std::string name, std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng) {
    if (layers < 2) {
        throw ConfigError("mlp head: at least 2 layers required");
    }
    std::size_t width = in;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        layers_.push_back(std::make_unique<Linear>(name + "." + std::to_string(l), width, hidden, true, rng));
        width = hidden;
    }
    layers_.push_back(std::make_unique<Linear>(name + "." + std::to_string(layers - 1), width, 1, true, rng));
}

ParameterList MlpHead::parameters() {
    ParameterList out;
    for (auto& l : layers_) {
        for (auto* p : l->parameters()) {
            out.push_back(p);
        }
    }
    return out;
}

Tensor MlpHead::forward(const Tensor& input) {
    pre_activations_.clear();
    Tensor x = input;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        Tensor z = layers_[l]->forward(x);
        pre_activations_.push_back(z);
        for (auto& v : z.values()) {
            v = std::max(v, 0.0);
        }
        x = std::move(z);
    }
    logits_ = layers_.back()->forward(x);
    Tensor p(logits_.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::clamp(sigmoid(logits_[i]), kProbFloor, 1.0 - kProbFloor);
    }
    return p;
}

Tensor MlpHead::backward(const Tensor& grad_output) {
    require_shape(grad_output, logits_.shape(), "mlp head backward");
    Tensor g(logits_.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid(logits_[i]);
        const bool clamped = s < kProbFloor || s > 1.0 - kProbFloor;
        g[i] = clamped ? 0.0 : grad_output[i] * s * (1.0 - s);
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
        g = layers_[l]->backward(g);
        if (l > 0) {
            const Tensor& z = pre_activations_[l - 1];
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (z[i] <= 0.0) {
                    g[i] = 0.0;
                }
            }
        }
    }
    return g;
}

} // namespace mitd
