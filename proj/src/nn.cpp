#include "mitd/nn.hpp"

#include <cmath>

#include "mitd/errors.hpp"

namespace mitd {

void init_uniform(Tensor& t, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.values()) {
        v = dist(rng);
    }
}

void init_normal(Tensor& t, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.values()) {
        v = dist(rng);
    }
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, bool bias, Rng& rng)
    : weight_(name + ".weight", Tensor::matrix(in, out)),
      bias_(name + ".bias", Tensor::vector(out)),
      has_bias_(bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(weight_.value, bound, rng);
    if (has_bias_) {
        init_uniform(bias_.value, bound, rng);
    }
}

Tensor Linear::forward(const Tensor& input) {
    if (input.rank() != 2 || input.cols() != in_features()) {
        throw ShapeError("linear " + weight_.name + ": expected [T x " + std::to_string(in_features()) + "], got " +
                         shape_string(input.shape()));
    }
    input_ = input;
    Tensor out = matmul(input, weight_.value);
    if (has_bias_) {
        const auto n = out_features();
        for (std::size_t r = 0; r < out.rows(); ++r) {
            double* row = out.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) {
                row[c] += bias_.value[c];
            }
        }
    }
    return out;
}

Tensor Linear::backward(const Tensor& grad_output) {
    require_shape(grad_output, {input_.rows(), out_features()}, "linear backward " + weight_.name);
    add_matmul_tn(input_, grad_output, weight_.grad);
    if (has_bias_) {
        const auto n = out_features();
        for (std::size_t r = 0; r < grad_output.rows(); ++r) {
            const double* row = grad_output.data() + r * n;
            for (std::size_t c = 0; c < n; ++c) {
                bias_.grad[c] += row[c];
            }
        }
    }
    return matmul_nt(grad_output, weight_.value);
}

ParameterList Linear::parameters() {
    if (has_bias_) {
        return {&weight_, &bias_};
    }
    return {&weight_};
}

LayerNorm::LayerNorm(std::string name, std::size_t dim)
    : gamma_(name + ".gamma", Tensor::vector(dim, 1.0)), beta_(name + ".beta", Tensor::vector(dim, 0.0)) {}

Tensor LayerNorm::forward(const Tensor& input) {
    const std::size_t d = gamma_.value.size();
    if (input.rank() != 2 || input.cols() != d) {
        throw ShapeError("layernorm " + gamma_.name + ": expected [T x " + std::to_string(d) + "], got " +
                         shape_string(input.shape()));
    }
    const std::size_t rows = input.rows();
    normalized_ = Tensor(input.shape());
    inv_std_.assign(rows, 0.0);
    Tensor out(input.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const auto x = input.row(r);
        double mean = 0.0;
        for (double v : x) {
            mean += v;
        }
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : x) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std_[r] = inv;
        auto xn = normalized_.row(r);
        auto y = out.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            xn[c] = (x[c] - mean) * inv;
            y[c] = xn[c] * gamma_.value[c] + beta_.value[c];
        }
    }
    return out;
}

Tensor LayerNorm::backward(const Tensor& grad_output) {
    require_shape(grad_output, normalized_.shape(), "layernorm backward " + gamma_.name);
    const std::size_t d = gamma_.value.size();
    Tensor dx(grad_output.shape());
    std::vector<double> dxn(d);
    for (std::size_t r = 0; r < grad_output.rows(); ++r) {
        const auto dy = grad_output.row(r);
        const auto xn = normalized_.row(r);
        double sum_dxn = 0.0;
        double sum_dxn_xn = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            gamma_.grad[c] += dy[c] * xn[c];
            beta_.grad[c] += dy[c];
            dxn[c] = dy[c] * gamma_.value[c];
            sum_dxn += dxn[c];
            sum_dxn_xn += dxn[c] * xn[c];
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        auto out = dx.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            out[c] = inv_std_[r] * (dxn[c] - inv_d * sum_dxn - xn[c] * inv_d * sum_dxn_xn);
        }
    }
    return dx;
}

} // namespace mitd
