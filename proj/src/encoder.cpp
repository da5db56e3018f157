#include "mitd/encoder.hpp"

#include <cmath>

#include <Eigen/Core>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

Eigen::Index ix(std::size_t n) {
    return static_cast<Eigen::Index>(n);
}

} // namespace

// ---------------------------------------------------------------------------
// BehaviorEmbedding

BehaviorEmbedding::BehaviorEmbedding(std::string name, std::size_t d_model, Rng& rng)
    : table_(name + ".table", Tensor::matrix(kRows, d_model)) {
    init_normal(table_.value, 1.0, rng);
    for (auto& v : table_.value.row(0)) {
        v = 0.0;
    }
}

Tensor BehaviorEmbedding::forward_ids(std::span<const int> ids) {
    if (ids.empty()) {
        throw InputError("embed_behavior: empty sequence");
    }
    const std::size_t d = table_.value.cols();
    Tensor out = Tensor::matrix(ids.size(), d);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < 1 || ids[t] > static_cast<int>(kRows) - 1) {
            throw InputError("embed_behavior: id " + std::to_string(ids[t]) + " outside [1, 192]");
        }
        const auto src = table_.value.row(static_cast<std::size_t>(ids[t]));
        std::copy(src.begin(), src.end(), out.row(t).begin());
    }
    ids_.assign(ids.begin(), ids.end());
    return out;
}

Tensor BehaviorEmbedding::forward(const Tensor& input) {
    std::vector<int> ids;
    ids.reserve(input.size());
    for (double v : input.values()) {
        ids.push_back(static_cast<int>(std::lround(v)));
    }
    return forward_ids(ids);
}

Tensor BehaviorEmbedding::backward(const Tensor& grad_output) {
    const std::size_t d = table_.value.cols();
    require_shape(grad_output, {ids_.size(), d}, "embed_behavior backward");
    for (std::size_t t = 0; t < ids_.size(); ++t) {
        auto dst = table_.grad.row(static_cast<std::size_t>(ids_[t]));
        const auto src = grad_output.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            dst[j] += src[j];
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// IntervalEmbedding

IntervalEmbedding::IntervalEmbedding(std::string name, std::size_t d_model, Rng& rng)
    : weight_(name + ".weight", Tensor::vector(d_model)), bias_(name + ".bias", Tensor::vector(d_model)) {
    init_uniform(weight_.value, 1.0, rng);
    init_uniform(bias_.value, 1.0, rng);
}

Tensor IntervalEmbedding::forward(const Tensor& input) {
    if (input.empty() || input.rank() > 2 || (input.rank() == 2 && input.cols() != 1)) {
        throw ShapeError("embed_interval: expected [T] or [T x 1], got " + shape_string(input.shape()));
    }
    const std::size_t d = weight_.value.size();
    const std::size_t T = input.size();
    Tensor out = Tensor::matrix(T, d);
    for (std::size_t t = 0; t < T; ++t) {
        const double c = input[t];
        if (!(c >= 0.0) || !std::isfinite(c)) {
            throw InputError("embed_interval: intervals must be finite and non-negative");
        }
        const double l = std::log1p(c);
        auto row = out.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = l * weight_.value[j] + bias_.value[j];
        }
    }
    input_ = input;
    return out;
}

Tensor IntervalEmbedding::backward(const Tensor& grad_output) {
    const std::size_t d = weight_.value.size();
    const std::size_t T = input_.size();
    require_shape(grad_output, {T, d}, "embed_interval backward");
    Tensor dx(input_.shape());
    for (std::size_t t = 0; t < T; ++t) {
        const double l = std::log1p(input_[t]);
        const auto g = grad_output.row(t);
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            weight_.grad[j] += g[j] * l;
            bias_.grad[j] += g[j];
            acc += g[j] * weight_.value[j];
        }
        dx[t] = acc / (1.0 + input_[t]);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// StatEmbedding

StatEmbedding::StatEmbedding(std::string name, std::size_t n_features, std::size_t d_model, StatTokens mode, Rng& rng)
    : name_(std::move(name)),
      n_features_(n_features),
      d_model_(d_model),
      mode_(mode),
      fc_weight_(name_ + ".fc.weight",
                 mode == StatTokens::PerFeature ? Tensor::vector(d_model) : Tensor::matrix(n_features, d_model)),
      gamma_(name_ + ".bn.gamma", Tensor::vector(tokens() * d_model, 1.0)),
      beta_(name_ + ".bn.beta", Tensor::vector(tokens() * d_model, 0.0)),
      running_mean_(Tensor::vector(tokens() * d_model, 0.0)),
      running_var_(Tensor::vector(tokens() * d_model, 1.0)) {
    const double bound = mode == StatTokens::PerFeature ? 1.0 : 1.0 / std::sqrt(static_cast<double>(n_features));
    init_uniform(fc_weight_.value, bound, rng);
}

ParameterList StatEmbedding::parameters() {
    return {&fc_weight_, &gamma_, &beta_};
}

Tensor StatEmbedding::forward(const Tensor& input) {
    if (input.rank() != 2 || input.cols() != n_features_) {
        throw ShapeError("embed_stats: expected [B x " + std::to_string(n_features_) + "], got " +
                         shape_string(input.shape()));
    }
    if (!training_ && !has_stats_) {
        throw ConfigError("embed_stats: eval mode requested before any training statistics exist");
    }
    const std::size_t B = input.rows();
    if (training_ && B < 2) {
        throw ConfigError("embed_stats: training-mode batch normalization needs a batch of at least 2");
    }
    const std::size_t units = tokens() * d_model_;

    // Affine lift: pre[b, unit]
    Tensor pre = Tensor::matrix(B, units);
    if (mode_ == StatTokens::PerFeature) {
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < n_features_; ++i) {
                const double x = input.at(b, i);
                double* dst = pre.data() + b * units + i * d_model_;
                for (std::size_t j = 0; j < d_model_; ++j) {
                    dst[j] = x * fc_weight_.value[j];
                }
            }
        }
    } else {
        pre = matmul(input, fc_weight_.value);
    }

    normalized_ = Tensor::matrix(B, units);
    inv_std_.assign(units, 0.0);
    Tensor out({B, tokens(), d_model_});
    const auto nb = static_cast<double>(B);
    for (std::size_t u = 0; u < units; ++u) {
        double mean = 0.0;
        double var = 0.0;
        if (training_) {
            for (std::size_t b = 0; b < B; ++b) {
                mean += pre.at(b, u);
            }
            mean /= nb;
            for (std::size_t b = 0; b < B; ++b) {
                const double dlt = pre.at(b, u) - mean;
                var += dlt * dlt;
            }
            var /= nb;
            running_mean_[u] = (1.0 - kMomentum) * running_mean_[u] + kMomentum * mean;
            running_var_[u] = (1.0 - kMomentum) * running_var_[u] + kMomentum * var * nb / (nb - 1.0);
        } else {
            mean = running_mean_[u];
            var = running_var_[u];
        }
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std_[u] = inv;
        for (std::size_t b = 0; b < B; ++b) {
            const double n = (pre.at(b, u) - mean) * inv;
            normalized_.at(b, u) = n;
            out[b * units + u] = gamma_.value[u] * n + beta_.value[u];
        }
    }
    if (training_) {
        has_stats_ = true;
    }
    cached_training_ = training_;
    input_ = input;
    return out;
}

Tensor StatEmbedding::backward(const Tensor& grad_output) {
    const std::size_t B = input_.rows();
    const std::size_t units = tokens() * d_model_;
    if (grad_output.size() != B * units) {
        throw ShapeError("embed_stats backward: expected " + shape_string({B, tokens(), d_model_}) + ", got " +
                         shape_string(grad_output.shape()));
    }
    const auto nb = static_cast<double>(B);
    Tensor dpre = Tensor::matrix(B, units);
    for (std::size_t u = 0; u < units; ++u) {
        double sum_dn = 0.0;
        double sum_dn_n = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const double dy = grad_output[b * units + u];
            const double n = normalized_.at(b, u);
            gamma_.grad[u] += dy * n;
            beta_.grad[u] += dy;
            const double dn = dy * gamma_.value[u];
            sum_dn += dn;
            sum_dn_n += dn * n;
        }
        for (std::size_t b = 0; b < B; ++b) {
            const double dn = grad_output[b * units + u] * gamma_.value[u];
            if (cached_training_) {
                dpre.at(b, u) = inv_std_[u] / nb * (nb * dn - sum_dn - normalized_.at(b, u) * sum_dn_n);
            } else {
                dpre.at(b, u) = inv_std_[u] * dn;
            }
        }
    }

    Tensor dx = Tensor::matrix(B, n_features_);
    if (mode_ == StatTokens::PerFeature) {
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < n_features_; ++i) {
                const double x = input_.at(b, i);
                const double* g = dpre.data() + b * units + i * d_model_;
                double acc = 0.0;
                for (std::size_t j = 0; j < d_model_; ++j) {
                    fc_weight_.grad[j] += g[j] * x;
                    acc += g[j] * fc_weight_.value[j];
                }
                dx.at(b, i) = acc;
            }
        }
    } else {
        add_matmul_tn(input_, dpre, fc_weight_.grad);
        dx = matmul_nt(dpre, fc_weight_.value);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// SelectiveScan

SelectiveScan::SelectiveScan(std::string name, std::size_t d_inner, std::size_t n_state, std::size_t dt_rank, Rng& rng)
    : d_inner_(d_inner),
      n_state_(n_state),
      dt_down_(name + ".dt_down", d_inner, dt_rank, false, rng),
      dt_up_(name + ".dt_up", dt_rank, d_inner, true, rng),
      b_proj_(name + ".b_proj", d_inner, n_state, false, rng),
      c_proj_(name + ".c_proj", d_inner, n_state, false, rng),
      a_log_(name + ".A_log", Tensor::matrix(d_inner, n_state)),
      d_(name + ".D", Tensor::vector(d_inner, 1.0)) {
    for (std::size_t k = 0; k < d_inner; ++k) {
        for (std::size_t n = 0; n < n_state; ++n) {
            a_log_.value.at(k, n) = std::log(static_cast<double>(n + 1));
        }
    }
    // Initial step sizes log-uniform in [1e-3, 1e-1]; the bias is their inverse softplus.
    std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
    auto& bias = dt_up_.bias().value;
    for (std::size_t k = 0; k < d_inner; ++k) {
        const double dt = std::exp(log_dt(rng));
        bias[k] = dt + std::log(-std::expm1(-dt));
    }
}

ParameterList SelectiveScan::parameters() {
    ParameterList out;
    for (auto* m : {&dt_down_, &dt_up_, &b_proj_, &c_proj_}) {
        for (auto* p : m->parameters()) {
            out.push_back(p);
        }
    }
    out.push_back(&a_log_);
    out.push_back(&d_);
    return out;
}

Tensor SelectiveScan::forward(const Tensor& input) {
    if (input.rank() != 2 || input.cols() != d_inner_) {
        throw ShapeError("ssm scan: expected [T x " + std::to_string(d_inner_) + "], got " + shape_string(input.shape()));
    }
    const std::size_t T = input.rows();
    const std::size_t K = d_inner_;
    const std::size_t N = n_state_;

    Tensor dt_raw = dt_up_.forward(dt_down_.forward(input));
    Tensor delta(dt_raw.shape());
    for (std::size_t i = 0; i < dt_raw.size(); ++i) {
        delta[i] = softplus(dt_raw[i]);
    }
    Tensor bmat = b_proj_.forward(input);
    Tensor cmat = c_proj_.forward(input);

    const RowMat a = -ConstMatMap(a_log_.value.data(), ix(K), ix(N)).array().exp().matrix();
    RowMat h = RowMat::Zero(ix(K), ix(N));
    RowMat decay(ix(K), ix(N));
    if (record_) {
        states_.assign(T * K * N, 0.0);
        decay_.assign(T * K * N, 0.0);
    }
    Tensor out = Tensor::matrix(T, K);
    const ConstVecMap d_skip(d_.value.data(), ix(K));
    for (std::size_t t = 0; t < T; ++t) {
        const ConstVecMap dt(delta.data() + t * K, ix(K));
        const ConstVecMap u(input.data() + t * K, ix(K));
        const Eigen::Map<const Eigen::RowVectorXd> bt(bmat.data() + t * N, ix(N));
        const ConstVecMap ct(cmat.data() + t * N, ix(N));
        decay.array() = (a.array().colwise() * dt.array()).exp();
        h.array() = decay.array() * h.array();
        h.noalias() += dt.cwiseProduct(u) * bt;
        VecMap y(out.data() + t * K, ix(K));
        y.noalias() = h * ct;
        y += d_skip.cwiseProduct(u);
        if (record_) {
            MatMap(states_.data() + t * K * N, ix(K), ix(N)) = h;
            MatMap(decay_.data() + t * K * N, ix(K), ix(N)) = decay;
        }
    }
    if (record_) {
        u_ = input;
        dt_raw_ = std::move(dt_raw);
        delta_ = std::move(delta);
        b_ = std::move(bmat);
        c_ = std::move(cmat);
    }
    return out;
}

Tensor SelectiveScan::backward(const Tensor& grad_output) {
    if (!record_ || u_.empty()) {
        throw ConfigError("ssm scan: backward requires a recorded forward pass");
    }
    const std::size_t T = u_.rows();
    const std::size_t K = d_inner_;
    const std::size_t N = n_state_;
    require_shape(grad_output, {T, K}, "ssm scan backward");

    const RowMat a = -ConstMatMap(a_log_.value.data(), ix(K), ix(N)).array().exp().matrix();
    Tensor du = Tensor::matrix(T, K);
    Tensor ddelta = Tensor::matrix(T, K);
    Tensor db = Tensor::matrix(T, N);
    Tensor dc = Tensor::matrix(T, N);
    RowMat da = RowMat::Zero(ix(K), ix(N));
    RowMat g = RowMat::Zero(ix(K), ix(N));
    RowMat dh_decay(ix(K), ix(N));
    VecMap dd(d_.grad.data(), ix(K));
    const ConstVecMap d_skip(d_.value.data(), ix(K));

    for (std::size_t step = T; step-- > 0;) {
        const ConstVecMap dy(grad_output.data() + step * K, ix(K));
        const ConstVecMap u(u_.data() + step * K, ix(K));
        const ConstVecMap dt(delta_.data() + step * K, ix(K));
        const ConstVecMap bt(b_.data() + step * N, ix(N));
        const Eigen::Map<const Eigen::RowVectorXd> ct(c_.data() + step * N, ix(N));
        const ConstMatMap h(states_.data() + step * K * N, ix(K), ix(N));
        const ConstMatMap decay(decay_.data() + step * K * N, ix(K), ix(N));

        VecMap du_t(du.data() + step * K, ix(K));
        VecMap ddelta_t(ddelta.data() + step * K, ix(K));
        Eigen::Map<Eigen::VectorXd> dc_t(dc.data() + step * N, ix(N));
        Eigen::Map<Eigen::VectorXd> db_t(db.data() + step * N, ix(N));

        // y = h C + D u
        du_t = dy.cwiseProduct(d_skip);
        dd += dy.cwiseProduct(u);
        dc_t.noalias() = h.transpose() * dy;
        g.noalias() += dy * ct;

        // h = decay . h_prev + (delta u) B^T
        const Eigen::VectorXd gb = g * bt;
        ddelta_t = gb.cwiseProduct(u);
        du_t += gb.cwiseProduct(dt);
        db_t.noalias() = g.transpose() * dt.cwiseProduct(u);
        if (step > 0) {
            const ConstMatMap h_prev(states_.data() + (step - 1) * K * N, ix(K), ix(N));
            dh_decay.array() = g.array() * h_prev.array() * decay.array();
            ddelta_t += (dh_decay.array() * a.array()).rowwise().sum().matrix();
            da.array() += dh_decay.array().colwise() * dt.array();
        }
        g.array() *= decay.array();
    }

    // A = -exp(A_log)  =>  dA_log = dA * A
    MatMap(a_log_.grad.data(), ix(K), ix(N)).array() += da.array() * a.array();

    Tensor ddt_raw(dt_raw_.shape());
    for (std::size_t i = 0; i < ddt_raw.size(); ++i) {
        ddt_raw[i] = ddelta[i] * sigmoid(dt_raw_[i]);
    }
    du += dt_down_.backward(dt_up_.backward(ddt_raw));
    du += b_proj_.backward(db);
    du += c_proj_.backward(dc);
    return du;
}

// ---------------------------------------------------------------------------
// SsmLayer

SsmLayer::SsmLayer(std::string name, const ModelConfig& cfg, Rng& rng)
    : d_inner_(cfg.d_inner()),
      in_proj_(name + ".in_proj", cfg.d_model, 2 * cfg.d_inner(), false, rng),
      scan_(name + ".scan", cfg.d_inner(), cfg.n_state, cfg.resolved_dt_rank(), rng),
      out_proj_(name + ".out_proj", cfg.d_inner(), cfg.d_model, false, rng) {}

ParameterList SsmLayer::parameters() {
    ParameterList out = in_proj_.parameters();
    for (auto* p : scan_.parameters()) {
        out.push_back(p);
    }
    for (auto* p : out_proj_.parameters()) {
        out.push_back(p);
    }
    return out;
}

Tensor SsmLayer::forward(const Tensor& input) {
    const Tensor proj = in_proj_.forward(input);
    const std::size_t T = proj.rows();
    const std::size_t K = d_inner_;
    Tensor x = Tensor::matrix(T, K);
    z_ = Tensor::matrix(T, K);
    for (std::size_t t = 0; t < T; ++t) {
        const double* src = proj.data() + t * 2 * K;
        std::copy(src, src + K, x.data() + t * K);
        std::copy(src + K, src + 2 * K, z_.data() + t * K);
    }
    scanned_ = scan_.forward(x);
    Tensor gated(scanned_.shape());
    for (std::size_t i = 0; i < gated.size(); ++i) {
        const double z = z_[i];
        gated[i] = scanned_[i] * z * sigmoid(z);
    }
    return out_proj_.forward(gated);
}

Tensor SsmLayer::backward(const Tensor& grad_output) {
    const Tensor dgated = out_proj_.backward(grad_output);
    const std::size_t T = dgated.rows();
    const std::size_t K = d_inner_;
    Tensor dscanned(dgated.shape());
    Tensor dproj = Tensor::matrix(T, 2 * K);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t i = t * K + k;
            const double z = z_[i];
            const double s = sigmoid(z);
            dscanned[i] = dgated[i] * z * s;
            dproj[t * 2 * K + K + k] = dgated[i] * scanned_[i] * s * (1.0 + z * (1.0 - s));
        }
    }
    const Tensor dx = scan_.backward(dscanned);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy(dx.data() + t * K, dx.data() + (t + 1) * K, dproj.data() + t * 2 * K);
    }
    return in_proj_.backward(dproj);
}

// ---------------------------------------------------------------------------
// MambaEncoder

MambaEncoder::MambaEncoder(std::string name, const ModelConfig& cfg, Rng& rng) {
    if (cfg.layers == 0) {
        throw ConfigError("mamba encoder: at least one layer required");
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string prefix = name + "." + std::to_string(l);
        norms_.push_back(std::make_unique<LayerNorm>(prefix + ".norm", cfg.d_model));
        layers_.push_back(std::make_unique<SsmLayer>(prefix + ".ssm", cfg, rng));
    }
}

void MambaEncoder::set_record(bool record) {
    for (auto& l : layers_) {
        l->set_record(record);
    }
}

ParameterList MambaEncoder::parameters() {
    ParameterList out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        for (auto* p : norms_[l]->parameters()) {
            out.push_back(p);
        }
        for (auto* p : layers_[l]->parameters()) {
            out.push_back(p);
        }
    }
    return out;
}

Tensor MambaEncoder::forward(const Tensor& input) {
    Tensor x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        x += layers_[l]->forward(norms_[l]->forward(x));
    }
    return x;
}

Tensor MambaEncoder::backward(const Tensor& grad_output) {
    Tensor g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        g += norms_[l]->backward(layers_[l]->backward(g));
    }
    return g;
}

} // namespace mitd
