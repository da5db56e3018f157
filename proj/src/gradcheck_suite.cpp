#include "mitd/gradcheck_suite.hpp"

#include <random>

#include "mitd/errors.hpp"
#include "mitd/loss.hpp"

namespace mitd {

Tensor WeightedProbe::forward(const Tensor& input) {
    Tensor out = inner_.forward(input);
    if (weights_.shape() != out.shape()) {
        Rng rng(seed_);
        weights_ = Tensor(out.shape());
        init_uniform(weights_, 1.0, rng);
    }
    auto o = out.values();
    const auto w = weights_.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] *= w[i];
    }
    return out;
}

Tensor WeightedProbe::backward(const Tensor& grad_output) {
    Tensor g = grad_output;
    auto gd = g.values();
    const auto w = weights_.values();
    for (std::size_t i = 0; i < gd.size(); ++i) {
        gd[i] *= w[i];
    }
    return inner_.backward(g);
}

ModelLossProbe::ModelLossProbe(MambaItd& model, std::vector<FeaturizedSession> batch, double lambda_gate)
    : model_(model), batch_(std::move(batch)), lambda_(lambda_gate) {}

Tensor ModelLossProbe::forward(const Tensor&) {
    std::vector<const FeaturizedSession*> ptrs;
    for (const auto& s : batch_) {
        ptrs.push_back(&s);
    }
    last_ = model_.run_batch(ptrs, lambda_, false);
    return Tensor::vector(1, last_.total);
}

Tensor ModelLossProbe::backward(const Tensor& grad_output) {
    if (grad_output.size() != 1 || grad_output[0] != 1.0) {
        throw InputError("ModelLossProbe::backward expects a unit cotangent");
    }
    std::vector<const FeaturizedSession*> ptrs;
    for (const auto& s : batch_) {
        ptrs.push_back(&s);
    }
    model_.run_batch(ptrs, lambda_, true);
    return {};
}

ModelConfig gradcheck_config() {
    ModelConfig c;
    c.d_model = 4;
    c.n_state = 3;
    c.layers = 2;
    c.expand = 2;
    c.hidden = 8;
    c.head_layers = 3;
    return c;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    init_normal(t, scale, rng);
    return t;
}

/// Loss of probabilities and gate values packed into one input vector [T + d].
class LossProbe final : public Module {
public:
    LossProbe(std::vector<int> labels, double lambda) : labels_(std::move(labels)), lambda_(lambda) {}

    Tensor forward(const Tensor& input) override {
        input_ = input;
        const auto all = input.values();
        const auto t = labels_.size();
        return Tensor::vector(1, total_loss(all.subspan(0, t), labels_, all.subspan(t), lambda_));
    }

    Tensor backward(const Tensor& grad_output) override {
        const auto all = input_.values();
        const auto t = labels_.size();
        const auto dp = bce_grad(all.subspan(0, t), labels_);
        const auto dg = gate_regularizer_grad(all.subspan(t));
        Tensor out(input_.shape());
        for (std::size_t i = 0; i < t; ++i) {
            out[i] = grad_output[0] * dp[i];
        }
        for (std::size_t j = 0; j < dg.size(); ++j) {
            out[t + j] = grad_output[0] * lambda_ * dg[j];
        }
        return out;
    }

    ParameterList parameters() override { return {}; }

private:
    std::vector<int> labels_;
    double lambda_;
    Tensor input_;
};

/// Fusion followed by the head: input rows are h_b (T), h_c (T), g, session vector.
class FusionHeadProbe final : public Module {
public:
    FusionHeadProbe(std::size_t t, const ModelConfig& cfg, Rng& rng)
        : t_(t), d_(cfg.d_model), fusion_("fusion", cfg.d_model, cfg.residual),
          head_("head", 2 * cfg.d_model, cfg.hidden, cfg.head_layers, rng) {}

    Tensor forward(const Tensor& input) override {
        const auto rows = [&](std::size_t first, std::size_t n) {
            const double* p = input.data() + first * d_;
            return Tensor({n, d_}, std::vector<double>(p, p + n * d_));
        };
        const Tensor h_b = rows(0, t_);
        const Tensor h_c = rows(t_, t_);
        const double* g = input.data() + 2 * t_ * d_;
        const Tensor gate({d_}, std::vector<double>(g, g + d_));
        const Tensor session({d_}, std::vector<double>(g + d_, g + 2 * d_));
        return head_.forward(concat_final(fusion_.forward(h_b, h_c, gate), session));
    }

    Tensor backward(const Tensor& grad_output) override {
        auto [dfused, dsession] = concat_final_backward(head_.backward(grad_output), d_);
        const auto fg = fusion_.backward(dfused);
        Tensor out({2 * t_ + 2, d_});
        std::copy(fg.h_b.data(), fg.h_b.data() + t_ * d_, out.data());
        std::copy(fg.h_c.data(), fg.h_c.data() + t_ * d_, out.data() + t_ * d_);
        std::copy(fg.g.data(), fg.g.data() + d_, out.data() + 2 * t_ * d_);
        std::copy(dsession.data(), dsession.data() + d_, out.data() + (2 * t_ + 1) * d_);
        return out;
    }

    ParameterList parameters() override {
        ParameterList out = fusion_.parameters();
        const auto h = head_.parameters();
        out.insert(out.end(), h.begin(), h.end());
        return out;
    }

private:
    std::size_t t_;
    std::size_t d_;
    GatedFusion fusion_;
    MlpHead head_;
};

FeaturizedSession random_session(std::size_t t, Rng& rng) {
    FeaturizedSession s;
    s.user_id = "probe";
    std::uniform_int_distribution<int> id(1, 192);
    std::uniform_real_distribution<double> gap(0.0, 600.0);
    std::normal_distribution<double> feat(0.0, 1.0);
    std::bernoulli_distribution bit(0.4);
    for (std::size_t i = 0; i < t; ++i) {
        s.s_b.push_back(id(rng));
        s.s_c.push_back(gap(rng));
        s.labels.push_back(bit(rng) ? 1 : 0);
    }
    for (std::size_t f = 0; f < kStatDim; ++f) {
        s.x.push_back(feat(rng));
    }
    return s;
}

} // namespace

std::vector<GradCheckLine> run_gradcheck_suite(std::uint64_t seed, double epsilon, double tol) {
    const ModelConfig cfg = gradcheck_config();
    const std::size_t d = cfg.d_model;
    const std::size_t t = 8;
    Rng rng(seed);
    std::vector<GradCheckLine> out;
    const auto check = [&](const std::string& name, Module& m, const Tensor& input) {
        WeightedProbe probe(m, seed + out.size() + 1);
        out.push_back({name, grad_check(probe, input, epsilon, tol)});
    };

    {
        BehaviorEmbedding emb("embed_b", d, rng);
        Tensor ids({t});
        std::uniform_int_distribution<int> id(1, 192);
        for (std::size_t i = 0; i < t; ++i) {
            ids[i] = id(rng);
        }
        check("behavior_embedding", emb, ids);
    }
    {
        IntervalEmbedding emb("embed_c", d, rng);
        Tensor c({t});
        std::uniform_real_distribution<double> gap(0.0, 300.0);
        for (std::size_t i = 0; i < t; ++i) {
            c[i] = gap(rng);
        }
        check("interval_embedding", emb, c);
    }
    {
        StatEmbedding emb("embed_x", kStatDim, d, StatTokens::PerFeature, rng);
        check("stat_embedding_batchnorm", emb, random_tensor({3, kStatDim}, rng));
    }
    {
        StatEmbedding emb("embed_x", kStatDim, d, StatTokens::Pooled, rng);
        check("stat_embedding_batchnorm_pooled", emb, random_tensor({3, kStatDim}, rng));
    }
    {
        LayerNorm ln("norm", d);
        init_normal(ln.gamma().value, 1.0, rng);
        init_normal(ln.beta().value, 1.0, rng);
        check("layer_norm", ln, random_tensor({t, d}, rng));
    }
    {
        SsmLayer layer("ssm", cfg, rng);
        check("ssm_layer", layer, random_tensor({t, d}, rng));
    }
    {
        Gate gate("gate", d, rng);
        check("gate", gate, random_tensor({d}, rng));
    }
    {
        FusionHeadProbe fh(t, cfg, rng);
        Tensor input = random_tensor({2 * t + 2, d}, rng);
        std::uniform_real_distribution<double> open(0.1, 0.9);
        for (std::size_t j = 0; j < d; ++j) {
            input.data()[2 * t * d + j] = open(rng);
        }
        check("gated_fusion_with_head", fh, input);
    }
    {
        MlpHead head("head", 2 * d, cfg.hidden, cfg.head_layers, rng);
        check("mlp_head", head, random_tensor({t, 2 * d}, rng));
    }
    {
        std::vector<int> labels(t);
        std::bernoulli_distribution bit(0.5);
        for (auto& y : labels) {
            y = bit(rng) ? 1 : 0;
        }
        LossProbe lp(labels, 0.01);
        Tensor input({t + d});
        std::uniform_real_distribution<double> open(0.05, 0.95);
        for (std::size_t i = 0; i < input.size(); ++i) {
            input[i] = open(rng);
        }
        out.push_back({"total_loss", grad_check(lp, input, epsilon, tol)});
    }
    {
        MambaItd model(cfg, seed + 99);
        std::vector<FeaturizedSession> batch;
        for (std::size_t b = 0; b < 3; ++b) {
            batch.push_back(random_session(3 + 2 * b, rng));
        }
        ModelLossProbe probe(model, std::move(batch), 0.01);
        out.push_back({"model_total_loss", grad_check(probe, Tensor::vector(1), epsilon, tol)});
    }
    return out;
}

} // namespace mitd
