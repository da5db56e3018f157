#include "mitd/model.hpp"

#include "mitd/errors.hpp"
#include "mitd/loss.hpp"

namespace mitd {

namespace {

Tensor token_slice(const Tensor& all, std::size_t b, std::size_t tokens, std::size_t d) {
    const double* src = all.data() + b * tokens * d;
    return Tensor({tokens, d}, std::vector<double>(src, src + tokens * d));
}

} // namespace

MambaItd::MambaItd(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      rng_(seed),
      standardizer_(std::vector<double>(kStatDim, 0.0), std::vector<double>(kStatDim, 1.0)),
      embed_b_("embed_b", cfg.d_model, rng_),
      embed_c_("embed_c", cfg.d_model, rng_),
      stat_("embed_x", kStatDim, cfg.d_model, cfg.stat_tokens, rng_),
      enc_b_("enc_b", cfg, rng_),
      enc_c_("enc_c", cfg, rng_),
      gate_("gate", cfg.d_model, rng_),
      fusion_("fusion", cfg.d_model, cfg.residual),
      head_("head", 2 * cfg.d_model, cfg.hidden, cfg.head_layers, rng_) {}

ParameterList MambaItd::parameters() {
    ParameterList out;
    const auto append = [&out](ParameterList ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    append(embed_b_.parameters());
    append(embed_c_.parameters());
    append(stat_.parameters());
    append(enc_b_.parameters());
    append(enc_c_.parameters());
    append(gate_.parameters());
    append(fusion_.parameters());
    append(head_.parameters());
    return out;
}

Tensor MambaItd::standardized_batch(std::span<const FeaturizedSession* const> batch) const {
    Tensor x = Tensor::matrix(batch.size(), kStatDim);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto z = standardizer_.transform(batch[b]->x);
        std::copy(z.begin(), z.end(), x.row(b).begin());
    }
    return x;
}

MambaItd::Forward MambaItd::forward_session(const FeaturizedSession& s, const Tensor& tokens) {
    Forward f;
    f.session = session_pool(tokens);
    f.gate = gate_.forward(f.session);
    const Tensor h_b = enc_b_.forward(embed_b_.forward_ids(s.s_b));
    const Tensor h_c = enc_c_.forward(embed_c_.forward(Tensor({s.s_c.size()}, s.s_c)));
    const Tensor fused = fusion_.forward(h_b, h_c, f.gate);
    f.probs = head_.forward(concat_final(fused, f.session));
    return f;
}

BatchLoss MambaItd::run_batch(std::span<const FeaturizedSession* const> batch, double lambda_gate, bool backward) {
    if (batch.size() < 2) {
        throw ConfigError("run_batch: batch normalization needs at least 2 sessions");
    }
    const std::size_t d = cfg_.d_model;
    const std::size_t tokens = stat_.tokens();
    const auto scale = 1.0 / static_cast<double>(batch.size());

    stat_.set_training(true);
    enc_b_.set_record(backward);
    enc_c_.set_record(backward);
    const Tensor all_tokens = stat_.forward(standardized_batch(batch));
    Tensor d_tokens(all_tokens.shape());

    BatchLoss loss;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = *batch[b];
        const Forward f = forward_session(s, token_slice(all_tokens, b, tokens, d));
        const double bce = bce_loss(f.probs.values(), s.labels);
        const double lg = gate_regularizer(f.gate.values());
        loss.bce += bce * scale;
        loss.gate_reg += lg * scale;
        loss.total += (bce + lambda_gate * lg) * scale;
        if (!backward) {
            continue;
        }

        auto dp = bce_grad(f.probs.values(), s.labels);
        Tensor dprobs(f.probs.shape(), std::move(dp));
        dprobs *= scale;
        const Tensor dfinal = head_.backward(dprobs);
        auto [dfused, dsession] = concat_final_backward(dfinal, d);
        auto fg = fusion_.backward(dfused);

        const auto dreg = gate_regularizer_grad(f.gate.values());
        for (std::size_t j = 0; j < d; ++j) {
            fg.g[j] += lambda_gate * scale * dreg[j];
        }
        dsession += gate_.backward(fg.g);

        embed_c_.backward(enc_c_.backward(fg.h_c));
        embed_b_.backward(enc_b_.backward(fg.h_b));

        const Tensor dtok = session_pool_backward(dsession, tokens);
        std::copy(dtok.data(), dtok.data() + dtok.size(), d_tokens.data() + b * tokens * d);
    }
    if (backward) {
        stat_.backward(d_tokens);
    }
    return loss;
}

std::vector<SessionScores> MambaItd::predict(std::span<const FeaturizedSession> sessions) {
    std::vector<SessionScores> out;
    if (sessions.empty()) {
        return out;
    }
    std::vector<const FeaturizedSession*> ptrs;
    ptrs.reserve(sessions.size());
    for (const auto& s : sessions) {
        ptrs.push_back(&s);
    }
    stat_.set_training(false);
    enc_b_.set_record(false);
    enc_c_.set_record(false);
    const Tensor all_tokens = stat_.forward(standardized_batch(ptrs));
    out.reserve(sessions.size());
    for (std::size_t b = 0; b < sessions.size(); ++b) {
        const Forward f = forward_session(sessions[b], token_slice(all_tokens, b, stat_.tokens(), cfg_.d_model));
        out.push_back({f.probs.to_vector(), f.gate.to_vector()});
    }
    stat_.set_training(true);
    return out;
}

ModelFile MambaItd::to_file(const std::string& metadata) {
    ModelFile file;
    file.metadata = metadata;
    for (auto* p : parameters()) {
        file.tensors.emplace_back(p->name, p->value);
    }
    file.tensors.emplace_back("embed_x.bn.running_mean", stat_.running_mean());
    file.tensors.emplace_back("embed_x.bn.running_var", stat_.running_var());
    file.tensors.emplace_back("embed_x.bn.ready", Tensor::vector(1, stat_.has_running_stats() ? 1.0 : 0.0));
    file.tensors.emplace_back("standardizer.mean", Tensor({kStatDim}, standardizer_.mean()));
    file.tensors.emplace_back("standardizer.std", Tensor({kStatDim}, standardizer_.stddev()));
    return file;
}

MambaItd MambaItd::from_file(const ModelFile& file, const ModelConfig& cfg) {
    MambaItd model(cfg, 0);
    const auto load = [&file](const std::string& name, Tensor& dst) {
        const Tensor& src = file.find(name);
        require_shape(src, dst.shape(), "model file tensor '" + name + "'");
        dst = src;
    };
    for (auto* p : model.parameters()) {
        load(p->name, p->value);
    }
    load("embed_x.bn.running_mean", model.stat_.running_mean());
    load("embed_x.bn.running_var", model.stat_.running_var());
    if (file.find("embed_x.bn.ready")[0] != 0.0) {
        model.stat_.mark_running_stats_ready();
    }
    const Tensor& mean = file.find("standardizer.mean");
    const Tensor& sd = file.find("standardizer.std");
    require_shape(mean, {kStatDim}, "standardizer.mean");
    require_shape(sd, {kStatDim}, "standardizer.std");
    model.standardizer_ = Standardizer(mean.to_vector(), sd.to_vector());
    return model;
}

} // namespace mitd
