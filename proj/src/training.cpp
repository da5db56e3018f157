#include "mitd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mitd/errors.hpp"
#include "mitd/smote.hpp"

namespace mitd {

Adam::Adam(ParameterList params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i]->value.values();
        auto g = params_[i]->grad.values();
        auto m = m_[i].values();
        auto v = v_[i].values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mh = m[j] / c1;
            const double vh = v[j] / c2;
            w[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

SessionSplit split_sessions(const std::vector<FeaturizedSession>& sessions, double ratio, std::uint64_t seed) {
    std::vector<std::size_t> idx(sessions.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(sessions.size())));
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());
    SessionSplit out;
    for (auto i : tr) {
        out.train.push_back(sessions[i]);
    }
    for (auto i : te) {
        out.test.push_back(sessions[i]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const auto end = std::min(order.size(), i + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (out.size() > 1 && out.back().size() == 1) {
        out[out.size() - 2].push_back(out.back().front());
        out.pop_back();
    }
    return out;
}

TrainResult train_model(const std::vector<FeaturizedSession>& sessions, const Config& cfg, const TrainObserver& observer) {
    cfg.validate();
    if (sessions.size() < 10) {
        throw ConfigError("training needs at least 10 sessions, got " + std::to_string(sessions.size()));
    }
    const auto& tc = cfg.train;
    SessionSplit split = split_sessions(sessions, tc.split, tc.seed);
    const auto positives = std::count_if(split.train.begin(), split.train.end(),
                                         [](const FeaturizedSession& s) { return s.anomalous(); });
    if (positives == 0 || static_cast<std::size_t>(positives) == split.train.size()) {
        throw ConfigError("training split holds a single class; need both normal and anomalous sessions");
    }

    std::vector<std::vector<double>> rows;
    rows.reserve(split.train.size());
    for (const auto& s : split.train) {
        if (observer) {
            observer("standardize", s);
        }
        rows.push_back(s.x);
    }
    Standardizer standardizer = Standardizer::fit(rows);

    if (observer) {
        for (const auto& s : split.train) {
            observer("smote", s);
        }
    }
    SmoteResult aug = smote_oversample(split.train, tc.smote_k, tc.seed ^ 0x5107e5107eULL, standardizer, tc.smote);

    TrainResult result{MambaItd(cfg.model, tc.seed), {}, std::move(split), aug.synthesized, aug.duplicated, aug.skipped};
    MambaItd& model = result.model;
    model.set_standardizer(standardizer);
    const ParameterList params = model.parameters();
    Adam opt(params, tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps);

    Rng order_rng(tc.seed + 1);
    std::vector<std::size_t> order(aug.sessions.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        EpochStats stats;
        stats.epoch = epoch;
        std::size_t seen = 0;
        for (const auto& b : make_batches(order, tc.batch_size)) {
            std::vector<const FeaturizedSession*> batch;
            batch.reserve(b.size());
            for (auto i : b) {
                batch.push_back(&aug.sessions[i]);
                if (observer) {
                    observer("gradient", aug.sessions[i]);
                }
            }
            zero_grads(params);
            const BatchLoss loss = model.run_batch(batch, tc.lambda_gate, true);
            opt.step();
            const auto w = static_cast<double>(b.size());
            stats.bce += loss.bce * w;
            stats.gate_reg += loss.gate_reg * w;
            stats.total += loss.total * w;
            stats.composition_gap =
                std::max(stats.composition_gap, std::abs(loss.total - (loss.bce + tc.lambda_gate * loss.gate_reg)));
            seen += b.size();
        }
        const auto n = static_cast<double>(seen);
        stats.bce /= n;
        stats.gate_reg /= n;
        stats.total /= n;
        result.history.push_back(stats);
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "epoch,bce,l_g,total\n";
    char buf[128];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.bce, e.gate_reg, e.total);
        out << buf;
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace mitd
