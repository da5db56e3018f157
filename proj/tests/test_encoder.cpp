#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mitd/encoder.hpp"
#include "mitd/errors.hpp"
#include "mitd/grad_check.hpp"
#include "mitd/gradcheck_suite.hpp"
#include "mitd/model.hpp"
#include "test_util.hpp"

using namespace mitd;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    init_normal(t, scale, rng);
    return t;
}

ModelConfig small_config(std::size_t d_model = 8) {
    ModelConfig c;
    c.d_model = d_model;
    c.n_state = 4;
    c.layers = 2;
    c.expand = 2;
    c.hidden = 16;
    return c;
}

/// Central differences with a mixed tolerance |a - n| <= atol + rtol |n|. Tiny true
/// gradients make a pure relative test measure floating-point noise, not correctness.
::testing::AssertionResult mixed_grad_check(Module& m, const Tensor& input, double eps, double atol, double rtol) {
    const auto params = m.parameters();
    zero_grads(params);
    const Tensor out = m.forward(input);
    const Tensor grad_in = m.backward(Tensor(out.shape(), 1.0));
    const auto total = [&](const Tensor& x) {
        double s = 0.0;
        const Tensor y = m.forward(x);
        for (double v : y.values()) {
            s += v;
        }
        return s;
    };
    for (auto* p : params) {
        const Tensor analytic = p->grad;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double hi = total(input);
            p->value[i] = saved - eps;
            const double lo = total(input);
            p->value[i] = saved;
            const double numeric = (hi - lo) / (2 * eps);
            if (std::abs(analytic[i] - numeric) > atol + rtol * std::abs(numeric)) {
                return ::testing::AssertionFailure()
                       << p->name << "[" << i << "] analytic " << analytic[i] << " numeric " << numeric;
            }
        }
    }
    Tensor probe = input;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double hi = total(probe);
        probe[i] = saved - eps;
        const double lo = total(probe);
        probe[i] = saved;
        const double numeric = (hi - lo) / (2 * eps);
        if (std::abs(grad_in[i] - numeric) > atol + rtol * std::abs(numeric)) {
            return ::testing::AssertionFailure() << "input[" << i << "] analytic " << grad_in[i] << " numeric " << numeric;
        }
    }
    return ::testing::AssertionSuccess();
}

double softplus_ref(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

} // namespace

TEST(BehaviorEmbedding, LooksUpRowsAndScattersGradients) {
    Rng rng(1);
    BehaviorEmbedding e("emb", 4, rng);
    EXPECT_EQ(e.table().value.dim(0), 193u);
    const std::vector<int> ids{5, 192, 5};
    const Tensor out = e.forward_ids(ids);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(out.at(0, j), e.table().value.at(5, j));
        EXPECT_EQ(out.at(1, j), e.table().value.at(192, j));
    }
    zero_grads(e.parameters());
    e.backward(Tensor::matrix(3, 4, 1.0));
    EXPECT_EQ(e.table().grad.at(5, 0), 2.0);
    EXPECT_EQ(e.table().grad.at(192, 3), 1.0);
    EXPECT_EQ(e.table().grad.at(0, 0), 0.0);
    EXPECT_THROW(e.forward_ids(std::vector<int>{0}), InputError);
    EXPECT_THROW(e.forward_ids(std::vector<int>{193}), InputError);
}

TEST(IntervalEmbedding, IsAffineInLog1p) {
    Rng rng(2);
    IntervalEmbedding e("iv", 3, rng);
    Tensor x = Tensor::vector(3);
    x[0] = 0.0;
    x[1] = 10.0;
    x[2] = 1e6;
    const Tensor out = e.forward(x);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_NEAR(out.at(t, j), std::log1p(x[t]) * e.weight().value[j] + e.bias().value[j], 1e-12);
        }
    }
}

TEST(StatEmbedding, TrainingModeNormalizesEachUnit) {
    Rng rng(3);
    StatEmbedding st("stat", 22, 4, StatTokens::PerFeature, rng);
    // Spread the inputs so each unit's variance dwarfs the batch-norm epsilon.
    Tensor x = random_tensor({16, 22}, rng);
    for (auto& v : x.values()) {
        v *= 100.0;
    }
    const Tensor out = st.forward(x);
    ASSERT_EQ(out.shape(), (Shape{16, 22, 4}));
    // gamma = 1, beta = 0 at init: every (feature, channel) unit has batch mean 0 and variance ~1.
    for (std::size_t u = 0; u < 22 * 4; ++u) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t b = 0; b < 16; ++b) {
            mean += out[b * 88 + u] / 16.0;
        }
        for (std::size_t b = 0; b < 16; ++b) {
            sq += (out[b * 88 + u] - mean) * (out[b * 88 + u] - mean) / 16.0;
        }
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(sq, 1.0, 1e-3);
    }
}

TEST(StatEmbedding, EvalModeUsesRunningStatisticsAndIsPerRow) {
    Rng rng(4);
    StatEmbedding st("stat", 22, 4, StatTokens::PerFeature, rng);
    for (int i = 0; i < 20; ++i) {
        st.forward(random_tensor({8, 22}, rng));
    }
    st.mark_running_stats_ready();
    st.set_training(false);
    const Tensor batch = random_tensor({5, 22}, rng);
    const Tensor all = st.forward(batch);
    Tensor one = Tensor::matrix(1, 22);
    for (std::size_t j = 0; j < 22; ++j) {
        one[j] = batch.at(2, j);
    }
    const Tensor single = st.forward(one);
    for (std::size_t k = 0; k < 88; ++k) {
        EXPECT_EQ(single[k], all[2 * 88 + k]);
    }
}

TEST(StatEmbedding, PooledModeGivesOneToken) {
    Rng rng(5);
    StatEmbedding st("stat", 22, 6, StatTokens::Pooled, rng);
    EXPECT_EQ(st.tokens(), 1u);
    EXPECT_EQ(st.forward(random_tensor({4, 22}, rng)).shape(), (Shape{4, 1, 6}));
}

TEST(SelectiveScan, MatchesDirectRecurrence) {
    Rng rng(6);
    const std::size_t K = 6, N = 3, R = 2, T = 9;
    SelectiveScan scan("scan", K, N, R, rng);
    init_uniform(scan.a_log().value, 1.0, rng);
    init_uniform(scan.skip().value, 1.0, rng);
    const Tensor u = random_tensor({T, K}, rng);
    const Tensor y = scan.forward(u);

    const auto params = scan.parameters();
    ASSERT_EQ(params.size(), 7u);
    const Tensor& w_down = params[0]->value;   // [K x R]
    const Tensor& w_up = params[1]->value;     // [R x K]
    const Tensor& b_up = params[2]->value;     // [K]
    const Tensor& w_b = params[3]->value;      // [K x N]
    const Tensor& w_c = params[4]->value;      // [K x N]
    const Tensor& a_log = params[5]->value;
    const Tensor& d = params[6]->value;
    EXPECT_NE(params[5]->name.find("A_log"), std::string::npos);

    std::vector<double> h(K * N, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> low(R, 0.0), delta(K), bt(N, 0.0), ct(N, 0.0);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t k = 0; k < K; ++k) {
                low[r] += u.at(t, k) * w_down.at(k, r);
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            double z = b_up[k];
            for (std::size_t r = 0; r < R; ++r) {
                z += low[r] * w_up.at(r, k);
            }
            delta[k] = softplus_ref(z);
        }
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t k = 0; k < K; ++k) {
                bt[n] += u.at(t, k) * w_b.at(k, n);
                ct[n] += u.at(t, k) * w_c.at(k, n);
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            double out = d[k] * u.at(t, k);
            for (std::size_t n = 0; n < N; ++n) {
                const double a = -std::exp(a_log.at(k, n));
                EXPECT_LT(a, 0.0);
                auto& s = h[k * N + n];
                s = std::exp(delta[k] * a) * s + delta[k] * bt[n] * u.at(t, k);
                out += ct[n] * s;
            }
            EXPECT_NEAR(y.at(t, k), out, 1e-12) << "t=" << t << " k=" << k;
        }
    }
}

TEST(SelectiveScan, RecordOffGivesSameOutputAndForbidsBackward) {
    Rng rng(7);
    SelectiveScan scan("scan", 4, 3, 1, rng);
    const Tensor u = random_tensor({5, 4}, rng);
    const Tensor a = scan.forward(u);
    SelectiveScan fresh("scan", 4, 3, 1, rng);
    fresh.set_record(false);
    scan.set_record(false);
    EXPECT_EQ(scan.forward(u), a);
    EXPECT_THROW(fresh.backward(Tensor::matrix(5, 4)), ConfigError);
    EXPECT_THROW(scan.forward(Tensor::matrix(5, 3)), ShapeError);
}

TEST(SelectiveScan, GradientsAgreeWithMixedTolerance) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        SelectiveScan scan("scan", 8, 3, 1, rng);
        init_uniform(scan.a_log().value, 1.0, rng);
        WeightedProbe probe(scan, seed);
        EXPECT_TRUE(mixed_grad_check(probe, random_tensor({7, 8}, rng), 1e-5, 1e-7, 1e-5)) << "seed " << seed;
    }
}

TEST(MambaEncoder, StackGradientsAgreeWithMixedTolerance) {
    const ModelConfig cfg = gradcheck_config();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        MambaEncoder enc("enc", cfg, rng);
        WeightedProbe probe(enc, seed);
        EXPECT_TRUE(mixed_grad_check(probe, random_tensor({8, cfg.d_model}, rng), 1e-5, 1e-7, 1e-5)) << "seed " << seed;
    }
}

TEST(MambaEncoder, IsCausalAtFullPrecision) {
    const ModelConfig cfg = small_config();
    Rng rng(8);
    MambaEncoder enc("enc", cfg, rng);
    enc.set_record(false);
    std::uniform_int_distribution<std::size_t> pick(0, 23);
    for (int probe = 0; probe < 100; ++probe) {
        const Tensor x = random_tensor({24, cfg.d_model}, rng);
        const Tensor base = enc.forward(x);
        const std::size_t t = pick(rng);
        Tensor bumped = x;
        for (std::size_t j = 0; j < cfg.d_model; ++j) {
            bumped.at(t, j) += 0.5 + static_cast<double>(j);
        }
        const Tensor out = enc.forward(bumped);
        for (std::size_t s = 0; s < t; ++s) {
            for (std::size_t j = 0; j < cfg.d_model; ++j) {
                ASSERT_EQ(out.at(s, j), base.at(s, j)) << "probe " << probe << " t=" << t << " s=" << s;
            }
        }
        bool changed = false;
        for (std::size_t j = 0; j < cfg.d_model; ++j) {
            changed = changed || out.at(t, j) != base.at(t, j);
        }
        EXPECT_TRUE(changed);
    }
}

TEST(MambaEncoder, ResidualStackPreservesShape) {
    const ModelConfig cfg = small_config(16);
    Rng rng(9);
    MambaEncoder enc("enc", cfg, rng);
    EXPECT_EQ(enc.depth(), 2u);
    const Tensor out = enc.forward(random_tensor({3, 16}, rng));
    EXPECT_EQ(out.shape(), (Shape{3, 16}));
    EXPECT_TRUE(out.all_finite());
    EXPECT_THROW(enc.forward(random_tensor({3, 15}, rng)), ShapeError);
}

TEST(MambaItd, StepScoresAreCausalInTheSequences) {
    ModelConfig cfg = small_config();
    MambaItd model(cfg, 3);
    std::vector<FeaturizedSession> train;
    for (std::uint64_t i = 0; i < 8; ++i) {
        train.push_back(mitd::testing::random_session(6, i, static_cast<int>(i % 2)));
    }
    std::vector<std::vector<double>> rows;
    for (const auto& s : train) {
        rows.push_back(s.x);
    }
    model.set_standardizer(Standardizer::fit(rows));
    std::vector<const FeaturizedSession*> ptrs;
    for (const auto& s : train) {
        ptrs.push_back(&s);
    }
    model.run_batch(ptrs, 0.01, false);

    auto s = mitd::testing::random_session(12, 99);
    const auto base = model.predict(std::span<const FeaturizedSession>(&s, 1))[0].probs;
    for (std::size_t t = 0; t < 12; ++t) {
        auto bumped = s;
        bumped.s_b[t] = bumped.s_b[t] % 192 + 1;
        bumped.s_c[t] += 123.0;
        const auto p = model.predict(std::span<const FeaturizedSession>(&bumped, 1))[0].probs;
        for (std::size_t u = 0; u < t; ++u) {
            ASSERT_EQ(p[u], base[u]) << "t=" << t;
        }
    }
}
