#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "mitd/errors.hpp"
#include "mitd/gradcheck_suite.hpp"
#include "mitd/model_io.hpp"
#include "mitd/smote.hpp"
#include "mitd/training.hpp"
#include "test_util.hpp"

using namespace mitd;
using mitd::testing::random_session;

namespace {

std::vector<FeaturizedSession> labeled_corpus(std::size_t n, std::size_t anomalous, std::uint64_t seed) {
    std::vector<FeaturizedSession> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = random_session(3 + i % 5, seed * 1000 + i, 0);
        s.user_id = "U" + std::to_string(i % 7);
        s.day = 14613 + static_cast<std::int64_t>(i);
        if (i < anomalous) {
            s.labels.back() = 1;
            for (std::size_t f = 0; f < kStatDim; ++f) {
                s.x[f] += 50.0;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Standardizer fit_on(const std::vector<FeaturizedSession>& sessions) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : sessions) {
        rows.push_back(s.x);
    }
    return Standardizer::fit(rows);
}

Config tiny_config(std::size_t epochs) {
    Config c;
    c.model = gradcheck_config();
    c.train.epochs = epochs;
    c.train.batch_size = 8;
    return c;
}

/// Distance of v from the line through a and b, relative to |b - a|.
double off_line(const std::vector<double>& v, const std::vector<double>& a, const std::vector<double>& b) {
    double dd = 0.0, dv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dd += (b[i] - a[i]) * (b[i] - a[i]);
        dv += (v[i] - a[i]) * (b[i] - a[i]);
    }
    if (dd == 0.0) {
        double r = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            r = std::max(r, std::abs(v[i] - a[i]));
        }
        return r;
    }
    const double u = dv / dd;
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        r = std::max(r, std::abs(v[i] - (a[i] + u * (b[i] - a[i]))));
    }
    return r / std::sqrt(dd);
}

} // namespace

TEST(Smote, InterpolateEndpoints) {
    const std::vector<double> a{1.0, 2.0}, b{3.0, -2.0};
    EXPECT_EQ(smote_interpolate(a, b, 0.0), a);
    EXPECT_EQ(smote_interpolate(a, b, 1.0), b);
    EXPECT_EQ(smote_interpolate(a, b, 0.5), (std::vector<double>{2.0, 0.0}));
}

TEST(Smote, NearestNeighborsExcludeSelfAndBreakTiesByIndex) {
    const std::vector<std::vector<double>> rows{{0.0}, {1.0}, {-1.0}, {2.0}, {1.0}};
    EXPECT_EQ(nearest_neighbors(rows, 0, 2), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(nearest_neighbors(rows, 1, 3), (std::vector<std::size_t>{4, 0, 3}));
}

TEST(Smote, SyntheticVectorsAreCollinearWithParentsAndClassesBalance) {
    const auto train = labeled_corpus(60, 12, 1);
    const auto st = fit_on(train);
    const auto r = smote_oversample(train, 5, 9, st);
    EXPECT_FALSE(r.duplicated);
    EXPECT_FALSE(r.skipped);
    EXPECT_EQ(r.synthesized, 48u - 12u);
    ASSERT_EQ(r.sessions.size(), 60u + 36u);

    std::size_t pos = 0;
    for (const auto& s : r.sessions) {
        pos += s.anomalous();
    }
    EXPECT_EQ(pos, r.sessions.size() - pos);

    // Majority sessions are untouched and the originals keep their order.
    for (std::size_t i = 0; i < train.size(); ++i) {
        EXPECT_EQ(r.sessions[i].key(), train[i].key());
        EXPECT_EQ(r.sessions[i].x, train[i].x);
    }

    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].anomalous()) {
            minority.push_back(i);
        }
    }
    for (std::size_t k = train.size(); k < r.sessions.size(); ++k) {
        const auto& syn = r.sessions[k];
        EXPECT_TRUE(syn.anomalous());
        double best = INFINITY;
        for (auto s : minority) {
            if (train[s].s_b != syn.s_b || train[s].s_c != syn.s_c) {
                continue;
            }
            for (auto n : minority) {
                if (n != s) {
                    best = std::min(best, off_line(syn.x, train[s].x, train[n].x));
                }
            }
        }
        EXPECT_LE(best, 1e-9) << "synthetic " << k;
    }
}

TEST(Smote, FallsBackToDuplicationAndSkipsWithoutMinority) {
    auto train = labeled_corpus(20, 3, 2);
    const auto st = fit_on(train);
    auto r = smote_oversample(train, 5, 1, st);
    EXPECT_TRUE(r.duplicated);
    EXPECT_EQ(r.synthesized, 14u);
    for (std::size_t k = train.size(); k < r.sessions.size(); ++k) {
        bool copy = false;
        for (std::size_t i = 0; i < 3; ++i) {
            copy = copy || r.sessions[k].x == train[i].x;
        }
        EXPECT_TRUE(copy);
    }
    r = smote_oversample(labeled_corpus(20, 8, 2), 5, 1, st, SmoteMode::Duplicate);
    EXPECT_TRUE(r.duplicated);

    r = smote_oversample(labeled_corpus(20, 0, 3), 5, 1, st);
    EXPECT_TRUE(r.skipped);
    EXPECT_EQ(r.sessions.size(), 20u);

    r = smote_oversample(train, 5, 1, st, SmoteMode::Off);
    EXPECT_EQ(r.sessions.size(), train.size());
    EXPECT_EQ(r.synthesized, 0u);
}

TEST(Smote, IsDeterministicInTheSeed) {
    const auto train = labeled_corpus(40, 8, 4);
    const auto st = fit_on(train);
    const auto a = smote_oversample(train, 5, 3, st);
    const auto b = smote_oversample(train, 5, 3, st);
    const auto c = smote_oversample(train, 5, 4, st);
    ASSERT_EQ(a.sessions.size(), b.sessions.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.sessions.size(); ++i) {
        EXPECT_EQ(a.sessions[i].x, b.sessions[i].x);
        differs = differs || a.sessions[i].x != c.sessions[i].x;
    }
    EXPECT_TRUE(differs);
}

TEST(Split, PartitionsDeterministicallyAndKeepsOrder) {
    const auto all = labeled_corpus(37, 5, 5);
    const auto a = split_sessions(all, 0.8, 1);
    const auto b = split_sessions(all, 0.8, 1);
    EXPECT_EQ(a.train.size(), 30u);
    EXPECT_EQ(a.test.size(), 7u);
    std::set<std::string> keys;
    for (const auto* part : {&a.train, &a.test}) {
        std::size_t prev = 0;
        bool first = true;
        for (const auto& s : *part) {
            EXPECT_TRUE(keys.insert(s.key()).second) << "duplicate " << s.key();
            const auto pos = static_cast<std::size_t>(s.day - 14613);
            if (!first) {
                EXPECT_GT(pos, prev);
            }
            prev = pos;
            first = false;
        }
    }
    EXPECT_EQ(keys.size(), all.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        EXPECT_EQ(a.train[i].key(), b.train[i].key());
    }
}

TEST(Batches, CoverEveryIndexOnceWithoutSingletonTail) {
    for (std::size_t n : {1u, 2u, 31u, 32u, 33u, 65u, 100u}) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        const auto batches = make_batches(order, 32);
        std::size_t total = 0;
        std::vector<std::size_t> flat;
        for (const auto& b : batches) {
            total += b.size();
            flat.insert(flat.end(), b.begin(), b.end());
            if (n > 1) {
                EXPECT_GE(b.size(), 2u);
            }
        }
        EXPECT_EQ(total, n);
        EXPECT_EQ(flat, order);
    }
}

TEST(Adam, FirstStepMovesByLearningRateAgainstTheGradient) {
    Parameter p("p", Tensor::vector(3, 1.0));
    p.grad[0] = 4.0;
    p.grad[1] = -0.001;
    p.grad[2] = 0.0;
    Adam opt({&p}, 0.1, 0.9, 0.999, 1e-8);
    opt.step();
    EXPECT_NEAR(p.value[0], 0.9, 1e-8);
    EXPECT_NEAR(p.value[1], 1.1, 1e-5);
    EXPECT_EQ(p.value[2], 1.0);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, MinimizesAQuadratic) {
    Parameter p("p", Tensor::vector(2));
    p.value[0] = 3.0;
    p.value[1] = -2.0;
    Adam opt({&p}, 0.05, 0.9, 0.999, 1e-8);
    for (int i = 0; i < 2000; ++i) {
        p.grad[0] = 2.0 * (p.value[0] - 1.0);
        p.grad[1] = 20.0 * (p.value[1] + 0.5);
        opt.step();
    }
    EXPECT_NEAR(p.value[0], 1.0, 1e-3);
    EXPECT_NEAR(p.value[1], -0.5, 1e-3);
}

TEST(Training, RejectsDegenerateInputs) {
    EXPECT_THROW(train_model(labeled_corpus(9, 3, 6), tiny_config(1)), ConfigError);
    EXPECT_THROW(train_model(labeled_corpus(30, 0, 6), tiny_config(1)), ConfigError);
}

TEST(Training, PreprocessingSeesOnlyTheTrainingSplit) {
    const auto all = labeled_corpus(40, 10, 7);
    const auto cfg = tiny_config(1);
    std::set<std::string> train_keys;
    for (const auto& s : split_sessions(all, cfg.train.split, cfg.train.seed).train) {
        train_keys.insert(s.key());
    }
    std::size_t calls = 0;
    const auto result = train_model(all, cfg, [&](std::string_view stage, const FeaturizedSession& s) {
        ++calls;
        EXPECT_TRUE(train_keys.contains(s.key())) << stage << " saw held-out session " << s.key();
    });
    EXPECT_GT(calls, 0u);
    for (const auto& s : result.split.test) {
        EXPECT_FALSE(train_keys.contains(s.key()));
    }
}

TEST(Training, LossComposesAndRunsAreBitReproducible) {
    const auto all = labeled_corpus(40, 10, 8);
    const auto cfg = tiny_config(4);
    auto a = train_model(all, cfg);
    auto b = train_model(all, cfg);
    ASSERT_EQ(a.history.size(), 4u);
    for (const auto& e : a.history) {
        EXPECT_LE(e.composition_gap, 1e-12);
        EXPECT_NEAR(e.total, e.bce + cfg.train.lambda_gate * e.gate_reg, 1e-12);
        EXPECT_TRUE(std::isfinite(e.total));
    }
    EXPECT_EQ(encode_model_file(a.model.to_file("m")), encode_model_file(b.model.to_file("m")));
    EXPECT_LT(a.history.back().total, a.history.front().total);
}

TEST(Training, HistoryCsvHasHeaderAndOneRowPerEpoch) {
    mitd::testing::ScratchDir dir("history");
    write_history_csv(dir / "h.csv", {{1, 0.5, 0.2, 0.502, 0.0}, {2, 0.25, 0.1, 0.251, 0.0}});
    std::ifstream in(dir / "h.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "epoch,bce,l_g,total");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("1,0.5,", 0), 0u);
    std::size_t rows = 1;
    while (std::getline(in, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 2u);
}
