#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mitd/errors.hpp"
#include "mitd/featurize.hpp"
#include "test_util.hpp"

using namespace mitd;
using mitd::testing::make_event;

namespace {

constexpr std::int64_t kDay0 = 14613LL * 86400;

std::int64_t at(int hour, int minute = 0) { return kDay0 + hour * 3600 + minute * 60; }

} // namespace

TEST(Encoding, DecodeEncodeIsIdentityOverAllIds) {
    std::set<int> seen;
    for (int id = 1; id <= 192; ++id) {
        const auto t = decode_behavior(id);
        EXPECT_EQ(encode_triple(t), id);
        seen.insert(id);
    }
    EXPECT_EQ(seen.size(), 192u);
    for (int b = 0; b < 24; ++b) {
        for (int d = 0; d < 4; ++d) {
            for (int ts = 1; ts <= 2; ++ts) {
                const BehaviorTriple t{b, d, ts};
                EXPECT_EQ(decode_behavior(encode_triple(t)), t);
            }
        }
    }
}

TEST(Encoding, CategoryRangeEndpoints) {
    // Logon 1-16, device 17-32, file 33-128, email 129-160, web 161-192.
    EXPECT_EQ(encode_triple({0, 0, 1}), 1);
    EXPECT_EQ(encode_triple({1, 3, 2}), 16);
    EXPECT_EQ(encode_triple({2, 0, 1}), 17);
    EXPECT_EQ(encode_triple({3, 3, 2}), 32);
    EXPECT_EQ(encode_triple({4, 0, 1}), 33);
    EXPECT_EQ(encode_triple({15, 3, 2}), 128);
    EXPECT_EQ(encode_triple({16, 0, 1}), 129);
    EXPECT_EQ(encode_triple({19, 3, 2}), 160);
    EXPECT_EQ(encode_triple({20, 0, 1}), 161);
    EXPECT_EQ(encode_triple({23, 3, 2}), 192);
}

TEST(Encoding, OutOfRangeRejected) {
    EXPECT_THROW(decode_behavior(0), InputError);
    EXPECT_THROW(decode_behavior(193), InputError);
    EXPECT_THROW(encode_triple({24, 0, 1}), InputError);
    EXPECT_THROW(encode_triple({0, 4, 1}), InputError);
    EXPECT_THROW(encode_triple({0, 0, 0}), InputError);
}

TEST(Encoding, BehaviorCodesPerChannel) {
    const EncodingSpace space;
    EXPECT_EQ(behavior_code(make_event("U", at(9), Channel::Logon, "PC-1", LogonDetail{true}), space), 0);
    EXPECT_EQ(behavior_code(make_event("U", at(9), Channel::Logon, "PC-1", LogonDetail{false}), space), 1);
    EXPECT_EQ(behavior_code(make_event("U", at(9), Channel::Device, "PC-1", DeviceDetail{true}), space), 2);
    EXPECT_EQ(behavior_code(make_event("U", at(9), Channel::Device, "PC-1", DeviceDetail{false}), space), 3);
    const auto file = [&](const char* name, bool write) {
        return behavior_code(make_event("U", at(9), Channel::File, "PC-1", FileDetail{name, "", write}), space);
    };
    EXPECT_EQ(file("a.zip", false), 4);
    EXPECT_EQ(file("a.DOCX", false), 5);
    EXPECT_EQ(file("a.pdf", false), 6);
    EXPECT_EQ(file("a.exe", false), 7);
    EXPECT_EQ(file("a.txt", false), 8);
    EXPECT_EQ(file("a.jpg", false), 9);
    EXPECT_EQ(file("noext", false), 8);
    EXPECT_EQ(file("a.zip", true), 10);
    EXPECT_EQ(file("a.jpg", true), 15);
    const auto mail = [&](const char* to, const char* from) {
        return behavior_code(make_event("U", at(9), Channel::Email, "PC-1", EmailDetail{to, from, "Send"}), space);
    };
    EXPECT_EQ(mail("a@dtaa.com", "b@dtaa.com"), 16);
    EXPECT_EQ(mail("a@dtaa.com;x@gmail.com", "b@dtaa.com"), 17);
    EXPECT_EQ(mail("a@mail.dtaa.com", "x@gmail.com"), 18);
    EXPECT_EQ(mail("y@evil-dtaa.com", "x@gmail.com"), 19);
    const auto web = [&](const char* cat) {
        return behavior_code(make_event("U", at(9), Channel::Http, "PC-1", HttpDetail{"http://x", cat}), space);
    };
    EXPECT_EQ(web("cloud"), 20);
    EXPECT_EQ(web("hacktivist"), 21);
    EXPECT_EQ(web("Job"), 22);
    EXPECT_EQ(web("neutral"), 23);
    EXPECT_EQ(web("whatever"), 23);
}

TEST(Encoding, TimeSegmentBoundaries) {
    const EncodingSpace space;
    EXPECT_EQ(time_segment(at(7, 59), space), TimeSegment::NonWorking);
    EXPECT_EQ(time_segment(at(8), space), TimeSegment::Working);
    EXPECT_EQ(time_segment(at(17, 59), space), TimeSegment::Working);
    EXPECT_EQ(time_segment(at(18), space), TimeSegment::NonWorking);
    EncodingSpace shifted;
    shifted.utc_offset_seconds = -5 * 3600;
    EXPECT_EQ(time_segment(at(12), shifted), TimeSegment::NonWorking);
    EXPECT_EQ(time_segment(at(13), shifted), TimeSegment::Working);
    EXPECT_EQ(time_segment(at(23), shifted), TimeSegment::NonWorking);
}

TEST(Encoding, FullEventIdCombinesAllThreeDigits) {
    const EncodingSpace space;
    const auto e = make_event("U", at(20), Channel::Device, "SUP-01", DeviceDetail{false});
    EXPECT_EQ(encode_behavior(e, space), 3 * 8 + 2 * 2 + 2);
}

TEST(Ewma, AlphaOneReproducesRawGaps) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> gap(0, 5000);
    std::vector<std::int64_t> ts{1000};
    for (int i = 0; i < 200; ++i) {
        ts.push_back(ts.back() + gap(rng));
    }
    const auto r = interval_sequence(std::span<const std::int64_t>(ts), 1.0);
    ASSERT_EQ(r.values.size(), ts.size());
    EXPECT_EQ(r.values[0], 0.0);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        EXPECT_EQ(r.values[i], static_cast<double>(ts[i] - ts[i - 1]));
    }
}

TEST(Ewma, ConstantGapMatchesClosedForm) {
    for (double d : {1.0, 60.0, 3600.0, 12345.0}) {
        std::vector<double> ts;
        for (int i = 0; i <= 100; ++i) {
            ts.push_back(i * d);
        }
        const auto r = interval_sequence(std::span<const double>(ts), 0.2);
        // With the first gap zero, step t >= 1 has seen t gaps of size d.
        for (std::size_t t = 1; t < ts.size(); ++t) {
            const double closed = d * (1.0 - std::pow(0.8, static_cast<double>(t)));
            EXPECT_NEAR(r.values[t], closed, 1e-12 * std::max(1.0, d)) << "d=" << d << " t=" << t;
        }
    }
}

TEST(Ewma, NegativeGapsClampAndCount) {
    const std::vector<std::int64_t> ts{100, 50, 80};
    const auto r = interval_sequence(std::span<const std::int64_t>(ts), 0.5);
    EXPECT_EQ(r.clamped, 1u);
    EXPECT_EQ(r.values[1], 0.0);
    EXPECT_DOUBLE_EQ(r.values[2], 15.0);
    EXPECT_THROW(interval_sequence(std::span<const std::int64_t>(ts), 0.0), ConfigError);
    EXPECT_THROW(interval_sequence(std::span<const std::int64_t>(ts), 1.5), ConfigError);
}

TEST(Ewma, OutputIsBoundedByMaxGapProperty) {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<std::int64_t> gap(0, 10000);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::int64_t> ts{0};
        std::int64_t max_gap = 0;
        for (int i = 0; i < 60; ++i) {
            const auto g = gap(rng);
            max_gap = std::max(max_gap, g);
            ts.push_back(ts.back() + g);
        }
        for (double v : interval_sequence(std::span<const std::int64_t>(ts), 0.2).values) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, static_cast<double>(max_gap));
        }
    }
}

TEST(StatFeatures, CountsAndDurationsPerFactor) {
    Session s;
    s.user_id = "U";
    s.day = 14613;
    s.events = {
        make_event("U", at(8), Channel::Logon, "PC-1", LogonDetail{true}),
        make_event("U", at(9), Channel::Http, "PC-1", HttpDetail{"u", "neutral"}),
        make_event("U", at(10), Channel::Http, "DPT-1", HttpDetail{"u", "neutral"}),
        make_event("U", at(20), Channel::File, "LAB-9", FileDetail{"a.zip", "File Write", true}),
    };
    const auto x = statistical_features(s, EncodingSpace{});
    ASSERT_EQ(x.size(), kStatDim);
    const auto count = [&](std::size_t f) { return x[2 * f]; };
    const auto dur = [&](std::size_t f) { return x[2 * f + 1]; };
    EXPECT_EQ(count(0), 1.0);
    EXPECT_EQ(dur(0), 0.0);
    EXPECT_EQ(count(4), 2.0);
    EXPECT_EQ(dur(4), 3600.0);
    EXPECT_EQ(count(2), 1.0);
    EXPECT_EQ(count(5), 2.0);
    EXPECT_EQ(dur(5), 3600.0);
    EXPECT_EQ(count(6), 1.0);
    EXPECT_EQ(count(8), 1.0);
    EXPECT_EQ(count(9), 3.0);
    EXPECT_EQ(dur(9), 7200.0);
    EXPECT_EQ(count(10), 1.0);
    // Channel, device and segment factors each partition the events.
    EXPECT_EQ(count(0) + count(1) + count(2) + count(3) + count(4), 4.0);
    EXPECT_EQ(count(5) + count(6) + count(7) + count(8), 4.0);
    EXPECT_EQ(count(9) + count(10), 4.0);
}

TEST(Standardizer, FitTransformHasZeroMeanUnitVariance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(10.0, 3.0);
    std::vector<std::vector<double>> rows(200, std::vector<double>(4));
    for (auto& r : rows) {
        for (std::size_t j = 0; j < 3; ++j) {
            r[j] = n(rng) * static_cast<double>(j + 1);
        }
        r[3] = 7.0;
    }
    const auto st = Standardizer::fit(rows);
    std::vector<double> mean(4, 0.0), sq(4, 0.0);
    for (const auto& r : rows) {
        const auto z = st.transform(r);
        for (std::size_t j = 0; j < 4; ++j) {
            mean[j] += z[j] / 200.0;
            sq[j] += z[j] * z[j] / 200.0;
        }
    }
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(mean[j], 0.0, 1e-12);
        EXPECT_NEAR(sq[j], 1.0, 1e-12);
    }
    // Constant columns hit the floor and map to zero instead of dividing by zero.
    EXPECT_EQ(st.stddev()[3], Standardizer::kStdFloor);
    EXPECT_EQ(st.transform(rows[0])[3], 0.0);
    EXPECT_THROW(Standardizer::fit({{1.0}}), ConfigError);
    EXPECT_THROW(st.transform(std::vector<double>{1.0}), InputError);
}

TEST(FeaturizedSession, JsonlRoundTripIsExact) {
    mitd::testing::ScratchDir dir("jsonl");
    std::vector<FeaturizedSession> in;
    for (std::uint64_t i = 0; i < 20; ++i) {
        auto s = mitd::testing::random_session(1 + i, i, static_cast<int>(i % 2));
        s.s_c.back() = 1.0 / 3.0 + static_cast<double>(i) * 1e-13;
        s.chunk = i % 3;
        s.first_step = i;
        in.push_back(std::move(s));
    }
    write_sessions_jsonl(dir / "s.jsonl", in);
    const auto out = read_sessions_jsonl(dir / "s.jsonl");
    ASSERT_EQ(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        EXPECT_EQ(out[i].key(), in[i].key());
        EXPECT_EQ(out[i].first_step, in[i].first_step);
        EXPECT_EQ(out[i].s_b, in[i].s_b);
        EXPECT_EQ(out[i].s_c, in[i].s_c);
        EXPECT_EQ(out[i].x, in[i].x);
        EXPECT_EQ(out[i].labels, in[i].labels);
    }
}

TEST(FeaturizedSession, ValidateRejectsBrokenRecords) {
    auto good = mitd::testing::random_session(4, 1);
    EXPECT_NO_THROW(good.validate());
    auto bad = good;
    bad.s_b[0] = 0;
    EXPECT_THROW(bad.validate(), InputError);
    bad = good;
    bad.s_c[1] = -1.0;
    EXPECT_THROW(bad.validate(), InputError);
    bad = good;
    bad.labels.pop_back();
    EXPECT_THROW(bad.validate(), InputError);
    bad = good;
    bad.x.resize(21);
    EXPECT_THROW(bad.validate(), InputError);
    bad = good;
    bad.labels[0] = 2;
    EXPECT_THROW(bad.validate(), InputError);
    EXPECT_THROW(session_from_json_line("{\"user\":\"u\"}"), FormatError);
    EXPECT_THROW(session_from_json_line("not json"), FormatError);
}

TEST(FeaturizeSession, EndToEndFromEvents) {
    Session s;
    s.user_id = "U";
    s.day = 14613;
    s.events = {make_event("U", at(8), Channel::Logon, "PC-1", LogonDetail{true}),
                make_event("U", at(8, 10), Channel::Device, "PC-1", DeviceDetail{true}),
                make_event("U", at(19), Channel::Logon, "LAB-2", LogonDetail{false})};
    s.events[2].label = 1;
    FeaturizeReport rep;
    const auto f = featurize_session(s, PreprocessConfig{}, &rep);
    EXPECT_NO_THROW(f.validate());
    EXPECT_EQ(f.s_b, (std::vector<int>{1, 17, 1 * 8 + 3 * 2 + 2}));
    EXPECT_EQ(f.labels, (std::vector<int>{0, 0, 1}));
    EXPECT_EQ(f.s_c[0], 0.0);
    EXPECT_DOUBLE_EQ(f.s_c[1], 0.2 * 600.0);
    EXPECT_EQ(rep.unknown_devices, 1u);
    EXPECT_TRUE(f.anomalous());
    EXPECT_THROW(featurize_session(Session{}, PreprocessConfig{}), InputError);
}
