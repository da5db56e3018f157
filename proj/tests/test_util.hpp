#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mitd/featurize.hpp"
#include "mitd/ingest.hpp"

namespace mitd::testing {

/// Random session of length T with IDs in [1, 192], non-negative intervals and counts.
inline FeaturizedSession random_session(std::size_t T, std::uint64_t seed, int label = 0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> id(1, 192);
    std::uniform_real_distribution<double> gap(0.0, 900.0);
    std::uniform_int_distribution<int> count(0, 12);
    FeaturizedSession s;
    s.user_id = "USR" + std::to_string(seed % 1000);
    s.day = 14613 + static_cast<std::int64_t>(seed % 30);
    for (std::size_t t = 0; t < T; ++t) {
        s.s_b.push_back(id(rng));
        s.s_c.push_back(t == 0 ? 0.0 : gap(rng));
        s.labels.push_back(label);
    }
    for (std::size_t f = 0; f < kStatDim; ++f) {
        s.x.push_back(f % 2 == 0 ? count(rng) : gap(rng) * 10.0);
    }
    return s;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("mitd_" + tag + "_" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline LogEvent make_event(std::string user, std::int64_t ts, Channel ch, std::string pc, ActionDetail detail) {
    LogEvent e;
    e.id = "{" + user + "-" + std::to_string(ts) + "}";
    e.user_id = std::move(user);
    e.timestamp = ts;
    e.channel = ch;
    e.device = classify_device(pc);
    e.pc = std::move(pc);
    e.detail = std::move(detail);
    return e;
}

} // namespace mitd::testing
