#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mitd/featurize.hpp"
#include "mitd/ingest.hpp"

namespace mitd {

enum class Pattern { OffHoursBurst, DeviceHopping, ExfilEmail };

std::string_view pattern_name(Pattern p);
Pattern parse_pattern(std::string_view name);

struct ScenarioSpec {
    std::size_t n_users = 20;
    std::size_t days = 30;                 // calendar days; weekends carry no activity
    std::size_t min_events = 4;            // benign events per user per working day
    std::size_t max_events = 10;
    double anomaly_fraction = 0.1;         // share of users with planted activity, in [0, 0.5]
    double planted_day_rate = 0.6;         // chance an anomalous user acts out on a working day
    std::vector<Pattern> patterns{Pattern::OffHoursBurst, Pattern::DeviceHopping, Pattern::ExfilEmail};
    std::uint64_t seed = 7;
    std::int64_t start_day = 14613;        // 2010-01-04, a Monday

    void validate() const;
};

struct Corpus {
    std::vector<LogEvent> events;          // all channels, ordered by (timestamp, user, generation order)
    std::vector<std::string> malicious_ids;
    std::vector<std::string> anomalous_users;
};

/// Deterministic for a given scenario: each user draws from its own stream derived from the seed.
Corpus generate_corpus(const ScenarioSpec& spec);

/// Writes logon/device/file/email/http CSVs and answers.txt.
void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir);

struct SeparationCheck {
    bool applicable = false;               // both classes present
    bool passed = false;
    std::size_t best_feature = 0;
    double best_gap_sd = 0.0;              // |mean_anom - mean_benign| / sd over all sessions
};

/// Checks that sessions with planted events stand out on at least one raw statistical
/// feature by `min_sd` standard deviations.
SeparationCheck separation_check(const std::vector<FeaturizedSession>& sessions, double min_sd = 2.0);

struct GenerateReport {
    std::size_t events = 0;
    std::size_t malicious = 0;
    SeparationCheck separation;
};

GenerateReport generate(const ScenarioSpec& spec, const std::filesystem::path& out_dir);

} // namespace mitd
