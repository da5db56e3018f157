#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mitd/config.hpp"
#include "mitd/ingest.hpp"

namespace mitd {

/// Behavior / device / time-segment index space. IDs are 1-based and span [1, 192].
struct EncodingSpace {
    static constexpr int kBehaviors = 24;
    static constexpr int kDevices = 4;
    static constexpr int kTimeSegments = 2;
    static constexpr int kMaxId = kBehaviors * kDevices * kTimeSegments;

    int work_start_hour = 8;
    int work_end_hour = 18;
    std::int64_t utc_offset_seconds = 0;
    std::vector<std::string> internal_domains{"dtaa.com"};

    static EncodingSpace from(const PreprocessConfig& cfg);
};

static_assert(EncodingSpace::kMaxId == 192);

/// Time segment: 1 = working hours, 2 = non-working hours.
enum class TimeSegment : int { Working = 1, NonWorking = 2 };

struct BehaviorTriple {
    int behavior = 0;   // B in [0, 23]
    int device = 0;     // D in [0, 3]
    int segment = 1;    // TS in {1, 2}

    friend bool operator==(const BehaviorTriple&, const BehaviorTriple&) = default;
};

/// Behavior code B. 0-1 logon/logoff, 2-3 connect/disconnect, 4-15 file {open, write} x
/// {zip, doc, pdf, exe, txt, jpg}, 16-19 email {I-I, I-E, E-I, E-E}, 20-23 web {cloud,
/// hacktivist, job, neutral}.
int behavior_code(const LogEvent& event, const EncodingSpace& space);
TimeSegment time_segment(std::int64_t timestamp, const EncodingSpace& space);

int encode_triple(const BehaviorTriple& t);
/// Inverse of encode_triple; throws InputError outside [1, 192].
BehaviorTriple decode_behavior(int id);
int encode_behavior(const LogEvent& event, const EncodingSpace& space);

/// EWMA-smoothed inter-event gaps; the first gap is measured from the session start
/// (the first timestamp), so it is zero. Negative gaps are clamped to zero and counted.
struct IntervalResult {
    std::vector<double> values;
    std::size_t clamped = 0;
};
IntervalResult interval_sequence(std::span<const std::int64_t> timestamps, double alpha);
IntervalResult interval_sequence(std::span<const double> timestamps, double alpha);

inline constexpr std::size_t kStatFactors = 11;
inline constexpr std::size_t kStatDim = 2 * kStatFactors;

/// Factor names in feature order; feature 2i is the count and 2i+1 the duration of factor i.
const std::array<const char*, kStatFactors>& stat_factor_names();

/// Raw (unstandardized) count/duration vector of length 22.
std::vector<double> statistical_features(const Session& session, const EncodingSpace& space);

/// Frozen per-dimension z-score transform.
class Standardizer {
public:
    static constexpr double kStdFloor = 1e-6;

    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> stddev);

    /// Fits on >= 2 rows of equal width; throws ConfigError otherwise.
    static Standardizer fit(const std::vector<std::vector<double>>& rows);

    std::vector<double> transform(std::span<const double> raw) const;
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return std_; }
    std::size_t dim() const { return mean_.size(); }

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

/// Model-ready view of one session. `x` holds the raw statistical vector; standardization
/// is fitted on the training split and applied inside the model.
struct FeaturizedSession {
    std::string user_id;
    std::int64_t day = 0;
    std::size_t chunk = 0;
    std::size_t first_step = 0;
    std::vector<int> s_b;
    std::vector<double> s_c;
    std::vector<double> x;
    std::vector<int> labels;

    std::size_t length() const { return s_b.size(); }
    bool anomalous() const;
    /// "user/day/chunk", unique within a corpus.
    std::string key() const;
    /// Throws InputError if the length/range invariants do not hold.
    void validate() const;
};

struct FeaturizeReport {
    std::size_t sessions = 0;
    std::size_t events = 0;
    std::size_t unknown_devices = 0;    // events coded as the Other device class
    std::size_t clamped_intervals = 0;  // negative gaps clamped to zero
};

FeaturizedSession featurize_session(const Session& session, const PreprocessConfig& cfg, FeaturizeReport* report = nullptr);
std::vector<FeaturizedSession> featurize_sessions(const std::vector<Session>& sessions, const PreprocessConfig& cfg,
                                                  FeaturizeReport* report = nullptr);

/// JSONL intermediate: one object per line with keys user, day, chunk, first_step, s_b, s_c, x, labels.
void write_sessions_jsonl(const std::filesystem::path& path, const std::vector<FeaturizedSession>& sessions);
std::vector<FeaturizedSession> read_sessions_jsonl(const std::filesystem::path& path);
std::string session_to_json_line(const FeaturizedSession& s);
FeaturizedSession session_from_json_line(const std::string& line);

} // namespace mitd
