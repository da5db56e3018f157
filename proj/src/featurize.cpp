#include "mitd/featurize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

int file_extension_index(std::string_view filename) {
    const auto dot = filename.rfind('.');
    const std::string ext = dot == std::string_view::npos ? std::string{} : lower(filename.substr(dot + 1));
    if (ext == "zip") return 0;
    if (ext == "doc" || ext == "docx") return 1;
    if (ext == "pdf") return 2;
    if (ext == "exe") return 3;
    if (ext == "txt") return 4;
    if (ext == "jpg" || ext == "jpeg") return 5;
    return 4;  // unknown extensions fall back to txt
}

bool is_internal(std::string_view address, const std::vector<std::string>& domains) {
    const auto at = address.rfind('@');
    const std::string domain = lower(at == std::string_view::npos ? address : address.substr(at + 1));
    for (const auto& d : domains) {
        const std::string ld = lower(d);
        if (domain == ld || (domain.size() > ld.size() && domain.ends_with(ld) &&
                             domain[domain.size() - ld.size() - 1] == '.')) {
            return true;
        }
    }
    return false;
}

int web_category_index(std::string_view category) {
    const std::string c = lower(category);
    if (c == "cloud") return 0;
    if (c == "hacktivist") return 1;
    if (c == "job") return 2;
    return 3;  // neutral and anything unrecognized
}

int channel_factor(Channel c) {
    return static_cast<int>(c);
}

} // namespace

EncodingSpace EncodingSpace::from(const PreprocessConfig& cfg) {
    EncodingSpace s;
    s.work_start_hour = cfg.work_start_hour;
    s.work_end_hour = cfg.work_end_hour;
    s.utc_offset_seconds = cfg.utc_offset_seconds;
    s.internal_domains = cfg.internal_domains;
    return s;
}

int behavior_code(const LogEvent& event, const EncodingSpace& space) {
    return std::visit(
        [&space](const auto& d) -> int {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, LogonDetail>) {
                return d.logon ? 0 : 1;
            } else if constexpr (std::is_same_v<T, DeviceDetail>) {
                return d.connect ? 2 : 3;
            } else if constexpr (std::is_same_v<T, FileDetail>) {
                return 4 + (d.write ? 6 : 0) + file_extension_index(d.filename);
            } else if constexpr (std::is_same_v<T, EmailDetail>) {
                const bool sender_internal = is_internal(d.from, space.internal_domains);
                bool all_recipients_internal = true;
                std::string_view to = d.to;
                while (!to.empty()) {
                    const auto semi = to.find(';');
                    const auto addr = to.substr(0, semi);
                    if (!addr.empty()) {
                        all_recipients_internal = all_recipients_internal && is_internal(addr, space.internal_domains);
                    }
                    to = semi == std::string_view::npos ? std::string_view{} : to.substr(semi + 1);
                }
                return 16 + (sender_internal ? 0 : 2) + (all_recipients_internal ? 0 : 1);
            } else {
                return 20 + web_category_index(d.category);
            }
        },
        event.detail);
}

TimeSegment time_segment(std::int64_t timestamp, const EncodingSpace& space) {
    const int h = local_hour(timestamp, space.utc_offset_seconds);
    return (h >= space.work_start_hour && h < space.work_end_hour) ? TimeSegment::Working : TimeSegment::NonWorking;
}

int encode_triple(const BehaviorTriple& t) {
    if (t.behavior < 0 || t.behavior >= EncodingSpace::kBehaviors || t.device < 0 ||
        t.device >= EncodingSpace::kDevices || t.segment < 1 || t.segment > EncodingSpace::kTimeSegments) {
        throw InputError("behavior triple out of range");
    }
    constexpr int per_behavior = EncodingSpace::kDevices * EncodingSpace::kTimeSegments;
    return t.behavior * per_behavior + t.device * EncodingSpace::kTimeSegments + t.segment;
}

BehaviorTriple decode_behavior(int id) {
    if (id < 1 || id > EncodingSpace::kMaxId) {
        throw InputError("behavior id " + std::to_string(id) + " outside [1, 192]");
    }
    // TS is 1-based, so shift down by one before peeling off the mixed-radix digits.
    const int z = id - 1;
    BehaviorTriple t;
    t.segment = z % EncodingSpace::kTimeSegments + 1;
    t.device = (z / EncodingSpace::kTimeSegments) % EncodingSpace::kDevices;
    t.behavior = z / (EncodingSpace::kTimeSegments * EncodingSpace::kDevices);
    return t;
}

int encode_behavior(const LogEvent& event, const EncodingSpace& space) {
    return encode_triple({behavior_code(event, space), static_cast<int>(event.device),
                          static_cast<int>(time_segment(event.timestamp, space))});
}

namespace {

template <typename T>
IntervalResult ewma_intervals(std::span<const T> ts, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("interval_sequence: alpha must be in (0, 1]");
    }
    IntervalResult r;
    r.values.reserve(ts.size());
    double c = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double dt = i == 0 ? 0.0 : static_cast<double>(ts[i] - ts[i - 1]);
        if (dt < 0.0) {
            dt = 0.0;
            ++r.clamped;
        }
        c = alpha * dt + (1.0 - alpha) * c;
        r.values.push_back(c);
    }
    return r;
}

} // namespace

IntervalResult interval_sequence(std::span<const std::int64_t> timestamps, double alpha) {
    return ewma_intervals(timestamps, alpha);
}

IntervalResult interval_sequence(std::span<const double> timestamps, double alpha) {
    return ewma_intervals(timestamps, alpha);
}

const std::array<const char*, kStatFactors>& stat_factor_names() {
    static const std::array<const char*, kStatFactors> names{
        "logon_logoff", "connect_disconnect", "file", "email", "web",
        "personal",     "department",         "supervisor", "other",
        "working_hours", "non_working_hours"};
    return names;
}

std::vector<double> statistical_features(const Session& session, const EncodingSpace& space) {
    std::array<std::size_t, kStatFactors> count{};
    std::array<std::int64_t, kStatFactors> first{};
    std::array<std::int64_t, kStatFactors> last{};
    const auto hit = [&](std::size_t f, std::int64_t ts) {
        if (count[f] == 0) {
            first[f] = ts;
        }
        first[f] = std::min(first[f], ts);
        last[f] = count[f] == 0 ? ts : std::max(last[f], ts);
        ++count[f];
    };
    for (const auto& e : session.events) {
        hit(static_cast<std::size_t>(channel_factor(e.channel)), e.timestamp);
        hit(5 + static_cast<std::size_t>(e.device), e.timestamp);
        hit(time_segment(e.timestamp, space) == TimeSegment::Working ? 9 : 10, e.timestamp);
    }
    std::vector<double> out(kStatDim, 0.0);
    for (std::size_t f = 0; f < kStatFactors; ++f) {
        out[2 * f] = static_cast<double>(count[f]);
        out[2 * f + 1] = count[f] < 2 ? 0.0 : static_cast<double>(last[f] - first[f]);
    }
    return out;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
    if (mean_.size() != std_.size()) {
        throw ConfigError("standardizer: mean/std width mismatch");
    }
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2) {
        throw ConfigError("standardize: need at least 2 training vectors");
    }
    const std::size_t dim = rows.front().size();
    std::vector<double> mean(dim, 0.0);
    std::vector<double> sd(dim, 0.0);
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw ConfigError("standardize: ragged training vectors");
        }
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] += r[j];
        }
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& m : mean) {
        m /= n;
    }
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = r[j] - mean[j];
            sd[j] += d * d;
        }
    }
    for (auto& s : sd) {
        s = std::max(std::sqrt(s / n), kStdFloor);
    }
    return Standardizer(std::move(mean), std::move(sd));
}

std::vector<double> Standardizer::transform(std::span<const double> raw) const {
    if (raw.size() != mean_.size()) {
        throw InputError("standardize: expected width " + std::to_string(mean_.size()) + ", got " +
                         std::to_string(raw.size()));
    }
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) {
        out[j] = (raw[j] - mean_[j]) / std_[j];
    }
    return out;
}

bool FeaturizedSession::anomalous() const {
    return std::any_of(labels.begin(), labels.end(), [](int y) { return y != 0; });
}

std::string FeaturizedSession::key() const {
    return user_id + '/' + format_day(day) + '/' + std::to_string(chunk);
}

void FeaturizedSession::validate() const {
    const auto t = s_b.size();
    if (t == 0 || s_c.size() != t || labels.size() != t) {
        throw InputError("session " + key() + ": s_b, s_c and labels must share a non-zero length");
    }
    if (x.size() != kStatDim) {
        throw InputError("session " + key() + ": statistical vector must have 22 entries");
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (s_b[i] < 1 || s_b[i] > EncodingSpace::kMaxId) {
            throw InputError("session " + key() + ": behavior id out of [1, 192]");
        }
        if (!(s_c[i] >= 0.0) || !std::isfinite(s_c[i])) {
            throw InputError("session " + key() + ": interval must be finite and non-negative");
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw InputError("session " + key() + ": labels must be binary");
        }
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw InputError("session " + key() + ": non-finite statistical feature");
        }
    }
}

FeaturizedSession featurize_session(const Session& session, const PreprocessConfig& cfg, FeaturizeReport* report) {
    if (session.events.empty()) {
        throw InputError("featurize: empty session");
    }
    const auto space = EncodingSpace::from(cfg);
    FeaturizedSession out;
    out.user_id = session.user_id;
    out.day = session.day;
    out.chunk = session.chunk;
    out.first_step = session.first_step;
    std::vector<std::int64_t> ts;
    ts.reserve(session.events.size());
    for (const auto& e : session.events) {
        out.s_b.push_back(encode_behavior(e, space));
        out.labels.push_back(e.label);
        ts.push_back(e.timestamp);
    }
    auto intervals = interval_sequence(std::span<const std::int64_t>(ts), cfg.alpha);
    out.s_c = std::move(intervals.values);
    out.x = statistical_features(session, space);
    if (report != nullptr) {
        ++report->sessions;
        report->events += session.events.size();
        report->clamped_intervals += intervals.clamped;
        report->unknown_devices += static_cast<std::size_t>(std::count_if(
            session.events.begin(), session.events.end(), [](const LogEvent& e) { return e.device == DeviceClass::Other; }));
    }
    return out;
}

std::vector<FeaturizedSession> featurize_sessions(const std::vector<Session>& sessions, const PreprocessConfig& cfg,
                                                  FeaturizeReport* report) {
    std::vector<FeaturizedSession> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions) {
        out.push_back(featurize_session(s, cfg, report));
    }
    return out;
}

std::string session_to_json_line(const FeaturizedSession& s) {
    const nlohmann::json j{{"user", s.user_id}, {"day", format_day(s.day)}, {"chunk", s.chunk},
                           {"first_step", s.first_step}, {"s_b", s.s_b}, {"s_c", s.s_c},
                           {"x", s.x}, {"labels", s.labels}};
    return j.dump();
}

FeaturizedSession session_from_json_line(const std::string& line) {
    FeaturizedSession s;
    try {
        const auto j = nlohmann::json::parse(line);
        s.user_id = j.at("user").get<std::string>();
        s.day = parse_day(j.at("day").get<std::string>());
        s.chunk = j.at("chunk").get<std::size_t>();
        s.first_step = j.value("first_step", std::size_t{0});
        s.s_b = j.at("s_b").get<std::vector<int>>();
        s.s_c = j.at("s_c").get<std::vector<double>>();
        s.x = j.at("x").get<std::vector<double>>();
        s.labels = j.at("labels").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("session record: ") + e.what());
    }
    s.validate();
    return s;
}

void write_sessions_jsonl(const std::filesystem::path& path, const std::vector<FeaturizedSession>& sessions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& s : sessions) {
        out << session_to_json_line(s) << '\n';
    }
    if (!out) {
        throw IoError("error writing " + path.string());
    }
}

std::vector<FeaturizedSession> read_sessions_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::vector<FeaturizedSession> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(session_from_json_line(line));
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace mitd
