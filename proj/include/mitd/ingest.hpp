#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

namespace mitd {

enum class Channel { Logon, Device, File, Email, Http };
enum class DeviceClass { Personal, Department, Supervisor, Other };

inline constexpr std::size_t kChannelCount = 5;
inline constexpr std::size_t kDeviceClassCount = 4;

std::string_view channel_name(Channel c);
/// File stem used for a channel's CSV ("logon", "device", ...).
std::string_view channel_file_stem(Channel c);
std::string_view csv_header(Channel c);

struct LogonDetail {
    bool logon = true;
};

struct DeviceDetail {
    bool connect = true;
};

struct FileDetail {
    std::string filename;
    std::string activity;   // raw token, e.g. "File Open"
    bool write = false;
};

struct EmailDetail {
    std::string to;         // ';'-separated recipients
    std::string from;
    std::string activity;   // "Send" or "View"
};

struct HttpDetail {
    std::string url;
    std::string category;   // raw token; mapped to a web subtype during encoding
};

using ActionDetail = std::variant<LogonDetail, DeviceDetail, FileDetail, EmailDetail, HttpDetail>;

struct LogEvent {
    std::string id;
    std::string user_id;
    std::int64_t timestamp = 0;   // epoch seconds
    Channel channel = Channel::Logon;
    std::string pc;
    ActionDetail detail;
    DeviceClass device = DeviceClass::Other;
    int label = 0;
};

/// One user-day, possibly one chunk of a longer day.
struct Session {
    std::string user_id;
    std::int64_t day = 0;        // days since 1970-01-01 in the configured timezone
    std::size_t chunk = 0;       // index of this chunk within the user-day
    std::size_t first_step = 0;  // position of events[0] within the user-day
    std::vector<LogEvent> events;

    std::vector<int> labels() const;
};

struct ParseIssue {
    std::size_t line = 0;
    std::string message;
};

struct ParseResult {
    std::vector<LogEvent> events;
    std::vector<ParseIssue> errors;
};

/// Parses "MM/DD/YYYY HH:MM:SS"; returns false on any grammar or calendar violation.
bool parse_timestamp(std::string_view text, std::int64_t& epoch_seconds);
std::string format_timestamp(std::int64_t epoch_seconds);
/// ISO date "YYYY-MM-DD" for a day index.
std::string format_day(std::int64_t day);
std::int64_t parse_day(std::string_view iso);

/// Maps a host name to its device class by prefix: PC- personal, DPT- department,
/// SUP- supervisor; anything else is Other.
DeviceClass classify_device(std::string_view pc);

/// Parses one channel CSV. Malformed rows land in `errors` with their 1-based line number.
/// Throws IoError if the file cannot be read and FormatError on a wrong header row.
ParseResult parse_channel_file(const std::filesystem::path& path, Channel channel);
ParseResult parse_channel_text(std::string_view text, Channel channel);

/// Serializes one event back to its channel's CSV row (no trailing newline).
std::string format_row(const LogEvent& event);
std::string format_channel_file(Channel channel, const std::vector<LogEvent>& events);

std::unordered_set<std::string> read_answer_file(const std::filesystem::path& path);
void apply_labels(std::vector<LogEvent>& events, const std::unordered_set<std::string>& malicious_ids);

/// Groups by (user, local day), orders by timestamp, and splits groups longer than t_max.
/// Output ordered by (user, day, chunk).
std::vector<Session> sessionize(std::vector<LogEvent> events, std::int64_t utc_offset_seconds, std::size_t t_max);

/// Local calendar day of a timestamp.
std::int64_t local_day(std::int64_t timestamp, std::int64_t utc_offset_seconds);
/// Local hour of day in [0, 24).
int local_hour(std::int64_t timestamp, std::int64_t utc_offset_seconds);

} // namespace mitd
