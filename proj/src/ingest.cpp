#include "mitd/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

using namespace std::chrono;

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_uint(std::string_view s, int& out) {
    if (s.empty()) {
        return false;
    }
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::size_t field_count(Channel c) {
    switch (c) {
    case Channel::Logon:
    case Channel::Device:
        return 5;
    case Channel::File:
    case Channel::Http:
        return 6;
    case Channel::Email:
        return 7;
    }
    return 0;
}

// Parses the channel-specific columns (index 4 onward). Returns an error message or empty.
std::string parse_detail(Channel channel, const std::vector<std::string_view>& f, ActionDetail& out) {
    switch (channel) {
    case Channel::Logon:
        if (f[4] == "Logon") {
            out = LogonDetail{true};
        } else if (f[4] == "Logoff") {
            out = LogonDetail{false};
        } else {
            return "unknown logon activity '" + std::string(f[4]) + "'";
        }
        return {};
    case Channel::Device:
        if (f[4] == "Connect") {
            out = DeviceDetail{true};
        } else if (f[4] == "Disconnect") {
            out = DeviceDetail{false};
        } else {
            return "unknown device activity '" + std::string(f[4]) + "'";
        }
        return {};
    case Channel::File: {
        FileDetail d{std::string(f[4]), std::string(f[5]), false};
        if (f[5] == "File Open") {
            d.write = false;
        } else if (f[5] == "File Write" || f[5] == "File Copy" || f[5] == "File Delete") {
            d.write = true;
        } else {
            return "unknown file activity '" + std::string(f[5]) + "'";
        }
        out = std::move(d);
        return {};
    }
    case Channel::Email:
        if (f[6] != "Send" && f[6] != "View") {
            return "unknown email activity '" + std::string(f[6]) + "'";
        }
        if (f[4].empty() || f[5].empty()) {
            return "email row without sender or recipient";
        }
        out = EmailDetail{std::string(f[4]), std::string(f[5]), std::string(f[6])};
        return {};
    case Channel::Http:
        out = HttpDetail{std::string(f[4]), std::string(f[5])};
        return {};
    }
    return "unknown channel";
}

} // namespace

std::string_view channel_name(Channel c) {
    switch (c) {
    case Channel::Logon: return "Logon";
    case Channel::Device: return "Device";
    case Channel::File: return "File";
    case Channel::Email: return "Email";
    case Channel::Http: return "Http";
    }
    return "?";
}

std::string_view channel_file_stem(Channel c) {
    switch (c) {
    case Channel::Logon: return "logon";
    case Channel::Device: return "device";
    case Channel::File: return "file";
    case Channel::Email: return "email";
    case Channel::Http: return "http";
    }
    return "?";
}

std::string_view csv_header(Channel c) {
    switch (c) {
    case Channel::Logon: return "id,date,user,pc,activity";
    case Channel::Device: return "id,date,user,pc,activity";
    case Channel::File: return "id,date,user,pc,filename,activity";
    case Channel::Email: return "id,date,user,pc,to,from,activity";
    case Channel::Http: return "id,date,user,pc,url,category";
    }
    return "";
}

std::vector<int> Session::labels() const {
    std::vector<int> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        out.push_back(e.label);
    }
    return out;
}

bool parse_timestamp(std::string_view text, std::int64_t& epoch_seconds) {
    // MM/DD/YYYY HH:MM:SS
    if (text.size() != 19 || text[2] != '/' || text[5] != '/' || text[10] != ' ' || text[13] != ':' ||
        text[16] != ':') {
        return false;
    }
    int mo = 0, d = 0, y = 0, hh = 0, mm = 0, ss = 0;
    if (!parse_uint(text.substr(0, 2), mo) || !parse_uint(text.substr(3, 2), d) ||
        !parse_uint(text.substr(6, 4), y) || !parse_uint(text.substr(11, 2), hh) ||
        !parse_uint(text.substr(14, 2), mm) || !parse_uint(text.substr(17, 2), ss)) {
        return false;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
        return false;
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    epoch_seconds = static_cast<std::int64_t>(days) * kSecondsPerDay + hh * 3600 + mm * 60 + ss;
    return epoch_seconds > 0;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
    const std::int64_t days = floor_div(epoch_seconds, kSecondsPerDay);
    const std::int64_t rem = epoch_seconds - days * kSecondsPerDay;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d %02lld:%02lld:%02lld", static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()), static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

std::string format_day(std::int64_t day) {
    const year_month_day ymd{sys_days{std::chrono::days{day}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::int64_t parse_day(std::string_view iso) {
    int y = 0, m = 0, d = 0;
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !parse_uint(iso.substr(0, 4), y) ||
        !parse_uint(iso.substr(5, 2), m) || !parse_uint(iso.substr(8, 2), d)) {
        throw FormatError("bad ISO date '" + std::string(iso) + "'");
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw FormatError("bad ISO date '" + std::string(iso) + "'");
    }
    return sys_days{ymd}.time_since_epoch().count();
}

DeviceClass classify_device(std::string_view pc) {
    if (pc.starts_with("PC-")) return DeviceClass::Personal;
    if (pc.starts_with("DPT-")) return DeviceClass::Department;
    if (pc.starts_with("SUP-")) return DeviceClass::Supervisor;
    return DeviceClass::Other;
}

ParseResult parse_channel_text(std::string_view text, Channel channel) {
    ParseResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!header_seen) {
            if (line != csv_header(channel)) {
                throw FormatError(std::string(channel_file_stem(channel)) + ".csv: expected header '" +
                                  std::string(csv_header(channel)) + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != field_count(channel)) {
            result.errors.push_back({line_no, "expected " + std::to_string(field_count(channel)) + " fields, got " +
                                                  std::to_string(fields.size())});
            continue;
        }
        LogEvent ev;
        ev.id = std::string(fields[0]);
        if (!parse_timestamp(fields[1], ev.timestamp)) {
            result.errors.push_back({line_no, "malformed timestamp '" + std::string(fields[1]) + "'"});
            continue;
        }
        ev.user_id = std::string(fields[2]);
        ev.pc = std::string(fields[3]);
        if (ev.id.empty() || ev.user_id.empty()) {
            result.errors.push_back({line_no, "empty id or user"});
            continue;
        }
        if (auto msg = parse_detail(channel, fields, ev.detail); !msg.empty()) {
            result.errors.push_back({line_no, std::move(msg)});
            continue;
        }
        ev.channel = channel;
        ev.device = classify_device(ev.pc);
        result.events.push_back(std::move(ev));
    }
    return result;
}

ParseResult parse_channel_file(const std::filesystem::path& path, Channel channel) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("error reading " + path.string());
    }
    const std::string text = ss.str();
    if (text.empty()) {
        return {};
    }
    return parse_channel_text(text, channel);
}

std::string format_row(const LogEvent& event) {
    std::string row = event.id + ',' + format_timestamp(event.timestamp) + ',' + event.user_id + ',' + event.pc + ',';
    std::visit(
        [&row](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, LogonDetail>) {
                row += d.logon ? "Logon" : "Logoff";
            } else if constexpr (std::is_same_v<T, DeviceDetail>) {
                row += d.connect ? "Connect" : "Disconnect";
            } else if constexpr (std::is_same_v<T, FileDetail>) {
                row += d.filename + ',' + d.activity;
            } else if constexpr (std::is_same_v<T, EmailDetail>) {
                row += d.to + ',' + d.from + ',' + d.activity;
            } else {
                row += d.url + ',' + d.category;
            }
        },
        event.detail);
    return row;
}

std::string format_channel_file(Channel channel, const std::vector<LogEvent>& events) {
    std::string out(csv_header(channel));
    out += '\n';
    for (const auto& e : events) {
        out += format_row(e);
        out += '\n';
    }
    return out;
}

std::unordered_set<std::string> read_answer_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::unordered_set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            ids.insert(line);
        }
    }
    return ids;
}

void apply_labels(std::vector<LogEvent>& events, const std::unordered_set<std::string>& malicious_ids) {
    for (auto& e : events) {
        e.label = malicious_ids.contains(e.id) ? 1 : 0;
    }
}

std::int64_t local_day(std::int64_t timestamp, std::int64_t utc_offset_seconds) {
    return floor_div(timestamp + utc_offset_seconds, kSecondsPerDay);
}

int local_hour(std::int64_t timestamp, std::int64_t utc_offset_seconds) {
    const std::int64_t local = timestamp + utc_offset_seconds;
    return static_cast<int>((local - floor_div(local, kSecondsPerDay) * kSecondsPerDay) / 3600);
}

std::vector<Session> sessionize(std::vector<LogEvent> events, std::int64_t utc_offset_seconds, std::size_t t_max) {
    if (t_max == 0) {
        throw ConfigError("sessionize: t_max must be positive");
    }
    std::map<std::pair<std::string, std::int64_t>, std::vector<LogEvent>> groups;
    for (auto& e : events) {
        const auto day = local_day(e.timestamp, utc_offset_seconds);
        groups[{e.user_id, day}].push_back(std::move(e));
    }
    std::vector<Session> out;
    for (auto& [key, group] : groups) {
        std::stable_sort(group.begin(), group.end(),
                         [](const LogEvent& a, const LogEvent& b) { return a.timestamp < b.timestamp; });
        for (std::size_t start = 0, chunk = 0; start < group.size(); start += t_max, ++chunk) {
            const auto stop = std::min(group.size(), start + t_max);
            Session s;
            s.user_id = key.first;
            s.day = key.second;
            s.chunk = chunk;
            s.first_step = start;
            s.events.assign(std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(start)),
                            std::make_move_iterator(group.begin() + static_cast<std::ptrdiff_t>(stop)));
            out.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace mitd
