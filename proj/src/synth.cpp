#include "mitd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "mitd/config.hpp"
#include "mitd/errors.hpp"
#include "mitd/nn.hpp"

namespace mitd {

namespace {

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kHour = 3600;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::array<const char*, 6> kExt{"zip", "doc", "pdf", "exe", "txt", "jpg"};
constexpr std::array<const char*, 6> kExternal{"gmail.com", "yahoo.com", "hotmail.com", "comcast.net", "aol.com", "msn.com"};
constexpr std::array<const char*, 5> kNeutralSites{"news.example.org", "weather.example.com", "sports.example.net",
                                                   "wiki.example.org", "shop.example.com"};
constexpr std::array<const char*, 3> kCloudSites{"dropbox.com", "drive.example.com", "box.example.net"};
constexpr std::array<const char*, 2> kJobSites{"careers.example.com", "jobs.example.net"};
constexpr std::array<const char*, 2> kHackSites{"leaks.example.org", "wikileaks.example.org"};

struct User {
    std::string id;
    std::string email;
    std::string pc;
    std::string dept_pc;
    std::string sup_pc;      // empty when the user has no supervisor machine access
    std::vector<std::string> contacts;
    bool anomalous = false;
};

class UserGen {
public:
    UserGen(const ScenarioSpec& spec, User user, std::size_t index)
        : spec_(spec), user_(std::move(user)), index_(index), rng_(splitmix(spec.seed ^ splitmix(index + 1))) {}

    void run(std::vector<LogEvent>& out, std::vector<std::string>& malicious) {
        for (std::size_t d = 0; d < spec_.days; ++d) {
            const std::int64_t day = spec_.start_day + static_cast<std::int64_t>(d);
            const auto weekday = ((day % 7) + 7 + 3) % 7;   // 0 = Monday
            if (weekday >= 5) {
                continue;
            }
            day_events_.clear();
            benign_day(day);
            if (user_.anomalous && !spec_.patterns.empty() && unit() < spec_.planted_day_rate) {
                planted_day(day);
            }
            std::stable_sort(day_events_.begin(), day_events_.end(),
                             [](const LogEvent& a, const LogEvent& b) { return a.timestamp < b.timestamp; });
            for (auto& e : day_events_) {
                e.id = next_id();
                if (e.label == 1) {
                    malicious.push_back(e.id);
                }
                out.push_back(std::move(e));
            }
        }
    }

private:
    double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    std::int64_t between(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_); }
    template <class A>
    const char* pick(const A& arr) {
        return arr[static_cast<std::size_t>(between(0, static_cast<std::int64_t>(arr.size()) - 1))];
    }

    std::string next_id() {
        char buf[48];
        const auto r = static_cast<unsigned>(rng_() & 0xffffffffULL);
        std::snprintf(buf, sizeof buf, "{%08X-%04zX-%06zX}", r, index_, counter_++);
        return buf;
    }

    LogEvent make(std::int64_t ts, Channel ch, const std::string& pc, ActionDetail detail, int label) {
        LogEvent e;
        e.user_id = user_.id;
        e.timestamp = ts;
        e.channel = ch;
        e.pc = pc;
        e.detail = std::move(detail);
        e.device = classify_device(pc);
        e.label = label;
        return e;
    }

    std::string filename() {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%08llX.%s", static_cast<unsigned long long>(rng_() & 0xffffffffULL), pick(kExt));
        return buf;
    }

    std::string external_address() {
        char buf[64];
        std::snprintf(buf, sizeof buf, "contact%u@%s", static_cast<unsigned>(between(1, 999)), pick(kExternal));
        return buf;
    }

    std::string url(const char* site) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "http://%s/page%u", site, static_cast<unsigned>(between(1, 9999)));
        return buf;
    }

    void add(std::int64_t ts, Channel ch, const std::string& pc, ActionDetail detail, int label = 0) {
        day_events_.push_back(make(ts, ch, pc, std::move(detail), label));
    }

    void benign_action(std::int64_t ts, const std::string& pc) {
        const double r = unit();
        if (r < 0.12) {
            add(ts, Channel::Device, pc, DeviceDetail{true});
            add(ts + between(60, 900), Channel::Device, pc, DeviceDetail{false});
        } else if (r < 0.40) {
            const bool write = unit() < 0.35;
            add(ts, Channel::File, pc, FileDetail{filename(), write ? "File Write" : "File Open", write});
        } else if (r < 0.65) {
            const double e = unit();
            EmailDetail m;
            if (e < 0.55) {
                m.from = user_.email;
                m.to = user_.contacts[static_cast<std::size_t>(between(0, static_cast<std::int64_t>(user_.contacts.size()) - 1))];
                m.activity = "Send";
            } else if (e < 0.75) {
                m.from = user_.email;
                m.to = external_address();
                m.activity = "Send";
            } else if (e < 0.95) {
                m.from = external_address();
                m.to = user_.email;
                m.activity = "View";
            } else {
                m.from = external_address();
                m.to = external_address();
                m.activity = "View";
            }
            add(ts, Channel::Email, pc, std::move(m));
        } else {
            const double w = unit();
            const char* cat = "neutral";
            const char* site = pick(kNeutralSites);
            if (w < 0.04) {
                cat = "cloud";
                site = pick(kCloudSites);
            } else if (w < 0.07) {
                cat = "job";
                site = pick(kJobSites);
            } else if (w < 0.08) {
                cat = "hacktivist";
                site = pick(kHackSites);
            }
            add(ts, Channel::Http, pc, HttpDetail{url(site), cat});
        }
    }

    void benign_day(std::int64_t day) {
        const std::int64_t base = day * kDay;
        const std::int64_t start = base + 8 * kHour + between(0, 3600);
        const std::int64_t end = base + 16 * kHour + 1800 + between(0, 5400);
        add(start, Channel::Logon, user_.pc, LogonDetail{true});
        const auto n = static_cast<std::size_t>(
            between(static_cast<std::int64_t>(spec_.min_events), static_cast<std::int64_t>(spec_.max_events)));
        for (std::size_t i = 0; i < n; ++i) {
            const std::int64_t ts = between(start + 60, end - 60);
            const double where = unit();
            const std::string* pc = &user_.pc;
            if (where < 0.10) {
                pc = &user_.dept_pc;
            } else if (where < 0.14 && !user_.sup_pc.empty()) {
                pc = &user_.sup_pc;
            }
            benign_action(ts, *pc);
        }
        add(end, Channel::Logon, user_.pc, LogonDetail{false});
        if (unit() < 0.03) {
            // occasional evening browsing from home
            const std::int64_t ts = base + 19 * kHour + between(0, 7200);
            add(ts, Channel::Http, user_.pc, HttpDetail{url(pick(kNeutralSites)), "neutral"});
        }
    }

    void planted_day(std::int64_t day) {
        std::vector<Pattern> chosen = spec_.patterns;
        std::shuffle(chosen.begin(), chosen.end(), rng_);
        const std::size_t count = chosen.size() > 1 && unit() < 0.4 ? 2 : 1;
        chosen.resize(count);
        std::int64_t t = day * kDay + 19 * kHour + between(0, 3600);
        for (Pattern p : chosen) {
            switch (p) {
            case Pattern::OffHoursBurst: t = off_hours_burst(t); break;
            case Pattern::DeviceHopping: t = device_hopping(t); break;
            case Pattern::ExfilEmail: t = exfil_email(t); break;
            }
            t += between(300, 1200);
        }
    }

    std::int64_t off_hours_burst(std::int64_t t) {
        add(t, Channel::Logon, user_.pc, LogonDetail{true}, 1);
        t += between(20, 120);
        add(t, Channel::Device, user_.pc, DeviceDetail{true}, 1);
        const auto n = between(16, 32);
        for (std::int64_t i = 0; i < n; ++i) {
            t += between(5, 60);
            if (unit() < 0.65) {
                static constexpr std::array<const char*, 3> kLoot{"zip", "doc", "exe"};
                char name[32];
                std::snprintf(name, sizeof name, "%08llX.%s", static_cast<unsigned long long>(rng_() & 0xffffffffULL), pick(kLoot));
                add(t, Channel::File, user_.pc, FileDetail{name, "File Write", true}, 1);
            } else {
                add(t, Channel::Http, user_.pc, HttpDetail{url(pick(kCloudSites)), "cloud"}, 1);
            }
        }
        t += between(20, 120);
        add(t, Channel::Device, user_.pc, DeviceDetail{false}, 1);
        t += between(20, 120);
        add(t, Channel::Logon, user_.pc, LogonDetail{false}, 1);
        return t;
    }

    std::int64_t device_hopping(std::int64_t t) {
        const auto hops = between(6, 12);
        for (std::int64_t i = 0; i < hops; ++i) {
            char pc[16];
            std::snprintf(pc, sizeof pc, "LAB-%04u", static_cast<unsigned>(between(0, 9999)));
            add(t, Channel::Logon, pc, LogonDetail{true}, 1);
            t += between(20, 180);
            if (unit() < 0.5) {
                add(t, Channel::File, pc, FileDetail{filename(), "File Open", false}, 1);
                t += between(10, 90);
            }
            add(t, Channel::Logon, pc, LogonDetail{false}, 1);
            t += between(30, 240);
        }
        return t;
    }

    std::int64_t exfil_email(std::int64_t t) {
        const auto n = between(12, 24);
        const std::string drop = external_address();
        for (std::int64_t i = 0; i < n; ++i) {
            add(t, Channel::Email, user_.pc, EmailDetail{drop, user_.email, "Send"}, 1);
            t += between(20, 150);
        }
        return t;
    }

    const ScenarioSpec& spec_;
    User user_;
    std::size_t index_;
    Rng rng_;
    std::size_t counter_ = 0;
    std::vector<LogEvent> day_events_;
};

std::vector<User> make_users(const ScenarioSpec& spec) {
    Rng rng(splitmix(spec.seed));
    std::vector<User> users(spec.n_users);
    const std::size_t n_depts = std::max<std::size_t>(1, spec.n_users / 8);
    for (std::size_t i = 0; i < spec.n_users; ++i) {
        auto& u = users[i];
        char buf[32];
        const char a = static_cast<char>('A' + rng() % 26);
        const char b = static_cast<char>('A' + rng() % 26);
        const char c = static_cast<char>('A' + rng() % 26);
        std::snprintf(buf, sizeof buf, "%c%c%c%04zu", a, b, c, i);
        u.id = buf;
        u.email = u.id + "@dtaa.com";
        std::snprintf(buf, sizeof buf, "PC-%04zu", i);
        u.pc = buf;
        std::snprintf(buf, sizeof buf, "DPT-%02zu", i % n_depts);
        u.dept_pc = buf;
        if (rng() % 3 == 0) {
            std::snprintf(buf, sizeof buf, "SUP-%02zu", i % n_depts);
            u.sup_pc = buf;
        }
    }
    for (std::size_t i = 0; i < spec.n_users; ++i) {
        for (std::size_t k = 1; k <= std::min<std::size_t>(4, spec.n_users - 1); ++k) {
            users[i].contacts.push_back(users[(i + k * 7) % spec.n_users].email);
        }
        if (users[i].contacts.empty()) {
            users[i].contacts.push_back("helpdesk@dtaa.com");
        }
    }
    const auto n_anom = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * static_cast<double>(spec.n_users)));
    std::vector<std::size_t> order(spec.n_users);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n_anom; ++i) {
        users[order[i]].anomalous = true;
    }
    return users;
}

} // namespace

std::string_view pattern_name(Pattern p) {
    switch (p) {
    case Pattern::OffHoursBurst: return "off_hours_burst";
    case Pattern::DeviceHopping: return "device_hopping";
    case Pattern::ExfilEmail: return "exfil_email";
    }
    return "";
}

Pattern parse_pattern(std::string_view name) {
    for (Pattern p : {Pattern::OffHoursBurst, Pattern::DeviceHopping, Pattern::ExfilEmail}) {
        if (pattern_name(p) == name) {
            return p;
        }
    }
    throw ConfigError("unknown pattern '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const {
    if (n_users == 0 || days == 0) {
        throw ConfigError("scenario needs at least one user and one day");
    }
    if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 0.5)) {
        throw ConfigError("anomaly fraction must lie in [0, 0.5]");
    }
    if (!(planted_day_rate >= 0.0 && planted_day_rate <= 1.0)) {
        throw ConfigError("planted day rate must lie in [0, 1]");
    }
    if (min_events == 0 || min_events > max_events) {
        throw ConfigError("events per day need 1 <= min <= max");
    }
}

Corpus generate_corpus(const ScenarioSpec& spec) {
    spec.validate();
    const auto users = make_users(spec);
    Corpus corpus;
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (users[i].anomalous) {
            corpus.anomalous_users.push_back(users[i].id);
        }
        UserGen gen(spec, users[i], i);
        gen.run(corpus.events, corpus.malicious_ids);
    }
    // users were appended in index order, so a stable sort keeps (user, generation) order on ties
    std::stable_sort(corpus.events.begin(), corpus.events.end(),
                     [](const LogEvent& a, const LogEvent& b) { return a.timestamp < b.timestamp; });
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    std::array<std::vector<LogEvent>, kChannelCount> by_channel;
    for (const auto& e : corpus.events) {
        by_channel[static_cast<std::size_t>(e.channel)].push_back(e);
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto ch = static_cast<Channel>(c);
        const auto path = out_dir / (std::string(channel_file_stem(ch)) + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << format_channel_file(ch, by_channel[c]);
        if (!out) {
            throw IoError("failed writing " + path.string());
        }
    }
    const auto answers = out_dir / "answers.txt";
    std::ofstream out(answers, std::ios::binary);
    for (const auto& id : corpus.malicious_ids) {
        out << id << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + answers.string());
    }
}

SeparationCheck separation_check(const std::vector<FeaturizedSession>& sessions, double min_sd) {
    SeparationCheck out;
    std::size_t n_anom = 0;
    for (const auto& s : sessions) {
        n_anom += s.anomalous() ? 1 : 0;
    }
    if (n_anom == 0 || n_anom == sessions.size()) {
        return out;
    }
    out.applicable = true;
    const auto n = static_cast<double>(sessions.size());
    for (std::size_t f = 0; f < kStatDim; ++f) {
        double sum = 0.0, sum_a = 0.0, sum_b = 0.0;
        for (const auto& s : sessions) {
            sum += s.x[f];
            (s.anomalous() ? sum_a : sum_b) += s.x[f];
        }
        const double mean = sum / n;
        double var = 0.0;
        for (const auto& s : sessions) {
            var += (s.x[f] - mean) * (s.x[f] - mean);
        }
        const double sd = std::sqrt(var / n);
        if (sd <= 0.0) {
            continue;
        }
        const double gap = std::abs(sum_a / static_cast<double>(n_anom) - sum_b / (n - static_cast<double>(n_anom))) / sd;
        if (gap > out.best_gap_sd) {
            out.best_gap_sd = gap;
            out.best_feature = f;
        }
    }
    out.passed = out.best_gap_sd >= min_sd;
    return out;
}

GenerateReport generate(const ScenarioSpec& spec, const std::filesystem::path& out_dir) {
    Corpus corpus = generate_corpus(spec);
    write_corpus(corpus, out_dir);
    GenerateReport report;
    report.events = corpus.events.size();
    report.malicious = corpus.malicious_ids.size();
    PreprocessConfig pre;
    auto sessions = featurize_sessions(sessionize(std::move(corpus.events), pre.utc_offset_seconds, pre.t_max), pre);
    report.separation = separation_check(sessions);
    return report;
}

} // namespace mitd
