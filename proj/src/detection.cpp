#include "mitd/detection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mitd/errors.hpp"
#include "mitd/ingest.hpp"

namespace mitd {

Histogram build_histogram(std::span<const double> scores) {
    if (scores.empty()) {
        throw InputError("histogram of an empty score set");
    }
    Histogram h;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    h.min = *lo;
    h.max = *hi;
    if (!(h.max > h.min)) {
        h.degenerate = true;
        h.counts[0] = scores.size();
        h.mass[0] = 1.0;
        return h;
    }
    const double width = h.max - h.min;
    for (double p : scores) {
        auto bin = static_cast<std::size_t>(std::floor((p - h.min) / width * static_cast<double>(kOtsuBins)));
        h.counts[std::min(bin, kOtsuBins - 1)] += 1;
    }
    const auto n = static_cast<double>(scores.size());
    for (std::size_t i = 0; i < kOtsuBins; ++i) {
        h.mass[i] = static_cast<double>(h.counts[i]) / n;
    }
    return h;
}

std::size_t otsu_bin(std::span<const double, kOtsuBins> mass) {
    std::size_t best = kOtsuBins;
    double best_var = -1.0;
    for (std::size_t t = 0; t + 1 < kOtsuBins; ++t) {
        double w0 = 0.0, s0 = 0.0, w1 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i <= t; ++i) {
            w0 += mass[i];
            s0 += static_cast<double>(i) * mass[i];
        }
        for (std::size_t i = t + 1; i < kOtsuBins; ++i) {
            w1 += mass[i];
            s1 += static_cast<double>(i) * mass[i];
        }
        if (w0 <= 0.0 || w1 <= 0.0) {
            continue;
        }
        const double diff = s0 / w0 - s1 / w1;
        const double var = w0 * w1 * diff * diff;
        if (var > best_var) {
            best_var = var;
            best = t;
        }
    }
    return best;
}

double map_threshold(std::size_t bin, double p_min, double p_max) {
    return static_cast<double>(bin) / static_cast<double>(kOtsuBins) * (p_max - p_min) + p_min;
}

Threshold otsu_threshold(std::span<const double> scores, ThresholdEdge edge) {
    const Histogram h = build_histogram(scores);
    Threshold out;
    if (h.degenerate) {
        out.fallback = true;
        return out;
    }
    const std::size_t t = otsu_bin(h);
    if (t == kOtsuBins) {
        out.fallback = true;
        return out;
    }
    out.bin = t;
    out.value = edge == ThresholdEdge::Upper && t + 1 < kOtsuBins ? map_threshold(t + 1, h.min, h.max)
                                                                   : map_threshold(t, h.min, h.max);
    return out;
}

std::vector<GroupThreshold> classify(std::vector<ScoredStep>& steps, ThresholdScope scope, ThresholdEdge edge) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::string key = steps[i].user_id;
        if (scope == ThresholdScope::UserDay) {
            key += "/" + format_day(steps[i].day);
        }
        groups[key].push_back(i);
    }
    std::vector<GroupThreshold> out;
    out.reserve(groups.size());
    for (const auto& [key, idx] : groups) {
        std::vector<double> scores;
        scores.reserve(idx.size());
        for (auto i : idx) {
            scores.push_back(steps[i].prob);
        }
        const Threshold th = otsu_threshold(scores, edge);
        for (auto i : idx) {
            steps[i].decision = steps[i].prob >= th.value ? 1 : 0;
        }
        out.push_back({key, th, idx.size()});
    }
    return out;
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> decision) {
    if (truth.size() != decision.size()) {
        throw InputError("metrics: truth and decision lengths differ");
    }
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] != 0;
        const bool d = decision[i] != 0;
        if (t && d) {
            ++m.tp;
        } else if (!t && d) {
            ++m.fp;
        } else if (!t) {
            ++m.tn;
        } else {
            ++m.fn;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
        if (den == 0) {
            undefined = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.tp, m.tp + m.fp, m.precision_undefined);
    m.recall = ratio(m.tp, m.tp + m.fn, m.recall_undefined);
    m.fpr = ratio(m.fp, m.fp + m.tn, m.fpr_undefined);
    if (m.precision + m.recall == 0.0) {
        m.f1_undefined = true;
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

Metrics compute_metrics(const std::vector<ScoredStep>& steps) {
    std::vector<int> truth;
    std::vector<int> decision;
    truth.reserve(steps.size());
    decision.reserve(steps.size());
    for (const auto& s : steps) {
        truth.push_back(s.truth);
        decision.push_back(s.decision);
    }
    return compute_metrics(truth, decision);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_decisions_csv(const std::filesystem::path& path, const std::vector<ScoredStep>& steps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "user,day,step,prob,decision,truth\n";
    for (const auto& s : steps) {
        out << s.user_id << ',' << format_day(s.day) << ',' << s.step << ',' << format_double(s.prob) << ','
            << s.decision << ',' << s.truth << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<ScoredStep> read_decisions_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "user,day,step,prob,decision,truth") {
        throw FormatError(path.string() + ": unexpected decisions header");
    }
    std::vector<ScoredStep> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 6) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
        }
        ScoredStep s;
        s.user_id = f[0];
        s.day = parse_day(f[1]);
        try {
            s.step = std::stoul(f[2]);
            s.prob = std::stod(f[3]);
            s.decision = std::stoi(f[4]);
            s.truth = std::stoi(f[5]);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_report_json(const std::filesystem::path& path, const Metrics& m, const std::vector<GroupThreshold>& groups,
                       ThresholdScope scope, ThresholdEdge edge) {
    nlohmann::ordered_json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["fpr"] = m.fpr;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    j["undefined"] = {{"precision", m.precision_undefined},
                      {"recall", m.recall_undefined},
                      {"f1", m.f1_undefined},
                      {"fpr", m.fpr_undefined}};
    j["threshold_scope"] = scope == ThresholdScope::User ? "user" : "user_day";
    j["threshold_edge"] = edge == ThresholdEdge::Upper ? "upper" : "lower";
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
        arr.push_back({{"group", g.key},
                       {"tau", g.threshold.value},
                       {"otsu_bin", g.threshold.bin},
                       {"fallback", g.threshold.fallback},
                       {"steps", g.steps}});
    }
    j["thresholds"] = std::move(arr);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace mitd
