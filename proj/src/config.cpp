#include "mitd/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mitd/errors.hpp"

namespace mitd {

NLOHMANN_JSON_SERIALIZE_ENUM(StatTokens, {
    {StatTokens::PerFeature, "per_feature"},
    {StatTokens::Pooled, "pooled"},
})

NLOHMANN_JSON_SERIALIZE_ENUM(FusionResidual, {
    {FusionResidual::Both, "both"},
    {FusionResidual::MixOnly, "mix_only"},
})

NLOHMANN_JSON_SERIALIZE_ENUM(SmoteMode, {
    {SmoteMode::Stats, "stats"},
    {SmoteMode::Duplicate, "duplicate"},
    {SmoteMode::Off, "off"},
})

NLOHMANN_JSON_SERIALIZE_ENUM(ThresholdScope, {
    {ThresholdScope::User, "user"},
    {ThresholdScope::UserDay, "user_day"},
})

NLOHMANN_JSON_SERIALIZE_ENUM(ThresholdEdge, {
    {ThresholdEdge::Upper, "upper"},
    {ThresholdEdge::Lower, "lower"},
})

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        out = it->get<T>();
    }
}

template <typename E>
void read_enum(const nlohmann::json& j, const char* key, E& out, std::initializer_list<const char*> allowed) {
    auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    const auto token = it->get<std::string>();
    bool known = false;
    for (const char* a : allowed) {
        known = known || token == a;
    }
    if (!known) {
        throw ConfigError("config: unknown value '" + token + "' for " + key);
    }
    out = it->get<E>();
}

} // namespace

void Config::validate() const {
    const auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (!(preprocess.alpha > 0.0 && preprocess.alpha <= 1.0)) fail("alpha must be in (0, 1]");
    if (preprocess.work_start_hour < 0 || preprocess.work_end_hour > 24 ||
        preprocess.work_start_hour >= preprocess.work_end_hour) {
        fail("working hours must satisfy 0 <= start < end <= 24");
    }
    if (preprocess.t_max == 0) fail("t_max must be positive");
    if (model.d_model == 0 || model.n_state == 0 || model.layers == 0 || model.expand == 0) {
        fail("d_model, n_state, layers and expand must be positive");
    }
    if (model.hidden == 0) fail("hidden must be positive");
    if (model.head_layers < 2 || model.head_layers > 3) fail("head_layers must be 2 or 3");
    if (train.lambda_gate < 0.0) fail("lambda_gate must be >= 0");
    if (!(train.split > 0.0 && train.split < 1.0)) fail("split must be in (0, 1)");
    if (train.batch_size < 2) fail("batch_size must be >= 2 (batch normalization)");
    if (train.epochs == 0) fail("epochs must be positive");
    if (!(train.learning_rate > 0.0)) fail("learning_rate must be positive");
    if (train.smote_k == 0) fail("smote_k must be positive");
}

void to_json(nlohmann::json& j, const Config& c) {
    j = nlohmann::json{
        {"preprocess",
         {{"alpha", c.preprocess.alpha},
          {"work_start_hour", c.preprocess.work_start_hour},
          {"work_end_hour", c.preprocess.work_end_hour},
          {"t_max", c.preprocess.t_max},
          {"timezone", format_utc_offset(c.preprocess.utc_offset_seconds)},
          {"internal_domains", c.preprocess.internal_domains}}},
        {"model",
         {{"d_model", c.model.d_model},
          {"n_state", c.model.n_state},
          {"layers", c.model.layers},
          {"expand", c.model.expand},
          {"dt_rank", c.model.dt_rank},
          {"hidden", c.model.hidden},
          {"head_layers", c.model.head_layers},
          {"stat_tokens", c.model.stat_tokens},
          {"residual", c.model.residual}}},
        {"train",
         {{"lambda_gate", c.train.lambda_gate},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"adam_eps", c.train.adam_eps},
          {"seed", c.train.seed},
          {"split", c.train.split},
          {"smote_k", c.train.smote_k},
          {"smote", c.train.smote}}},
        {"detect", {{"threshold_scope", c.detect.scope}, {"threshold_edge", c.detect.edge}}},
    };
}

void from_json(const nlohmann::json& j, Config& c) {
    if (auto p = j.find("preprocess"); p != j.end()) {
        read_opt(*p, "alpha", c.preprocess.alpha);
        read_opt(*p, "work_start_hour", c.preprocess.work_start_hour);
        read_opt(*p, "work_end_hour", c.preprocess.work_end_hour);
        read_opt(*p, "t_max", c.preprocess.t_max);
        read_opt(*p, "internal_domains", c.preprocess.internal_domains);
        if (auto tz = p->find("timezone"); tz != p->end()) {
            c.preprocess.utc_offset_seconds = parse_utc_offset(tz->get<std::string>());
        }
    }
    if (auto m = j.find("model"); m != j.end()) {
        read_opt(*m, "d_model", c.model.d_model);
        read_opt(*m, "n_state", c.model.n_state);
        read_opt(*m, "layers", c.model.layers);
        read_opt(*m, "expand", c.model.expand);
        read_opt(*m, "dt_rank", c.model.dt_rank);
        read_opt(*m, "hidden", c.model.hidden);
        read_opt(*m, "head_layers", c.model.head_layers);
        read_enum(*m, "stat_tokens", c.model.stat_tokens, {"per_feature", "pooled"});
        read_enum(*m, "residual", c.model.residual, {"both", "mix_only"});
    }
    if (auto t = j.find("train"); t != j.end()) {
        read_opt(*t, "lambda_gate", c.train.lambda_gate);
        read_opt(*t, "epochs", c.train.epochs);
        read_opt(*t, "batch_size", c.train.batch_size);
        read_opt(*t, "learning_rate", c.train.learning_rate);
        read_opt(*t, "beta1", c.train.beta1);
        read_opt(*t, "beta2", c.train.beta2);
        read_opt(*t, "adam_eps", c.train.adam_eps);
        read_opt(*t, "seed", c.train.seed);
        read_opt(*t, "split", c.train.split);
        read_opt(*t, "smote_k", c.train.smote_k);
        read_enum(*t, "smote", c.train.smote, {"stats", "duplicate", "off"});
    }
    if (auto d = j.find("detect"); d != j.end()) {
        read_enum(*d, "threshold_scope", c.detect.scope, {"user", "user_day"});
        read_enum(*d, "threshold_edge", c.detect.edge, {"upper", "lower"});
    }
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config " + path.string());
    }
    Config c;
    try {
        from_json(nlohmann::json::parse(in), c);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

std::int64_t parse_utc_offset(const std::string& text) {
    if (text == "UTC" || text == "Z" || text.empty()) {
        return 0;
    }
    int hh = 0;
    int mm = 0;
    char sign = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%c%2d:%2d%c", &sign, &hh, &mm, &tail) != 3 ||
        (sign != '+' && sign != '-') || hh > 14 || mm > 59) {
        throw ConfigError("bad timezone offset '" + text + "' (expected +HH:MM)");
    }
    const std::int64_t s = hh * 3600 + mm * 60;
    return sign == '-' ? -s : s;
}

std::string format_utc_offset(std::int64_t seconds) {
    if (seconds == 0) {
        return "UTC";
    }
    const char sign = seconds < 0 ? '-' : '+';
    const auto a = std::llabs(seconds);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%c%02lld:%02lld", sign, a / 3600, (a % 3600) / 60);
    return buf;
}

} // namespace mitd
