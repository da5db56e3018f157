#include "mitd/pipeline.hpp"

#include <json.hpp>

#include "mitd/errors.hpp"
#include "mitd/ingest.hpp"
#include "mitd/model_io.hpp"

namespace mitd {

std::vector<FeaturizedSession> featurize_directory(const std::filesystem::path& dir, const PreprocessConfig& cfg,
                                                   IngestSummary* summary) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    IngestSummary local;
    IngestSummary& sum = summary != nullptr ? *summary : local;
    std::vector<LogEvent> events;
    std::size_t found = 0;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto ch = static_cast<Channel>(c);
        const auto path = dir / (std::string(channel_file_stem(ch)) + ".csv");
        if (!std::filesystem::exists(path)) {
            continue;
        }
        ++found;
        ParseResult r = parse_channel_file(path, ch);
        sum.rows += r.events.size() + r.errors.size();
        for (const auto& e : r.errors) {
            sum.errors.push_back(path.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);
        }
        std::move(r.events.begin(), r.events.end(), std::back_inserter(events));
    }
    if (found == 0) {
        throw IoError("no channel CSV files in " + dir.string());
    }
    const auto answers = dir / "answers.txt";
    if (std::filesystem::exists(answers)) {
        const auto ids = read_answer_file(answers);
        apply_labels(events, ids);
        for (const auto& e : events) {
            sum.labeled += e.label == 1 ? 1 : 0;
        }
    }
    return featurize_sessions(sessionize(std::move(events), cfg.utc_offset_seconds, cfg.t_max), cfg, &sum.featurize);
}

std::string model_metadata(const Config& cfg) {
    nlohmann::json j = cfg;
    return j.dump();
}

Config config_from_metadata(const std::string& metadata) {
    try {
        Config cfg = nlohmann::json::parse(metadata).get<Config>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model metadata: ") + e.what());
    }
}

void save_model(MambaItd& model, const Config& cfg, const std::filesystem::path& path) {
    write_model_file(path, model.to_file(model_metadata(cfg)));
}

LoadedModel load_model(const std::filesystem::path& path) {
    const ModelFile file = read_model_file(path);
    Config cfg = config_from_metadata(file.metadata);
    return {cfg, MambaItd::from_file(file, cfg.model)};
}

TrainResult train_to_directory(const std::vector<FeaturizedSession>& sessions, const Config& cfg,
                               const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    TrainResult result = train_model(sessions, cfg);
    save_model(result.model, cfg, out_dir / "model.bin");
    write_history_csv(out_dir / "history.csv", result.history);
    write_sessions_jsonl(out_dir / "test.jsonl", result.split.test);
    return result;
}

DetectionResult detect(MambaItd& model, const std::vector<FeaturizedSession>& sessions, const DetectConfig& cfg) {
    if (sessions.empty()) {
        throw InputError("detect: no sessions to score");
    }
    DetectionResult out;
    const auto scores = model.predict(sessions);
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& s = sessions[i];
        for (std::size_t t = 0; t < s.labels.size(); ++t) {
            ScoredStep step;
            step.user_id = s.user_id;
            step.day = s.day;
            step.step = s.first_step + t;
            step.prob = scores[i].probs[t];
            step.truth = s.labels[t];
            out.steps.push_back(std::move(step));
        }
    }
    out.thresholds = classify(out.steps, cfg.scope, cfg.edge);
    out.metrics = compute_metrics(out.steps);
    return out;
}

void write_detection(const DetectionResult& result, const DetectConfig& cfg, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    }
    write_report_json(out_dir / "report.json", result.metrics, result.thresholds, cfg.scope, cfg.edge);
    write_decisions_csv(out_dir / "decisions.csv", result.steps);
}

} // namespace mitd
