// mitd: command-line front end for the insider-threat detection pipeline.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mitd/bench.hpp"
#include "mitd/config.hpp"
#include "mitd/gradcheck_suite.hpp"
#include "mitd/pipeline.hpp"
#include "mitd/synth.hpp"

namespace {

using namespace mitd;

int cmd_gen(const ScenarioSpec& spec, const std::string& out) {
    const GenerateReport r = generate(spec, out);
    std::printf("wrote %zu events (%zu planted) to %s\n", r.events, r.malicious, out.c_str());
    if (r.separation.applicable) {
        const auto f = r.separation.best_feature;
        std::printf("separation: %s %s differs by %.2f sd%s\n", stat_factor_names()[f / 2],
                    f % 2 == 0 ? "count" : "duration", r.separation.best_gap_sd,
                    r.separation.passed ? "" : " (below 2 sd)");
    }
    return 0;
}

Config resolve_config(const std::string& path) {
    return path.empty() ? Config{} : load_config(path);
}

int cmd_featurize(const std::string& input, const std::string& output, const std::string& config_path) {
    const Config cfg = resolve_config(config_path);
    IngestSummary sum;
    const auto sessions = featurize_directory(input, cfg.preprocess, &sum);
    for (const auto& e : sum.errors) {
        std::fprintf(stderr, "warning: %s\n", e.c_str());
    }
    write_sessions_jsonl(output, sessions);
    std::printf("%zu sessions, %zu events, %zu labeled, %zu parse errors, %zu other-device events, %zu clamped gaps\n",
                sum.featurize.sessions, sum.featurize.events, sum.labeled, sum.errors.size(),
                sum.featurize.unknown_devices, sum.featurize.clamped_intervals);
    return 0;
}

int cmd_detect(const std::string& model_path, const std::string& sessions_path, const std::string& out,
               const std::string& scope, const std::string& edge) {
    LoadedModel loaded = load_model(model_path);
    DetectConfig dc = loaded.config.detect;
    if (scope == "user") {
        dc.scope = ThresholdScope::User;
    } else if (scope == "user_day") {
        dc.scope = ThresholdScope::UserDay;
    }
    if (edge == "upper") {
        dc.edge = ThresholdEdge::Upper;
    } else if (edge == "lower") {
        dc.edge = ThresholdEdge::Lower;
    }
    const auto sessions = read_sessions_jsonl(sessions_path);
    const DetectionResult r = detect(loaded.model, sessions, dc);
    write_detection(r, dc, out);
    std::printf("precision %.4f recall %.4f f1 %.4f fpr %.4f over %zu steps\n", r.metrics.precision, r.metrics.recall,
                r.metrics.f1, r.metrics.fpr, r.steps.size());
    return 0;
}

int cmd_eval(const std::string& decisions) {
    const auto steps = read_decisions_csv(decisions);
    const Metrics m = compute_metrics(steps);
    const auto flag = [](bool undefined) { return undefined ? " (undefined)" : ""; };
    std::printf("metric     value\n");
    std::printf("precision  %.6f%s\n", m.precision, flag(m.precision_undefined));
    std::printf("recall     %.6f%s\n", m.recall, flag(m.recall_undefined));
    std::printf("f1         %.6f%s\n", m.f1, flag(m.f1_undefined));
    std::printf("fpr        %.6f%s\n", m.fpr, flag(m.fpr_undefined));
    std::printf("tp %zu fp %zu tn %zu fn %zu\n", m.tp, m.fp, m.tn, m.fn);
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    bool ok = true;
    for (const auto& line : run_gradcheck_suite(seed)) {
        const bool pass = line.report.passed && line.report.valid;
        ok = ok && pass;
        std::printf("%-34s %s max_rel_err=%.3e coords=%zu%s%s\n", line.name.c_str(), pass ? "PASS" : "FAIL",
                    line.report.max_rel_error, line.report.coordinates, line.report.worst.empty() ? "" : " worst=",
                    line.report.worst.c_str());
    }
    return ok ? 0 : 1;
}

int cmd_bench(std::uint64_t seed, std::size_t runs, const std::string& out) {
    const auto rows = bench_encoder(ModelConfig{}, {256, 512, 1024, 2048}, runs, seed);
    write_scaling_csv(out, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::printf("T=%-5zu median_ms=%.3f", rows[i].length, rows[i].median_ms);
        if (i > 0) {
            std::printf(" ratio=%.3f", rows[i].median_ms / rows[i - 1].median_ms);
        }
        std::printf("\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Insider-threat detection with selective state-space encoders"};
    app.require_subcommand(1);

    ScenarioSpec spec;
    std::string gen_out = "corpus";
    std::vector<std::string> patterns;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic activity-log corpus");
    gen->add_option("--users", spec.n_users, "Number of users");
    gen->add_option("--days", spec.days, "Calendar days");
    gen->add_option("--anomaly-frac", spec.anomaly_fraction, "Share of users with planted activity");
    gen->add_option("--min-events", spec.min_events, "Minimum benign events per working day");
    gen->add_option("--max-events", spec.max_events, "Maximum benign events per working day");
    gen->add_option("--planted-day-rate", spec.planted_day_rate, "Chance an anomalous user acts out on a given day");
    gen->add_option("--patterns", patterns, "Subset of off_hours_burst, device_hopping, exfil_email");
    gen->add_option("--seed", spec.seed, "Random seed");
    gen->add_option("--out", gen_out, "Output directory");

    std::string feat_in;
    std::string feat_out = "sessions.jsonl";
    std::string config_path;
    auto* feat = app.add_subcommand("featurize", "Parse CSV logs into JSONL sessions");
    feat->add_option("--input", feat_in, "Directory holding the channel CSVs")->required();
    feat->add_option("--output", feat_out, "Output JSONL file");
    feat->add_option("--config", config_path, "JSON config file");

    std::string train_in;
    std::string train_out = "model";
    std::uint64_t train_seed = 0;
    std::size_t epochs = 0;
    auto* train = app.add_subcommand("train", "Train on JSONL sessions");
    train->add_option("--sessions", train_in, "JSONL sessions")->required();
    train->add_option("--out", train_out, "Output directory for model.bin, history.csv, test.jsonl");
    train->add_option("--config", config_path, "JSON config file");
    auto* seed_opt = train->add_option("--seed", train_seed, "Random seed");
    auto* epochs_opt = train->add_option("--epochs", epochs, "Training epochs");

    std::string model_path;
    std::string detect_in;
    std::string detect_out = "detect";
    std::string scope;
    std::string edge;
    auto* det = app.add_subcommand("detect", "Score sessions and apply per-user thresholds");
    det->add_option("--model", model_path, "Model file")->required();
    det->add_option("--sessions", detect_in, "JSONL sessions")->required();
    det->add_option("--out", detect_out, "Output directory for report.json and decisions.csv");
    det->add_option("--scope", scope, "Threshold scope")->check(CLI::IsMember({"user", "user_day"}));
    det->add_option("--edge", edge, "Otsu bin edge used as threshold")->check(CLI::IsMember({"upper", "lower"}));

    std::string decisions;
    auto* ev = app.add_subcommand("eval", "Print metrics for a decisions.csv");
    ev->add_option("--decisions", decisions, "decisions.csv")->required();

    std::uint64_t check_seed = 7;
    auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
    gc->add_option("--seed", check_seed, "Random seed");

    std::uint64_t bench_seed = 7;
    std::size_t runs = 20;
    std::string bench_out = "scaling.csv";
    auto* bench = app.add_subcommand("bench", "Time encoder forward passes against sequence length");
    bench->add_option("--seed", bench_seed, "Random seed");
    bench->add_option("--runs", runs, "Runs per length");
    bench->add_option("--out", bench_out, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "mitd: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) {
            for (const auto& p : patterns) {
                if (&p == &patterns.front()) {
                    spec.patterns.clear();
                }
                spec.patterns.push_back(parse_pattern(p));
            }
            return cmd_gen(spec, gen_out);
        }
        if (feat->parsed()) {
            return cmd_featurize(feat_in, feat_out, config_path);
        }
        if (train->parsed()) {
            Config cfg = resolve_config(config_path);
            if (seed_opt->count() > 0) {
                cfg.train.seed = train_seed;
            }
            if (epochs_opt->count() > 0) {
                cfg.train.epochs = epochs;
            }
            const auto sessions = read_sessions_jsonl(train_in);
            const TrainResult r = train_to_directory(sessions, cfg, train_out);
            for (const auto& e : r.history) {
                std::printf("epoch %zu bce %.6f l_g %.6f total %.6f\n", e.epoch, e.bce, e.gate_reg, e.total);
            }
            std::printf("train %zu (+%zu synthetic) test %zu\n", r.split.train.size(), r.synthesized, r.split.test.size());
            return 0;
        }
        if (det->parsed()) {
            return cmd_detect(model_path, detect_in, detect_out, scope, edge);
        }
        if (ev->parsed()) {
            return cmd_eval(decisions);
        }
        if (gc->parsed()) {
            return cmd_gradcheck(check_seed);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_seed, runs, bench_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mitd: error: %s\n", e.what());
        return 1;
    }
    return 2;
}
