#include "wasrt/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "wasrt/checkpoint.hpp"
#include "wasrt/config_io.hpp"
#include "wasrt/errors.hpp"
#include "wasrt/inference.hpp"
#include "wasrt/synthcorpus.hpp"

namespace wasrt::cli {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_usage;
    if (dynamic_cast<const DataError*>(&e)) return exit_data;
    return exit_runtime;
}

// ------------------------------------------------------------- run records

void to_json(json& j, const RunRecord& r) {
    j = {{"command", r.command}, {"config", r.config},     {"seed", r.seed},      {"started", r.started},
         {"finished", r.finished}, {"outputs", r.outputs}, {"metrics", r.metrics}};
}

void from_json(const json& j, RunRecord& r) {
    r.command = j.at("command").get<std::string>();
    r.config = j.value("config", json::object());
    r.seed = j.value("seed", std::uint64_t{0});
    r.started = j.value("started", "");
    r.finished = j.value("finished", "");
    r.outputs = j.value("outputs", std::vector<std::string>{});
    r.metrics = j.value("metrics", json::object());
}

void append_run_record(const RunRecord& record, const fs::path& log) {
    if (log.has_parent_path()) fs::create_directories(log.parent_path());
    std::ofstream f(log, std::ios::app);
    if (!f) throw IoError("cannot append to run log " + log.string());
    f << json(record).dump() << '\n';
}

std::vector<RunRecord> read_run_records(const fs::path& log) {
    std::ifstream f(log);
    if (!f) throw IoError("cannot open run log " + log.string());
    std::vector<RunRecord> out;
    std::string line;
    int n = 0;
    while (std::getline(f, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<RunRecord>());
        } catch (const json::exception& e) {
            throw SchemaError(log.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ----------------------------------------------------------------- configs

PipelineConfig load_pipeline_config(const std::optional<fs::path>& path) {
    PipelineConfig c;
    if (!path) return c;
    const json j = read_json_file(*path);
    if (!j.is_object()) throw ConfigError(path->string() + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "network")
                c.network = value.get<NetworkConfig>();
            else if (key == "training")
                c.training = value.get<TrainConfig>();
            else if (key == "evaluation")
                c.evaluation = value.get<EvalConfig>();
            else
                throw ConfigError("unknown section '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError(path->string() + ": section '" + key + "': " + e.what());
        }
    }
    return c;
}

json to_json(const PipelineConfig& c) {
    return {{"network", c.network}, {"training", c.training}, {"evaluation", c.evaluation}};
}

void apply_overrides(PipelineConfig& cfg, const Overrides& o) {
    if (o.context_length) cfg.network.context_length = *o.context_length;
    if (o.aggregation) cfg.network.aggregation = aggregation_from_string(*o.aggregation);
    if (o.spatial_kernel) cfg.network.spatial_kernel = *o.spatial_kernel;
    if (o.seed) cfg.training.seed = *o.seed;
    if (o.epochs) cfg.training.epochs = *o.epochs;
}

int worker_count() {
    const char* v = std::getenv("WASRT_WORKERS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError(std::string("WASRT_WORKERS must be a positive integer, got '") + v + "'");
    return static_cast<int>(n);
}

// ------------------------------------------------------------------- synth

fs::path cmd_synth(const fs::path& spec_file, const fs::path& out_dir) {
    const std::string started = utc_timestamp();
    const json j = read_json_file(spec_file);
    if (!j.is_object()) throw ConfigError(spec_file.string() + ": expected a JSON object");
    EmitOptions opts;
    std::vector<SceneSpec> specs;
    std::uint64_t seed = 0;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "context_length")
                opts.context_length = value.get<int>();
            else if (key == "pad_sequence_start")
                opts.pad_sequence_start = value.get<bool>();
            else if (key == "max_entries_per_sequence")
                opts.max_entries_per_sequence = value.get<int>();
            else if (key == "random") {
                const CorpusRecipe recipe = value.get<CorpusRecipe>();
                seed = recipe.seed;
                const auto generated = recipe_scenes(recipe);
                specs.insert(specs.begin(), generated.begin(), generated.end());
            } else if (key == "scenes") {
                for (const auto& s : value) specs.push_back(s.get<SceneSpec>());
            } else
                throw ConfigError("unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(spec_file.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(spec_file.string() + ": " + e.what());
    }
    if (specs.empty()) throw ConfigError(spec_file.string() + ": no scenes (give \"random\" or \"scenes\")");

    const CorpusManifest m = emit_corpus(specs, out_dir, opts);
    const fs::path manifest = out_dir / "manifest.jsonl";
    RunRecord rec{"synth", j, seed, started, utc_timestamp(), {manifest.string()},
                  {{"sequences", specs.size()},
                   {"entries", m.entries.size()},
                   {"base", m.count(Subset::base)},
                   {"extension", m.count(Subset::extension)}}};
    append_run_record(rec, out_dir / "runs.jsonl");
    return manifest;
}

// ------------------------------------------------------------------- train

TrainOutcome cmd_train(const fs::path& manifest_path, const PipelineConfig& cfg, const fs::path& out_checkpoint) {
    const std::string started = utc_timestamp();
    cfg.network.validate();
    cfg.training.validate();
    const CorpusManifest manifest = load_manifest(manifest_path);

    const fs::path dir = out_checkpoint.has_parent_path() ? out_checkpoint.parent_path() : fs::path(".");
    fs::create_directories(dir);
    const fs::path loss_log = dir / (out_checkpoint.stem().string() + "_loss.jsonl");
    std::ofstream log(loss_log);
    if (!log) throw IoError("cannot write loss log " + loss_log.string());
    const TrainResult result = train(manifest, cfg.network, cfg.training, [&](const LossRecord& r) {
        log << json{{"step", r.step},
                    {"epoch", r.epoch},
                    {"loss", r.total},
                    {"cross_entropy", r.cross_entropy},
                    {"separation", r.separation},
                    {"learning_rate", r.learning_rate}}
                   .dump()
            << '\n';
    });
    save_checkpoint(result.network, out_checkpoint);

    TrainOutcome out{out_checkpoint, result.curve.empty() ? 0.0 : result.curve.back().total,
                     static_cast<int>(result.curve.size())};
    json config = to_json(cfg);
    config["manifest"] = manifest_path.string();
    RunRecord rec{"train", config, cfg.training.seed, started, utc_timestamp(),
                  {out_checkpoint.string(), loss_log.string()},
                  {{"final_loss", out.final_loss}, {"steps", out.steps}}};
    append_run_record(rec, dir / "runs.jsonl");
    return out;
}

// ------------------------------------------------------------------- infer

namespace {

void write_timing(std::ofstream& f, const std::string& name, const StepTiming& t) {
    f << json{{"frame", name}, {"index", t.frame}, {"seconds", t.seconds}, {"encoder_calls", t.encoder_calls}}.dump()
      << '\n';
}

fs::path mask_path_for(const fs::path& out_dir, const std::string& relative) {
    fs::path p = out_dir / relative;
    p.replace_extension(".png");
    return p;
}

// Frame files of one sequence keyed by frame index, recovered from the
// manifest's target and context paths.
struct SequenceFrames {
    std::map<int, std::string> paths;
    std::map<int, const ManifestEntry*> targets;
};

std::map<std::string, SequenceFrames> group_sequences(const CorpusManifest& m) {
    std::map<std::string, SequenceFrames> seqs;
    const int T = m.context_length;
    for (const auto& e : m.entries) {
        SequenceFrames& s = seqs[e.sequence_id];
        s.paths[e.frame_index] = e.target_path;
        s.targets[e.frame_index] = &e;
        for (int i = 0; i < T; ++i) {
            const int idx = e.frame_index - T + i;
            if (idx >= 0) s.paths[idx] = e.context_paths[static_cast<std::size_t>(i)];
        }
    }
    return seqs;
}

}  // namespace

void cmd_infer(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out_dir) {
    const std::string started = utc_timestamp();
    const Network net = load_checkpoint(checkpoint);
    const CorpusManifest m = load_manifest(manifest_path);
    fs::create_directories(out_dir);
    std::ofstream timing(out_dir / "timing.jsonl");
    if (!timing) throw IoError("cannot write timing log in " + out_dir.string());

    std::vector<double> seconds;
    std::size_t written = 0;
    for (const auto& [seq_id, seq] : group_sequences(m)) {
        // Streaming from frame 0 reproduces the manifest's context rule (indices
        // clamped at 0) only when every earlier frame is available.
        bool contiguous = seq.paths.begin()->first == 0 &&
                          seq.paths.rbegin()->first == static_cast<int>(seq.paths.size()) - 1;
        if (contiguous) {
            StreamingEngine engine(net);
            for (const auto& [idx, rel] : seq.paths) {
                const StepOutput o = engine.step(read_frame(m.root / rel, seq_id, idx));
                write_timing(timing, rel, engine.timings().back());
                seconds.push_back(engine.timings().back().seconds);
                if (seq.targets.count(idx)) {
                    write_mask(o.mask, mask_path_for(out_dir, rel));
                    ++written;
                }
            }
        } else {
            for (const auto& [idx, entry] : seq.targets) {
                const std::size_t i = static_cast<std::size_t>(entry - m.entries.data());
                const auto t0 = std::chrono::steady_clock::now();
                const auto calls = net.encode_calls();
                const TemporalSample s = with_context_length(load_sample(m, i), net.config().context_length);
                const SegmentationMask mask = argmax_mask(net.forward(s));
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                write_timing(timing, entry->target_path, {idx, secs, net.encode_calls() - calls});
                seconds.push_back(secs);
                write_mask(mask, mask_path_for(out_dir, entry->target_path));
                ++written;
            }
        }
    }
    std::vector<StepTiming> all;
    for (double s : seconds) all.push_back({0, s, 1});
    const TimingSummary ts = summarize_timings(all);
    RunRecord rec{"infer",
                  {{"checkpoint", checkpoint.string()}, {"manifest", manifest_path.string()}, {"network", net.config()}},
                  0,
                  started,
                  utc_timestamp(),
                  {out_dir.string(), (out_dir / "timing.jsonl").string()},
                  {{"masks", written}, {"mean_seconds", ts.mean_seconds}, {"frames_per_second", ts.frames_per_second}}};
    append_run_record(rec, out_dir / "runs.jsonl");
}

void cmd_infer_frames(const fs::path& checkpoint, const fs::path& frame_dir, const fs::path& out_dir) {
    const std::string started = utc_timestamp();
    const Network net = load_checkpoint(checkpoint);
    if (!fs::is_directory(frame_dir)) throw IoError("not a directory: " + frame_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(frame_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .png frames in " + frame_dir.string());

    fs::create_directories(out_dir);
    std::ofstream timing(out_dir / "timing.jsonl");
    if (!timing) throw IoError("cannot write timing log in " + out_dir.string());
    StreamingEngine engine(net);
    for (std::size_t i = 0; i < files.size(); ++i) {
        const StepOutput o = engine.step(read_frame(files[i], frame_dir.filename().string(), static_cast<int>(i)));
        write_mask(o.mask, out_dir / files[i].filename());
        write_timing(timing, files[i].filename().string(), engine.timings().back());
    }
    const TimingSummary ts = summarize_timings(engine.timings());
    RunRecord rec{"infer",
                  {{"checkpoint", checkpoint.string()}, {"frames", frame_dir.string()}, {"network", net.config()}},
                  0,
                  started,
                  utc_timestamp(),
                  {out_dir.string(), (out_dir / "timing.jsonl").string()},
                  {{"masks", files.size()}, {"mean_seconds", ts.mean_seconds}, {"frames_per_second", ts.frames_per_second}}};
    append_run_record(rec, out_dir / "runs.jsonl");
}

// -------------------------------------------------------------------- eval

namespace {

FrameAnnotation annotation_for_eval(const CorpusManifest& m, const ManifestEntry& e, const EvalConfig& cfg) {
    FrameAnnotation ann = read_annotation(m.root / e.annotation_path);
    if (cfg.danger_zone_source == DangerZoneSource::none) ann.danger_zone = {};
    return ann;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

std::string report_text(const DetectionReport& r) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "frames %d, water-edge frames %d\n", r.frames, r.frames_with_edge);
    os << buf;
    std::snprintf(buf, sizeof buf, "mu_R %.1f%%\n", round1(100 * r.mu_r));
    os << buf;
    std::snprintf(buf, sizeof buf, "overall      TP %ld FP %ld FN %ld  Pr %.1f Re %.1f F1 %.1f\n", r.overall.tp,
                  r.overall.fp, r.overall.fn, round1(r.overall_rates.precision), round1(r.overall_rates.recall),
                  round1(r.overall_rates.f1));
    os << buf;
    std::snprintf(buf, sizeof buf, "danger zone  TP %ld FP %ld FN %ld  Pr %.1f Re %.1f F1 %.1f\n", r.danger.tp,
                  r.danger.fp, r.danger.fn, round1(r.danger_rates.precision), round1(r.danger_rates.recall),
                  round1(r.danger_rates.f1));
    os << buf;
    return os.str();
}

}  // namespace

DetectionReport cmd_eval(const fs::path& pred_dir, const fs::path& manifest_path, const EvalConfig& cfg,
                         const fs::path& out_dir) {
    const std::string started = utc_timestamp();
    cfg.validate();
    const CorpusManifest m = load_manifest(manifest_path);
    if (m.entries.empty()) throw DataError("manifest " + manifest_path.string() + " has no entries");
    std::vector<FrameResult> frames;
    for (const auto& e : m.entries) {
        const fs::path pred_path = mask_path_for(pred_dir, e.target_path);
        if (!fs::exists(pred_path)) throw IoError("missing prediction " + pred_path.string());
        const SegmentationMask pred = read_mask(pred_path);
        const FrameAnnotation gt = annotation_for_eval(m, e, cfg);
        if (!pred.same_size(gt.mask))
            throw DataError("prediction " + pred_path.string() + " does not match the annotation size");
        frames.push_back(evaluate_frame(pred, gt, cfg));
    }
    const DetectionReport report = summarize(frames, cfg);
    fs::create_directories(out_dir);
    write_text(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(out_dir / "report.txt", report_text(report));

    RunRecord rec{"eval",
                  {{"predictions", pred_dir.string()}, {"manifest", manifest_path.string()}, {"evaluation", cfg}},
                  0,
                  started,
                  utc_timestamp(),
                  {(out_dir / "report.json").string(), (out_dir / "report.txt").string()},
                  report_to_json(report)};
    rec.metrics["method"] = pred_dir.filename().string();
    append_run_record(rec, out_dir / "runs.jsonl");
    return report;
}

// ------------------------------------------------------------------ ablate

std::string GridPoint::label() const {
    return "T=" + std::to_string(context_length) + " " + to_string(aggregation) + " k=" + std::to_string(spatial_kernel);
}

GridPoint parse_grid_point(const std::string& s) {
    GridPoint p;
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.empty() || parts.size() > 3) throw ConfigError("grid point '" + s + "' must look like T:aggregation:kernel");
    try {
        std::size_t used = 0;
        p.context_length = std::stoi(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument(parts[0]);
        if (parts.size() > 1) p.aggregation = aggregation_from_string(parts[1]);
        if (parts.size() > 2) {
            p.spatial_kernel = std::stoi(parts[2], &used);
            if (used != parts[2].size()) throw std::invalid_argument(parts[2]);
        }
    } catch (const std::logic_error&) {
        throw ConfigError("grid point '" + s + "' must look like T:aggregation:kernel");
    }
    return p;
}

std::vector<AblationRow> cmd_ablate(const fs::path& train_manifest, const fs::path& test_manifest,
                                    const std::vector<GridPoint>& grid, const PipelineConfig& base,
                                    const fs::path& out_dir) {
    const std::string started = utc_timestamp();
    if (grid.empty()) throw ConfigError("ablation grid is empty");
    std::vector<PipelineConfig> configs;
    for (const auto& g : grid) {
        PipelineConfig c = base;
        c.network.context_length = g.context_length;
        c.network.aggregation = g.aggregation;
        c.network.spatial_kernel = g.spatial_kernel;
        c.network.validate();
        c.training.validate();
        configs.push_back(c);
    }
    // fail early on unreadable inputs
    load_manifest(train_manifest);
    load_manifest(test_manifest);

    std::vector<DetectionReport> reports(grid.size());
    std::vector<std::string> errors(grid.size());
    const int workers = worker_count();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        try {
            const fs::path dir = out_dir / ("run_" + std::to_string(i));
            cmd_train(train_manifest, configs[u], dir / "model.json");
            cmd_infer(dir / "model.json", test_manifest, dir / "predictions");
            reports[u] = cmd_eval(dir / "predictions", test_manifest, configs[u].evaluation, dir / "eval");
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!errors[i].empty()) throw std::runtime_error("grid point " + grid[i].label() + ": " + errors[i]);

    std::vector<AblationRow> rows;
    json rows_json = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        rows.push_back(ablation_row(grid[i].label(), reports[i]));
        rows_json.push_back({{"label", grid[i].label()}, {"report", report_to_json(reports[i])}});
    }
    fs::create_directories(out_dir);
    write_text(out_dir / "ablation.txt", format_ablation_table(rows));
    write_text(out_dir / "ablation.json", rows_json.dump(2) + "\n");

    json grid_json = json::array();
    for (const auto& g : grid)
        grid_json.push_back({{"context_length", g.context_length},
                             {"aggregation", to_string(g.aggregation)},
                             {"spatial_kernel", g.spatial_kernel}});
    RunRecord rec{"ablate",
                  {{"train_manifest", train_manifest.string()},
                   {"test_manifest", test_manifest.string()},
                   {"base", to_json(base)},
                   {"grid", grid_json}},
                  base.training.seed,
                  started,
                  utc_timestamp(),
                  {(out_dir / "ablation.txt").string(), (out_dir / "ablation.json").string()},
                  {{"rows", rows_json}}};
    append_run_record(rec, out_dir / "runs.jsonl");
    return rows;
}

// ------------------------------------------------------------------ report

namespace {

double metric(const json& section, const char* key) {
    if (!section.contains(key)) throw SchemaError(std::string("run record metrics lack '") + key + "'");
    return section.at(key).get<double>();
}

ComparisonRow row_from_metrics(const std::string& fallback_name, const json& m) {
    ComparisonRow r;
    r.method = m.value("method", fallback_name);
    r.mu_r = 100 * m.value("mu_r", 0.0);
    const json& o = m.at("overall");
    r.precision = metric(o, "precision");
    r.recall = metric(o, "recall");
    r.f1 = o.contains("f1") ? o.at("f1").get<double>() : f1_score(r.precision, r.recall);
    if (m.contains("danger_zone")) {
        const json& d = m.at("danger_zone");
        r.precision_danger = metric(d, "precision");
        r.recall_danger = metric(d, "recall");
        r.f1_danger = d.contains("f1") ? d.at("f1").get<double>() : f1_score(r.precision_danger, r.recall_danger);
    }
    return r;
}

}  // namespace

std::string cmd_report(const std::vector<fs::path>& run_logs, bool with_published) {
    std::vector<ComparisonRow> rows;
    if (with_published) rows = published_comparison_rows();
    for (const auto& log : run_logs) {
        const auto records = read_run_records(log);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const RunRecord& r = records[i];
            if (!r.metrics.contains("overall")) continue;
            try {
                rows.push_back(row_from_metrics(log.parent_path().filename().string(), r.metrics));
            } catch (const json::exception& e) {
                throw SchemaError(log.string() + " record " + std::to_string(i + 1) + ": " + e.what());
            }
        }
    }
    if (rows.empty()) throw DataError("no evaluation records found");
    flag_inconsistent(rows);
    return format_comparison_table(rows);
}

}  // namespace wasrt::cli
