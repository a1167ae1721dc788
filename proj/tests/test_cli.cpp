#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "wasrt/commands.hpp"
#include "wasrt/errors.hpp"
#include "wasrt/synthcorpus.hpp"

using namespace wasrt;
using namespace wasrt::cli;
using nlohmann::json;

namespace {

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p);
    f << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

SceneSpec one_object_scene(std::uint64_t seed) {
    SceneSpec s;
    s.seed = seed;
    s.height = 24;
    s.width = 32;
    s.horizon = 8;
    s.shore_height = 3;
    s.length = 1;
    FloatingObject o;
    o.x = 2;
    o.waterline = 16;
    o.width = 6;
    o.height = 6;
    o.look.color = {0.8, 0.3, 0.2};
    s.objects.push_back(o);
    return s;
}

/// Three single-frame scenes with one obstacle each.
fs::path micro_corpus(const fs::path& dir) {
    json spec{{"context_length", 0}, {"scenes", json::array()}};
    for (std::uint64_t s = 0; s < 3; ++s) spec["scenes"].push_back(one_object_scene(s));
    write_file(dir / "spec.json", spec.dump());
    return cmd_synth(dir / "spec.json", dir / "corpus");
}

/// Copies every ground-truth mask into pred_dir, letting `edit` alter it.
template <class Edit>
void write_predictions(const fs::path& manifest_path, const fs::path& pred_dir, Edit edit) {
    const CorpusManifest m = load_manifest(manifest_path);
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        SegmentationMask mask = read_annotation(m.root / m.entries[i].annotation_path).mask;
        edit(i, mask);
        fs::path out = pred_dir / m.entries[i].target_path;
        out.replace_extension(".png");
        fs::create_directories(out.parent_path());
        write_mask(mask, out);
    }
}

PipelineConfig toy_pipeline(int T, int epochs = 1) {
    PipelineConfig c;
    c.network = testing::toy_config(T);
    c.training.epochs = epochs;
    c.training.batch_size = 2;
    return c;
}

fs::path small_training_corpus(const fs::path& dir, int T) {
    json spec{{"context_length", T},
              {"random", {{"seed", 11}, {"sequences", 4}, {"height", 16}, {"width", 24}, {"length", T + 2}}}};
    write_file(dir / "spec.json", spec.dump());
    return cmd_synth(dir / "spec.json", dir / "corpus");
}

}  // namespace

TEST_CASE("cli: synth writes a manifest and is reproducible") {
    const auto dir = testing::scratch_dir("cli_synth");
    const json spec{{"context_length", 2}, {"random", {{"seed", 5}, {"sequences", 3}, {"height", 16}, {"width", 24}, {"length", 4}}}};
    write_file(dir / "spec.json", spec.dump());
    const fs::path m1 = cmd_synth(dir / "spec.json", dir / "a");
    const fs::path m2 = cmd_synth(dir / "spec.json", dir / "b");
    const CorpusManifest a = load_manifest(m1, 2);
    CHECK(a.entries.size() == 6);
    CHECK(slurp(m1) == slurp(m2));
    for (const auto& e : a.entries) CHECK(slurp(dir / "a" / e.target_path) == slurp(dir / "b" / e.target_path));
    CHECK(read_run_records(dir / "a" / "runs.jsonl").size() == 1);

    write_file(dir / "bad.json", R"({"context_length": 2, "scens": []})");
    CHECK_THROWS_AS(cmd_synth(dir / "bad.json", dir / "c"), ConfigError);
    write_file(dir / "empty.json", R"({"context_length": 2})");
    CHECK_THROWS_AS(cmd_synth(dir / "empty.json", dir / "c"), ConfigError);
    write_file(dir / "notjson.json", "{");
    CHECK_THROWS(cmd_synth(dir / "notjson.json", dir / "c"));
}

TEST_CASE("cli: eval of perfect predictions") {
    const auto dir = testing::scratch_dir("cli_eval_perfect");
    const fs::path manifest = micro_corpus(dir);
    write_predictions(manifest, dir / "perfect", [](std::size_t, SegmentationMask&) {});
    const DetectionReport r = cmd_eval(dir / "perfect", manifest, EvalConfig{}, dir / "eval");
    CHECK(r.overall.tp == 3);
    CHECK(r.overall.fp == 0);
    CHECK(r.overall.fn == 0);
    CHECK(r.overall_rates.precision == doctest::Approx(100));
    CHECK(r.overall_rates.recall == doctest::Approx(100));
    CHECK(r.overall_rates.f1 == doctest::Approx(100));
    CHECK(r.mu_r == doctest::Approx(1.0));
    CHECK(fs::exists(dir / "eval" / "report.json"));
    CHECK(fs::exists(dir / "eval" / "report.txt"));
    const auto recs = read_run_records(dir / "eval" / "runs.jsonl");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].metrics.at("method") == "perfect");
}

TEST_CASE("cli: eval of all-water predictions") {
    const auto dir = testing::scratch_dir("cli_eval_water");
    const fs::path manifest = micro_corpus(dir);
    write_predictions(manifest, dir / "water", [](std::size_t, SegmentationMask& m) {
        for (auto& c : m.cells) c = static_cast<std::uint8_t>(Label::water);
    });
    const DetectionReport r = cmd_eval(dir / "water", manifest, EvalConfig{}, dir / "eval");
    CHECK(r.overall.tp == 0);
    CHECK(r.overall.fn == 3);
    CHECK(r.overall.fp == 0);
}

TEST_CASE("cli: eval counts on a hand-built micro corpus") {
    const auto dir = testing::scratch_dir("cli_eval_micro");
    const fs::path manifest = micro_corpus(dir);
    // frame 0 exact, frame 1 misses its obstacle, frame 2 adds a 6x6 blob on open water
    write_predictions(manifest, dir / "pred", [](std::size_t i, SegmentationMask& m) {
        if (i == 1)
            for (int y = 8; y < 24; ++y)
                for (int x = 0; x < 32; ++x) m(y, x) = static_cast<std::uint8_t>(Label::water);
        if (i == 2)
            for (int y = 17; y < 23; ++y)
                for (int x = 22; x < 28; ++x) m(y, x) = static_cast<std::uint8_t>(Label::obstacle);
    });
    const DetectionReport r = cmd_eval(dir / "pred", manifest, EvalConfig{}, dir / "eval");
    CHECK(r.frames == 3);
    CHECK(r.overall.tp == 2);
    CHECK(r.overall.fn == 1);
    CHECK(r.overall.fp == 1);
    CHECK(r.danger.fp == 1);
    CHECK(r.overall_rates.precision == doctest::Approx(200.0 / 3));
    CHECK(r.overall_rates.recall == doctest::Approx(200.0 / 3));

    // a blob below the minimum area is not a false positive
    EvalConfig big;
    big.min_fp_area = 37;
    CHECK(cmd_eval(dir / "pred", manifest, big, dir / "eval_big").overall.fp == 0);
}

TEST_CASE("cli: eval input errors") {
    const auto dir = testing::scratch_dir("cli_eval_errors");
    const fs::path manifest = micro_corpus(dir);
    fs::create_directories(dir / "none");
    CHECK_THROWS_AS(cmd_eval(dir / "none", manifest, EvalConfig{}, dir / "eval"), IoError);
    write_predictions(manifest, dir / "small", [](std::size_t, SegmentationMask& m) { m = SegmentationMask(4, 4, Label::water); });
    CHECK_THROWS_AS(cmd_eval(dir / "small", manifest, EvalConfig{}, dir / "eval"), DataError);
    CHECK_THROWS_AS(cmd_eval(dir / "none", dir / "missing.jsonl", EvalConfig{}, dir / "eval"), IoError);
}

TEST_CASE("cli: train, infer and evaluate end to end") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    const fs::path manifest = small_training_corpus(dir, 2);
    const TrainOutcome o = cmd_train(manifest, toy_pipeline(2), dir / "model.json");
    CHECK(fs::exists(o.checkpoint));
    CHECK(o.steps > 0);
    CHECK(std::isfinite(o.final_loss));
    CHECK(fs::exists(dir / "model_loss.jsonl"));
    const auto recs = read_run_records(dir / "runs.jsonl");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].command == "train");

    cmd_infer(o.checkpoint, manifest, dir / "pred");
    const CorpusManifest m = load_manifest(manifest);
    for (const auto& e : m.entries) {
        fs::path p = dir / "pred" / e.target_path;
        p.replace_extension(".png");
        CHECK(fs::exists(p));
    }
    CHECK(fs::exists(dir / "pred" / "timing.jsonl"));
    const DetectionReport r = cmd_eval(dir / "pred", manifest, EvalConfig{}, dir / "eval");
    CHECK(r.frames == static_cast<int>(m.entries.size()));

    PipelineConfig odd = toy_pipeline(2);
    odd.network.deep_channels = 7;
    CHECK_THROWS_AS(cmd_train(manifest, odd, dir / "odd.json"), ConfigError);
    CHECK_THROWS_AS(cmd_train(manifest, toy_pipeline(4), dir / "deep.json"), ConfigError);
}

TEST_CASE("cli: ablation grid") {
    const auto dir = testing::scratch_dir("cli_ablate");
    const fs::path manifest = small_training_corpus(dir, 2);
    const std::vector<GridPoint> grid{parse_grid_point("0:conv3d:3"), parse_grid_point("2:avgpool1:3")};
    const auto rows = cmd_ablate(manifest, manifest, grid, toy_pipeline(2), dir / "a");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "T=0 conv3d k=3");
    CHECK(rows[1].label == "T=2 avgpool1 k=3");
    CHECK(fs::exists(dir / "a" / "ablation.txt"));
    CHECK(fs::exists(dir / "a" / "ablation.json"));
    cmd_ablate(manifest, manifest, grid, toy_pipeline(2), dir / "b");
    CHECK(slurp(dir / "a" / "ablation.txt") == slurp(dir / "b" / "ablation.txt"));

    CHECK_THROWS_AS(cmd_ablate(manifest, manifest, {}, toy_pipeline(2), dir / "c"), ConfigError);
}

TEST_CASE("cli: grid point parsing") {
    const GridPoint g = parse_grid_point("3:avgpool3:5");
    CHECK(g.context_length == 3);
    CHECK(g.aggregation == Aggregation::avgpool_3x3);
    CHECK(g.spatial_kernel == 5);
    CHECK(parse_grid_point("1").context_length == 1);
    CHECK_THROWS_AS(parse_grid_point("x:conv3d:3"), ConfigError);
    CHECK_THROWS_AS(parse_grid_point("5:median:3"), ConfigError);
    CHECK_THROWS_AS(parse_grid_point("5:conv3d:3:1"), ConfigError);
    CHECK_THROWS_AS(parse_grid_point("5:conv3d:3x"), ConfigError);
}

TEST_CASE("cli: report recomputes and flags F1") {
    const auto dir = testing::scratch_dir("cli_report");
    RunRecord a{"eval", json::object(), 0, "", "", {}, {{"method", "mine"}, {"mu_r", 0.984}, {"overall", {{"precision", 96.9}, {"recall", 92.0}}}}};
    RunRecord b{"eval", json::object(), 0, "", "", {}, {{"method", "off"}, {"mu_r", 0.9}, {"overall", {{"precision", 90.0}, {"recall", 90.0}, {"f1", 85.0}}}}};
    RunRecord c{"train", json::object(), 0, "", "", {}, {{"final_loss", 0.1}}};
    append_run_record(a, dir / "runs.jsonl");
    append_run_record(b, dir / "runs.jsonl");
    append_run_record(c, dir / "runs.jsonl");
    const std::string table = cmd_report({dir / "runs.jsonl"}, false);
    CHECK(table.find("94.4") != std::string::npos);
    CHECK(table.find("mine *") == std::string::npos);
    CHECK(table.find("off *") != std::string::npos);
    CHECK(table.find("98.4") != std::string::npos);

    const std::string with_pub = cmd_report({dir / "runs.jsonl"}, true);
    CHECK(with_pub.find("WaSR-T") != std::string::npos);
    CHECK(with_pub.find("BiSeNet") != std::string::npos);

    write_file(dir / "only_train" / "runs.jsonl", json(c).dump() + "\n");
    CHECK_THROWS_AS(cmd_report({dir / "only_train" / "runs.jsonl"}, false), DataError);
}

TEST_CASE("cli: run log is append-only") {
    const auto dir = testing::scratch_dir("cli_runlog");
    RunRecord first{"synth", {{"x", 1}}, 3, utc_timestamp(), utc_timestamp(), {"m.jsonl"}, {{"entries", 2}}};
    append_run_record(first, dir / "runs.jsonl");
    const std::string before = slurp(dir / "runs.jsonl");
    RunRecord second = first;
    second.command = "train";
    append_run_record(second, dir / "runs.jsonl");
    const std::string after = slurp(dir / "runs.jsonl");
    CHECK(after.substr(0, before.size()) == before);
    const auto recs = read_run_records(dir / "runs.jsonl");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].command == "synth");
    CHECK(recs[0].seed == 3);
    CHECK(recs[0].config == first.config);
    CHECK(recs[1].command == "train");
    CHECK(first.started.size() == 20);  // YYYY-MM-DDTHH:MM:SSZ
}

TEST_CASE("cli: exit codes and configuration files") {
    CHECK(exit_code_for(ConfigError("x")) == exit_usage);
    CHECK(exit_code_for(DataError("x")) == exit_data);
    CHECK(exit_code_for(std::runtime_error("x")) == exit_runtime);

    const auto dir = testing::scratch_dir("cli_config");
    write_file(dir / "ok.json", R"({"network":{"context_length":3},"training":{"epochs":2}})");
    const PipelineConfig c = load_pipeline_config(dir / "ok.json");
    CHECK(c.network.context_length == 3);
    CHECK(c.training.epochs == 2);
    write_file(dir / "bad.json", R"({"netwrk":{}})");
    CHECK_THROWS_AS(load_pipeline_config(dir / "bad.json"), ConfigError);

    PipelineConfig o;
    apply_overrides(o, {1, std::string("avgpool3"), 5, 9, 7});
    CHECK(o.network.context_length == 1);
    CHECK(o.network.aggregation == Aggregation::avgpool_3x3);
    CHECK(o.network.spatial_kernel == 5);
    CHECK(o.training.seed == 9);
    CHECK(o.training.epochs == 7);
}
