// wasrt: synthesize corpora, train, infer, evaluate, run ablation grids and
// render comparison tables.
//
// Exit codes: 0 ok, 1 usage/configuration error, 2 data error (missing or
// malformed input), 3 runtime failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wasrt/commands.hpp"
#include "wasrt/config_io.hpp"
#include "wasrt/errors.hpp"

namespace {

using namespace wasrt;
using namespace wasrt::cli;

struct CommonFlags {
    std::string config;
    std::optional<int> t;
    std::optional<std::string> aggregation;
    std::optional<int> kernel;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON config with network/training/evaluation sections")
            ->check(CLI::ExistingFile);
        app.add_option("--t", t, "context length T");
        app.add_option("--aggregation", aggregation, "temporal aggregation")
            ->check(CLI::IsMember({"conv3d", "avgpool1", "avgpool3"}));
        app.add_option("--kernel", kernel, "spatial kernel of the 3D convolution")->check(CLI::IsMember({1, 3, 5}));
        app.add_option("--seed", seed, "training seed");
        app.add_option("--epochs", epochs, "training epochs");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg = load_pipeline_config(config.empty() ? std::nullopt : std::optional<fs::path>(config));
        apply_overrides(cfg, {t, aggregation, kernel, seed, epochs});
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal water segmentation toolkit"};
    app.require_subcommand(1);

    std::string manifest, out, spec, checkpoint, pred_dir, frames, test_manifest;
    std::vector<std::string> grid_items, logs;
    bool with_published = false;
    CommonFlags common;

    auto* synth = app.add_subcommand("synth", "render a synthetic corpus from a spec file");
    synth->add_option("spec", spec, "synthesis spec (JSON)")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "train a network on a manifest");
    train_cmd->add_option("--manifest", manifest, "training manifest")->required();
    train_cmd->add_option("--out", out, "checkpoint path")->required();
    common.attach(*train_cmd);

    auto* infer = app.add_subcommand("infer", "stream frames through a trained network");
    infer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    auto* infer_src = infer->add_option_group("source");
    infer_src->add_option("--manifest", manifest, "manifest whose target frames get masks");
    infer_src->add_option("--frames", frames, "directory of ordered frame PNGs");
    infer_src->require_option(1);
    infer->add_option("--out", out, "mask output directory")->required();

    auto* eval = app.add_subcommand("eval", "score predicted masks against a manifest");
    eval->add_option("--predictions", pred_dir, "directory of predicted masks")->required();
    eval->add_option("--manifest", manifest, "ground-truth manifest")->required();
    eval->add_option("--out", out, "report directory")->required();
    std::string eval_config;
    eval->add_option("--config", eval_config, "JSON config; its evaluation section is used")->check(CLI::ExistingFile);

    auto* ablate = app.add_subcommand("ablate", "train and evaluate a grid of configurations");
    ablate->add_option("--manifest", manifest, "training manifest")->required();
    ablate->add_option("--test-manifest", test_manifest, "held-out evaluation manifest")->required();
    ablate->add_option("--grid", grid_items, "grid points T:aggregation:kernel, e.g. 5:conv3d:3")->required();
    ablate->add_option("--out", out, "output directory")->required();
    common.attach(*ablate);

    auto* report = app.add_subcommand("report", "comparison table from evaluation run logs");
    report->add_option("logs", logs, "runs.jsonl files")->required()->check(CLI::ExistingFile);
    report->add_flag("--published", with_published, "prepend the published reference rows");
    report->add_option("--out", out, "also write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*synth) {
            std::cout << cmd_synth(spec, out).string() << '\n';
        } else if (*train_cmd) {
            const TrainOutcome o = cmd_train(manifest, common.resolve(), out);
            std::cout << "wrote " << o.checkpoint.string() << " after " << o.steps << " steps, final loss "
                      << o.final_loss << '\n';
        } else if (*infer) {
            if (!frames.empty())
                cmd_infer_frames(checkpoint, frames, out);
            else
                cmd_infer(checkpoint, manifest, out);
        } else if (*eval) {
            const PipelineConfig cfg =
                load_pipeline_config(eval_config.empty() ? std::nullopt : std::optional<fs::path>(eval_config));
            cmd_eval(pred_dir, manifest, cfg.evaluation, out);
            std::ifstream txt(fs::path(out) / "report.txt");
            std::cout << txt.rdbuf();
        } else if (*ablate) {
            std::vector<GridPoint> grid;
            for (const auto& g : grid_items) grid.push_back(parse_grid_point(g));
            const auto rows = cmd_ablate(manifest, test_manifest, grid, common.resolve(), out);
            std::cout << format_ablation_table(rows);
        } else if (*report) {
            std::vector<fs::path> paths(logs.begin(), logs.end());
            const std::string table = cmd_report(paths, with_published);
            std::cout << table;
            if (!out.empty()) {
                std::ofstream f(out);
                if (!f) throw IoError("cannot write " + out);
                f << table;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return exit_ok;
}
