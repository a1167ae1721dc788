#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wasrt/datamodel.hpp"
#include "wasrt/evaluation.hpp"
#include "wasrt/network.hpp"
#include "wasrt/report.hpp"
#include "wasrt/training.hpp"

namespace wasrt::cli {

/// Process exit codes.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_runtime = 3 };

/// Maps the exception categories onto exit codes.
int exit_code_for(const std::exception& e);

/// One line of the append-only run log. The config snapshot plus the seed are
/// enough to regenerate the command's outputs.
struct RunRecord {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string started;   // ISO-8601 UTC
    std::string finished;
    std::vector<std::string> outputs;
    nlohmann::json metrics = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

void append_run_record(const RunRecord& record, const fs::path& log);
std::vector<RunRecord> read_run_records(const fs::path& log);

std::string utc_timestamp();

/// Combined configuration file: {"network":{...},"training":{...},"evaluation":{...}},
/// each section optional. Command-line overrides are applied on top.
struct PipelineConfig {
    NetworkConfig network;
    TrainConfig training;
    EvalConfig evaluation;
};
PipelineConfig load_pipeline_config(const std::optional<fs::path>& path);
nlohmann::json to_json(const PipelineConfig& c);

struct Overrides {
    std::optional<int> context_length;
    std::optional<std::string> aggregation;
    std::optional<int> spatial_kernel;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};
void apply_overrides(PipelineConfig& cfg, const Overrides& o);

/// Worker count for grid commands: WASRT_WORKERS if set (>= 1), else 1.
int worker_count();

// ----------------------------------------------------------------- commands

/// Synthesis spec file:
///   {"context_length":5, "pad_sequence_start":false, "max_entries_per_sequence":0,
///    "random":{CorpusRecipe}, "scenes":[SceneSpec,...]}
/// Random scenes come first, explicit scenes after. Returns the manifest path.
fs::path cmd_synth(const fs::path& spec_file, const fs::path& out_dir);

struct TrainOutcome {
    fs::path checkpoint;
    double final_loss = 0;
    int steps = 0;
};
/// Trains on every manifest entry; writes the checkpoint, a JSONL loss log
/// next to it, and one run record.
TrainOutcome cmd_train(const fs::path& manifest, const PipelineConfig& cfg, const fs::path& out_checkpoint);

/// Streams each manifest sequence through the checkpoint's network and writes
/// one mask PNG per target frame under out_dir, mirroring the target paths,
/// plus out_dir/timing.jsonl with one record per processed frame.
void cmd_infer(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out_dir);
/// Same for a directory of frame PNGs processed in file-name order.
void cmd_infer_frames(const fs::path& checkpoint, const fs::path& frame_dir, const fs::path& out_dir);

/// Reads predicted masks (same relative paths as the manifest targets) and
/// writes report.json and report.txt into out_dir.
DetectionReport cmd_eval(const fs::path& pred_dir, const fs::path& manifest, const EvalConfig& cfg,
                         const fs::path& out_dir);

struct GridPoint {
    int context_length = 5;
    Aggregation aggregation = Aggregation::conv3d;
    int spatial_kernel = 3;
    std::string label() const;
};
/// Parses "T:aggregation:kernel" items, e.g. "5:conv3d:3".
GridPoint parse_grid_point(const std::string& s);

/// Trains each grid point with the same training budget and seed, evaluates on
/// the test manifest, and writes ablation.txt / ablation.json into out_dir.
/// Grid points run on worker_count() workers, each in its own subdirectory.
std::vector<AblationRow> cmd_ablate(const fs::path& train_manifest, const fs::path& test_manifest,
                                    const std::vector<GridPoint>& grid, const PipelineConfig& base,
                                    const fs::path& out_dir);

/// Comparison table from the metric summaries of stored run records (eval
/// runs), optionally preceded by the published reference rows.
std::string cmd_report(const std::vector<fs::path>& run_logs, bool with_published);

}  // namespace wasrt::cli
