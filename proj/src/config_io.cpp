#include "wasrt/config_io.hpp"

#include <fstream>
#include <set>

#include "wasrt/errors.hpp"

namespace wasrt {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError(std::string("unknown ") + what + " config key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

void to_json(json& j, const NetworkConfig& c) {
    json stages = json::array();
    for (const auto& s : c.encoder) stages.push_back({{"channels", s.channels}, {"stride", s.stride}});
    j = json{{"context_length", c.context_length}, {"deep_channels", c.deep_channels},
             {"encoder", stages},                  {"num_classes", c.num_classes},
             {"aggregation", to_string(c.aggregation)}, {"spatial_kernel", c.spatial_kernel}};
}

void from_json(const json& j, NetworkConfig& c) {
    reject_unknown(j, {"context_length", "deep_channels", "encoder", "num_classes", "aggregation", "spatial_kernel"},
                   "network");
    read(j, "context_length", c.context_length);
    read(j, "deep_channels", c.deep_channels);
    read(j, "num_classes", c.num_classes);
    read(j, "spatial_kernel", c.spatial_kernel);
    if (j.contains("aggregation")) c.aggregation = aggregation_from_string(j["aggregation"].get<std::string>());
    if (j.contains("encoder")) {
        c.encoder.clear();
        for (const auto& s : j["encoder"]) {
            reject_unknown(s, {"channels", "stride"}, "encoder stage");
            EncoderStage st;
            read(s, "channels", st.channels);
            read(s, "stride", st.stride);
            c.encoder.push_back(st);
        }
    }
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"steps_per_epoch", c.steps_per_epoch},
             {"learning_rate",
              {{"base", c.learning_rate.base}, {"step_epochs", c.learning_rate.step_epochs}, {"gamma", c.learning_rate.gamma}}},
             {"seed", c.seed},
             {"separation_loss_weight", c.separation_loss_weight},
             {"augmentation",
              {{"horizontal_flip", c.augmentation.horizontal_flip},
               {"flip_probability", c.augmentation.flip_probability},
               {"photometric", c.augmentation.photometric},
               {"brightness", c.augmentation.brightness},
               {"contrast", c.augmentation.contrast}}},
             {"grad_context_depth", c.grad_context_depth},
             {"equal_subset_sampling", c.equal_subset_sampling}};
}

void from_json(const json& j, TrainConfig& c) {
    reject_unknown(j,
                   {"epochs", "batch_size", "steps_per_epoch", "learning_rate", "seed", "separation_loss_weight",
                    "augmentation", "grad_context_depth", "equal_subset_sampling"},
                   "training");
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "steps_per_epoch", c.steps_per_epoch);
    read(j, "seed", c.seed);
    read(j, "separation_loss_weight", c.separation_loss_weight);
    read(j, "grad_context_depth", c.grad_context_depth);
    read(j, "equal_subset_sampling", c.equal_subset_sampling);
    if (j.contains("learning_rate")) {
        const json& lr = j["learning_rate"];
        if (lr.is_number()) {
            c.learning_rate.base = lr.get<double>();
        } else {
            reject_unknown(lr, {"base", "step_epochs", "gamma"}, "learning_rate");
            read(lr, "base", c.learning_rate.base);
            read(lr, "step_epochs", c.learning_rate.step_epochs);
            read(lr, "gamma", c.learning_rate.gamma);
        }
    }
    if (j.contains("augmentation")) {
        const json& a = j["augmentation"];
        reject_unknown(a, {"horizontal_flip", "flip_probability", "photometric", "brightness", "contrast"},
                       "augmentation");
        read(a, "horizontal_flip", c.augmentation.horizontal_flip);
        read(a, "flip_probability", c.augmentation.flip_probability);
        read(a, "photometric", c.augmentation.photometric);
        read(a, "brightness", c.augmentation.brightness);
        read(a, "contrast", c.augmentation.contrast);
    }
}

void to_json(json& j, const EvalConfig& c) {
    j = json{{"coverage_threshold", c.coverage_threshold},
             {"edge_tolerance", c.edge_tolerance},
             {"min_fp_area", c.min_fp_area},
             {"danger_zone_source", c.danger_zone_source == DangerZoneSource::annotation ? "annotation" : "none"},
             {"pool_edge_points", c.pool_edge_points}};
}

void from_json(const json& j, EvalConfig& c) {
    reject_unknown(j, {"coverage_threshold", "edge_tolerance", "min_fp_area", "danger_zone_source", "pool_edge_points"},
                   "evaluation");
    read(j, "coverage_threshold", c.coverage_threshold);
    read(j, "edge_tolerance", c.edge_tolerance);
    read(j, "min_fp_area", c.min_fp_area);
    read(j, "pool_edge_points", c.pool_edge_points);
    if (j.contains("danger_zone_source")) {
        const auto s = j["danger_zone_source"].get<std::string>();
        if (s == "annotation")
            c.danger_zone_source = DangerZoneSource::annotation;
        else if (s == "none")
            c.danger_zone_source = DangerZoneSource::none;
        else
            throw ConfigError("danger_zone_source must be 'annotation' or 'none'");
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
}

}  // namespace wasrt
