#include "wasrt/checkpoint.hpp"

#include <fstream>

#include "wasrt/config_io.hpp"
#include "wasrt/errors.hpp"

namespace wasrt {

using nlohmann::json;

void save_checkpoint(const Network& net, const fs::path& path) {
    json j;
    j["format"] = "wasrt-checkpoint";
    j["version"] = 1;
    j["config"] = net.config();
    json params = json::object();
    for (const auto& [name, t] : net.params())
        params[name] = {{"shape", t.shape()}, {"data", std::vector<Real>(t.values().begin(), t.values().end())}};
    j["parameters"] = std::move(params);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write checkpoint " + path.string());
    f << j.dump() << '\n';
    if (!f) throw IoError("failed writing checkpoint " + path.string());
}

Network load_checkpoint(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "wasrt-checkpoint" || j.value("version", 0) != 1)
        throw SchemaError(path.string() + " is not a version-1 wasrt checkpoint");
    NetworkConfig cfg = j.at("config").get<NetworkConfig>();
    Parameters params;
    try {
        for (const auto& [name, rec] : j.at("parameters").items()) {
            Tensor t(rec.at("shape").get<std::vector<int>>());
            const auto data = rec.at("data").get<std::vector<Real>>();
            if (data.size() != t.size())
                throw SchemaError("parameter '" + name + "' has " + std::to_string(data.size()) +
                                  " values for shape " + shape_string(t.shape()));
            std::copy(data.begin(), data.end(), t.data());
            params.emplace(name, std::move(t));
        }
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
    return Network(std::move(cfg), std::move(params));
}

}  // namespace wasrt
