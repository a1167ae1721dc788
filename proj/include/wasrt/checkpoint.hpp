#pragma once

#include "wasrt/datamodel.hpp"
#include "wasrt/network.hpp"

namespace wasrt {

/// Checkpoint file: one JSON document
///   {"format":"wasrt-checkpoint","version":1,"config":{...NetworkConfig...},
///    "parameters":{"<name>":{"shape":[...],"data":[...]}, ...}}
/// Values are written with round-trip precision, so save/load is bit-exact.
void save_checkpoint(const Network& net, const fs::path& path);

/// Throws IoError/SchemaError on unreadable or malformed files and ConfigError
/// when a parameter shape disagrees with the embedded config.
Network load_checkpoint(const fs::path& path);

}  // namespace wasrt
