#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "occ/data.hpp"
#include "occ/trainer.hpp"

namespace occ {

struct OracleSettings {
    std::string mode = "simulated";  // simulated | interactive | none
    char orientation = 'A';
    double timeout_s = 60.0;
    std::size_t queue_capacity = 16;
    std::string bind = "127.0.0.1";
    int port = 8080;
};

/// A whole run: data source, training/query settings, oracle and output.
struct RunConfigFile {
    std::optional<SyntheticSpec> synthetic;  // used when `data_path` is empty
    std::filesystem::path data_path;
    TrainConfig train;
    OracleSettings oracle;
    std::filesystem::path output_dir = "occ_out";
};

/// Settings for desk-scale runs: 60 epochs at learning rate 1e-3, queries
/// paced by the budget alone, default synthetic data.
RunConfigFile desk_defaults();

/// Validates `doc` against the schema and fills `base` from it. Unknown keys
/// and wrong types are ConfigError.
RunConfigFile run_config_from_json(const nlohmann::json& doc, RunConfigFile base = desk_defaults());
nlohmann::json to_json(const RunConfigFile& config);

/// Sets `doc[a][b]... = value` for a dot path "a.b". The value is read as
/// JSON when it parses, as a plain string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dotted, const std::string& value);

/// Reads the file (or starts empty when `path` is empty), applies overrides
/// in order, then OCC_OUT_DIR, and validates.
RunConfigFile load_run_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

Dataset load_run_data(const RunConfigFile& config);

/// Hash of the normalized config, embedded in every report.
std::uint64_t config_hash(const RunConfigFile& config);

}  // namespace occ
