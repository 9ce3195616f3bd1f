#pragma once

#include <json.hpp>

#include <string>

namespace htgfd {

// hex SHA-256 of a file's content
std::string file_sha256(const std::string& path);

// Run manifest written next to every artifact-producing command: the exact
// config, the seed, and content hashes of the inputs, so a run can be
// reproduced byte for byte.
nlohmann::json make_run_manifest(const std::string& command,
                                 const nlohmann::json& config,
                                 const std::vector<std::string>& input_files);

void write_json(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json(const std::string& path);

}  // namespace htgfd
