#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vpl {

// (label, path) pairs; the manifest records each file's content digest so an
// identical re-run can be verified.
using ManifestInputs = std::vector<std::pair<std::string, std::string>>;

std::string build_manifest(const std::string& command, const std::string& resolved_config_json,
                           const ManifestInputs& inputs);

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& resolved_config_json, const ManifestInputs& inputs);

}  // namespace vpl
