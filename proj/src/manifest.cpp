#include "vpl/manifest.hpp"

#include <json.hpp>

#include "vpl/common.hpp"

namespace vpl {

std::string build_manifest(const std::string& command, const std::string& resolved_config_json,
                           const ManifestInputs& inputs) {
    nlohmann::json manifest;
    manifest["tool"] = kToolName;
    manifest["version"] = kToolVersion;
    manifest["command"] = command;
    manifest["config"] = resolved_config_json.empty()
                             ? nlohmann::json::object()
                             : nlohmann::json::parse(resolved_config_json);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [label, path] : inputs) {
        nlohmann::json entry;
        entry["label"] = label;
        entry["path"] = path;
        entry["fnv1a64"] = hex_digest(fnv1a64(read_file(path)));
        files.push_back(entry);
    }
    manifest["inputs"] = files;
    return manifest.dump(2) + "\n";
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& resolved_config_json, const ManifestInputs& inputs) {
    write_file(path, build_manifest(command, resolved_config_json, inputs));
}

}  // namespace vpl
