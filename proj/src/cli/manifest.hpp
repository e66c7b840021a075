#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge::cli {

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string subcommand;
    Json config;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
    std::vector<std::string> warnings;

    /// Hash of subcommand, configuration and input digests.
    std::string run_id() const;
    Json to_json(const std::string& timestamp) const;
};

/// UTC ISO-8601; honours SOURCE_DATE_EPOCH.
std::string manifest_timestamp();

} // namespace personaforge::cli
