#include "manifest.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "personaforge/io.hpp"

namespace personaforge::cli {

std::string RunManifest::run_id() const {
    std::string material = subcommand + "\n" + config.dump() + "\n";
    for (const auto& in : inputs) material += in.path + " " + in.sha256 + "\n";
    return io::sha256_hex(material).substr(0, 16);
}

Json RunManifest::to_json(const std::string& timestamp) const {
    auto files = [](const std::vector<FileDigest>& v) {
        Json a = Json::array();
        for (const auto& f : v) a.push_back(Json{{"path", f.path}, {"sha256", f.sha256}});
        return a;
    };
    return Json{{"run_id", run_id()},
                {"timestamp", timestamp},
                {"subcommand", subcommand},
                {"config", config},
                {"inputs", files(inputs)},
                {"outputs", files(outputs)},
                {"provider_calls", provider_calls},
                {"cache_hits", cache_hits},
                {"warnings", warnings}};
}

std::string manifest_timestamp() {
    std::time_t t = 0;
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (epoch != nullptr && *epoch != '\0') {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

} // namespace personaforge::cli
