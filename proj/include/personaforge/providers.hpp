#pragma once

// Chat-completion providers. Every pipeline stage talks to a ChatProvider;
// concrete providers are the three commercial HTTP wire formats plus a
// scripted mock, wrapped by a content-addressed response cache and a
// per-provider concurrency limiter.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "personaforge/domain.hpp"

namespace personaforge {

struct ChatRequest {
    std::string model;
    std::string system_prompt;
    std::string user_prompt;
    Temperature temperature = Temperature::parse("0");
    std::optional<int> max_output_hint;
    /// Index of a repeated identical request (questionnaire repetitions). Not
    /// part of cache_key; it selects a separate cache slot per repetition.
    int sample = 0;
};

struct ChatResponse {
    std::string text;
    std::string model;
    std::chrono::milliseconds latency{0};
    bool from_cache = false;
};

/// Stable SHA-256 over (model, system prompt, user prompt, temperature text).
/// Fields are length-prefixed, so no two distinct requests share an encoding.
std::string cache_key(const ChatRequest& request);

enum class ProviderKind { OpenAI, Anthropic, Mistral, Mock };

ProviderKind parse_provider_kind(std::string_view s);
std::string_view to_string(ProviderKind k) noexcept;

struct ProviderConfig {
    std::string name;
    ProviderKind kind = ProviderKind::Mock;
    /// Full chat endpoint URL; empty selects the family's public endpoint.
    std::string endpoint;
    std::string model;
    /// Environment variable holding the API key (PERSONAFORGE_API_KEY_<NAME> by default).
    std::string credential_env;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds retry_backoff{500};
    int max_in_flight = 1;
    /// Minimum spacing between request starts; zero disables spacing.
    std::chrono::milliseconds min_request_interval{0};
    /// Mock only: path of the JSON script.
    std::filesystem::path mock_script;

    /// Throws ConfigError when retries < 0, timeout <= 0 or max_in_flight < 1.
    void validate() const;
    std::string effective_endpoint() const;
    std::string effective_credential_env() const;
};

ProviderConfig provider_config_from_json(const Json& j);
Json to_json(const ProviderConfig& c);

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Deterministic provider driven by a script. Resolution order for a request:
/// exact cache-key responses, then the first matching rule, then the default.
/// Requests that match nothing raise ProviderError(404).
class MockProvider final : public ChatProvider {
public:
    struct Rule {
        std::string model;            // empty matches any model
        std::string system_contains;  // empty matches anything
        std::string user_contains;
        std::vector<std::string> replies;  // one is picked by request hash
        std::vector<std::string> sequence; // consumed in order, last one repeats
        std::string error;                 // "auth" | "transport" | "provider"
    };
    struct Script {
        std::map<std::string, std::string> responses;
        std::vector<Rule> rules;
        std::optional<std::string> default_reply;
    };

    explicit MockProvider(Script script);
    explicit MockProvider(std::function<std::string(const ChatRequest&)> fn);

    static Script load_script(const std::filesystem::path& path);
    static Script script_from_json(const Json& j);

    ChatResponse complete(const ChatRequest& request) override;
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    Script script_;
    std::function<std::string(const ChatRequest&)> fn_;
    std::mutex mutex_;
    std::vector<std::size_t> sequence_pos_;
    std::atomic<std::size_t> calls_{0};
};

/// OpenAI-, Anthropic- and Mistral-compatible chat endpoints over HTTP(S).
/// Retries transport failures, 429 and 5xx with exponential backoff.
class HttpProvider final : public ChatProvider {
public:
    /// Reads the credential now; throws AuthError if it is unset.
    explicit HttpProvider(ProviderConfig config);
    ChatResponse complete(const ChatRequest& request) override;

    /// Request body for the configured wire format.
    static Json build_body(ProviderKind kind, const ChatRequest& request);
    /// Extracts the completion text from a 2xx response body.
    static std::string extract_text(ProviderKind kind, const Json& body);

private:
    ProviderConfig config_;
    std::string api_key_;
};

/// Directory of `<model>/<key>.json` files.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);
    std::optional<std::string> get(const ChatRequest& request, const std::string& key) const;
    void put(const ChatRequest& request, const std::string& key, const std::string& text) const;
    std::filesystem::path path_for(const std::string& model, const std::string& key,
                                   int sample = 0) const;

private:
    std::filesystem::path root_;
};

struct ProviderStats {
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
};

class CachingProvider final : public ChatProvider {
public:
    CachingProvider(std::shared_ptr<ChatProvider> inner, std::filesystem::path cache_dir);
    ChatResponse complete(const ChatRequest& request) override;
    ProviderStats stats() const noexcept;

private:
    std::mutex& stripe(const std::string& key);

    std::shared_ptr<ChatProvider> inner_;
    ResponseCache cache_;
    std::array<std::mutex, 64> stripes_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> hits_{0};
};

/// Bounds requests in flight and optionally spaces request starts.
class ThrottledProvider final : public ChatProvider {
public:
    ThrottledProvider(std::shared_ptr<ChatProvider> inner, int max_in_flight,
                      std::chrono::milliseconds min_interval = std::chrono::milliseconds{0});
    ChatResponse complete(const ChatRequest& request) override;
    int peak_in_flight() const noexcept { return peak_.load(); }

private:
    std::shared_ptr<ChatProvider> inner_;
    int max_in_flight_;
    std::chrono::milliseconds min_interval_;
    std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    std::atomic<int> peak_{0};
    std::chrono::steady_clock::time_point next_start_{};
};

/// Builds the raw provider for a config (no cache, no throttle).
std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config);

/// Full stack: throttle(cache(raw)). `cache_dir` empty disables caching.
struct ProviderStack {
    std::shared_ptr<ChatProvider> provider;
    std::shared_ptr<CachingProvider> cache;  // null when caching is off
};
ProviderStack make_provider_stack(const ProviderConfig& config,
                                  const std::filesystem::path& cache_dir);

/// One-shot call through a freshly built provider.
ChatResponse complete(const ProviderConfig& config, const ChatRequest& request);

} // namespace personaforge
