#include "personaforge/providers.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "personaforge/io.hpp"
#include "personaforge/text_util.hpp"

namespace personaforge {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string cache_key(const ChatRequest& request) {
    std::string buf;
    auto field = [&](std::string_view v) {
        buf += std::to_string(v.size());
        buf += ':';
        buf += v;
        buf += ';';
    };
    field("personaforge-chat-v1");
    field(request.model);
    field(request.system_prompt);
    field(request.user_prompt);
    field(request.temperature.text());
    return io::sha256_hex(buf);
}

ProviderKind parse_provider_kind(std::string_view s) {
    auto f = text::fold_alnum(s);
    if (f == "openai") return ProviderKind::OpenAI;
    if (f == "anthropic") return ProviderKind::Anthropic;
    if (f == "mistral") return ProviderKind::Mistral;
    if (f == "mock") return ProviderKind::Mock;
    throw ConfigError(fmt::format("unknown provider kind '{}'", s));
}

std::string_view to_string(ProviderKind k) noexcept {
    switch (k) {
    case ProviderKind::OpenAI: return "openai";
    case ProviderKind::Anthropic: return "anthropic";
    case ProviderKind::Mistral: return "mistral";
    case ProviderKind::Mock: return "mock";
    }
    return "?";
}

void ProviderConfig::validate() const {
    if (model.empty()) throw ConfigError(fmt::format("provider '{}' has no model", name));
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (timeout.count() <= 0) throw ConfigError("timeout must be > 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (retry_backoff.count() < 0 || min_request_interval.count() < 0) {
        throw ConfigError("durations must be non-negative");
    }
}

std::string ProviderConfig::effective_endpoint() const {
    if (!endpoint.empty()) return endpoint;
    switch (kind) {
    case ProviderKind::OpenAI: return "https://api.openai.com/v1/chat/completions";
    case ProviderKind::Anthropic: return "https://api.anthropic.com/v1/messages";
    case ProviderKind::Mistral: return "https://api.mistral.ai/v1/chat/completions";
    case ProviderKind::Mock: return "mock://";
    }
    return {};
}

std::string ProviderConfig::effective_credential_env() const {
    if (!credential_env.empty()) return credential_env;
    std::string suffix;
    for (char c : name.empty() ? std::string(to_string(kind)) : name) {
        auto u = static_cast<unsigned char>(c);
        suffix.push_back(std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_');
    }
    return "PERSONAFORGE_API_KEY_" + suffix;
}

ProviderConfig provider_config_from_json(const Json& j) {
    ProviderConfig c;
    c.name = j.value("name", std::string{});
    c.kind = parse_provider_kind(j.value("kind", std::string("mock")));
    c.endpoint = j.value("endpoint", std::string{});
    c.model = j.value("model", std::string{});
    c.credential_env = j.value("credential_env", std::string{});
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    c.max_retries = j.value("max_retries", 3);
    c.retry_backoff = std::chrono::milliseconds(j.value("retry_backoff_ms", 500));
    c.max_in_flight = j.value("max_in_flight", 1);
    c.min_request_interval = std::chrono::milliseconds(j.value("min_request_interval_ms", 0));
    c.mock_script = j.value("script", std::string{});
    if (c.name.empty()) c.name = std::string(to_string(c.kind));
    c.validate();
    return c;
}

Json to_json(const ProviderConfig& c) {
    Json j{{"name", c.name},
           {"kind", to_string(c.kind)},
           {"endpoint", c.effective_endpoint()},
           {"model", c.model},
           {"timeout_ms", c.timeout.count()},
           {"max_retries", c.max_retries},
           {"retry_backoff_ms", c.retry_backoff.count()},
           {"max_in_flight", c.max_in_flight},
           {"min_request_interval_ms", c.min_request_interval.count()}};
    if (c.kind == ProviderKind::Mock) {
        j["script"] = c.mock_script.filename().string();
    } else {
        j["credential_env"] = c.effective_credential_env();
    }
    return j;
}

// --- mock -----------------------------------------------------------------

MockProvider::MockProvider(Script script)
    : script_(std::move(script)), sequence_pos_(script_.rules.size(), 0) {}

MockProvider::MockProvider(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}

MockProvider::Script MockProvider::script_from_json(const Json& j) {
    Script s;
    if (j.contains("responses")) {
        for (auto it = j.at("responses").begin(); it != j.at("responses").end(); ++it) {
            s.responses.emplace(it.key(), it.value().get<std::string>());
        }
    }
    if (j.contains("rules")) {
        for (const auto& r : j.at("rules")) {
            Rule rule;
            rule.model = r.value("model", std::string{});
            rule.system_contains = r.value("system_contains", std::string{});
            rule.user_contains = r.value("user_contains", std::string{});
            if (r.contains("reply")) rule.replies.push_back(r.at("reply").get<std::string>());
            if (r.contains("replies")) {
                for (const auto& x : r.at("replies")) rule.replies.push_back(x.get<std::string>());
            }
            if (r.contains("sequence")) {
                for (const auto& x : r.at("sequence")) rule.sequence.push_back(x.get<std::string>());
            }
            rule.error = r.value("error", std::string{});
            if (rule.replies.empty() && rule.sequence.empty() && rule.error.empty()) {
                throw ConfigError("mock rule needs reply, replies, sequence or error");
            }
            s.rules.push_back(std::move(rule));
        }
    }
    if (j.contains("default")) s.default_reply = j.at("default").get<std::string>();
    return s;
}

MockProvider::Script MockProvider::load_script(const fs::path& path) {
    try {
        return script_from_json(Json::parse(io::read_file(path)));
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("mock script '{}': {}", path.string(), e.what()));
    }
}

ChatResponse MockProvider::complete(const ChatRequest& request) {
    auto start = Clock::now();
    if (request.system_prompt.empty() || request.user_prompt.empty()) {
        throw ValueError("chat prompts must be non-empty");
    }
    calls_.fetch_add(1);
    auto respond = [&](std::string text) {
        return ChatResponse{std::move(text), request.model,
                            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start),
                            false};
    };
    if (fn_) return respond(fn_(request));

    auto key = cache_key(request);
    if (auto it = script_.responses.find(key); it != script_.responses.end()) {
        return respond(it->second);
    }
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const auto& rule = script_.rules[i];
        if (!rule.model.empty() && rule.model != request.model) continue;
        if (request.system_prompt.find(rule.system_contains) == std::string::npos) continue;
        if (request.user_prompt.find(rule.user_contains) == std::string::npos) continue;
        if (rule.error == "auth") throw AuthError("mock: credential rejected");
        if (rule.error == "transport") throw TransportError("mock: connection failed");
        if (rule.error == "provider") throw ProviderError(500, "mock: scripted failure");
        if (!rule.error.empty()) throw ConfigError("mock: unknown error kind " + rule.error);
        if (!rule.sequence.empty()) {
            std::lock_guard lock(mutex_);
            auto& pos = sequence_pos_[i];
            auto idx = std::min(pos, rule.sequence.size() - 1);
            ++pos;
            return respond(rule.sequence[idx]);
        }
        auto seed = request.sample == 0 ? key : io::sha256_hex(fmt::format("{}#{}", key, request.sample));
        auto pick = std::stoull(seed.substr(0, 15), nullptr, 16) % rule.replies.size();
        return respond(rule.replies[pick]);
    }
    if (script_.default_reply) return respond(*script_.default_reply);
    throw ProviderError(404, "mock: no scripted response for request " + key);
}

// --- http -----------------------------------------------------------------

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

} // namespace

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    auto env = config_.effective_credential_env();
    const char* key = std::getenv(env.c_str());
    if (key == nullptr || *key == '\0') {
        throw AuthError(fmt::format("credential variable {} is not set", env));
    }
    api_key_ = key;
}

Json HttpProvider::build_body(ProviderKind kind, const ChatRequest& request) {
    if (kind == ProviderKind::Anthropic) {
        return Json{{"model", request.model},
                    {"system", request.system_prompt},
                    {"messages", Json::array({Json{{"role", "user"}, {"content", request.user_prompt}}})},
                    {"max_tokens", request.max_output_hint.value_or(1024)},
                    {"temperature", request.temperature.value()}};
    }
    Json body{{"model", request.model},
              {"messages", Json::array({Json{{"role", "system"}, {"content", request.system_prompt}},
                                        Json{{"role", "user"}, {"content", request.user_prompt}}})},
              {"temperature", request.temperature.value()}};
    if (request.max_output_hint) body["max_tokens"] = *request.max_output_hint;
    return body;
}

std::string HttpProvider::extract_text(ProviderKind kind, const Json& body) {
    try {
        if (kind == ProviderKind::Anthropic) {
            std::string out;
            for (const auto& block : body.at("content")) {
                if (block.value("type", std::string{}) == "text") out += block.at("text").get<std::string>();
            }
            return out;
        }
        const auto& content = body.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const Json::exception& e) {
        throw ProviderError(200, fmt::format("unexpected response shape ({}): {}", e.what(), body.dump()));
    }
}

ChatResponse HttpProvider::complete(const ChatRequest& request) {
    if (request.system_prompt.empty() || request.user_prompt.empty()) {
        throw ValueError("chat prompts must be non-empty");
    }
    auto url = split_url(config_.effective_endpoint());
    httplib::Client client(url.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (config_.kind == ProviderKind::Anthropic) {
        headers.emplace("x-api-key", api_key_);
        headers.emplace("anthropic-version", "2023-06-01");
    } else {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto body = build_body(config_.kind, request).dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.retry_backoff * (1 << (attempt - 1)));
        auto start = Clock::now();
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError(fmt::format("credential rejected (HTTP {}): {}", res->status, res->body));
        }
        if (transient_status(res->status)) {
            last_error = fmt::format("HTTP {}: {}", res->status, res->body);
            continue;
        }
        if (res->status < 200 || res->status >= 300) throw ProviderError(res->status, res->body);
        Json parsed;
        try {
            parsed = Json::parse(res->body);
        } catch (const Json::parse_error&) {
            throw ProviderError(res->status, res->body);
        }
        return ChatResponse{extract_text(config_.kind, parsed), request.model,
                            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start),
                            false};
    }
    throw TransportError(fmt::format("{} failed after {} attempts: {}", config_.effective_endpoint(),
                                     config_.max_retries + 1, last_error));
}

// --- cache ----------------------------------------------------------------

ResponseCache::ResponseCache(fs::path root) : root_(std::move(root)) {}

fs::path ResponseCache::path_for(const std::string& model, const std::string& key, int sample) const {
    std::string dir;
    for (char c : model) {
        auto u = static_cast<unsigned char>(c);
        dir.push_back(std::isalnum(u) || c == '-' || c == '.' || c == '_' ? c : '_');
    }
    if (dir.empty() || dir == "." || dir == "..") dir = "_";
    return root_ / dir / (sample == 0 ? key + ".json" : fmt::format("{}.{}.json", key, sample));
}

std::optional<std::string> ResponseCache::get(const ChatRequest& request, const std::string& key) const {
    auto p = path_for(request.model, key, request.sample);
    if (!fs::exists(p)) return std::nullopt;
    try {
        auto j = Json::parse(io::read_file(p));
        // The model check guards against two model names sanitising to one directory.
        if (j.value("model", std::string{}) != request.model || j.value("key", std::string{}) != key ||
            j.value("sample", 0) != request.sample) {
            return std::nullopt;
        }
        return j.at("text").get<std::string>();
    } catch (const std::exception&) {
        return std::nullopt; // a torn or foreign file is a miss
    }
}

void ResponseCache::put(const ChatRequest& request, const std::string& key, const std::string& text) const {
    Json j{{"key", key},
           {"model", request.model},
           {"temperature", request.temperature.text()},
           {"system_prompt", request.system_prompt},
           {"user_prompt", request.user_prompt},
           {"sample", request.sample},
           {"text", text}};
    io::write_file(path_for(request.model, key, request.sample), j.dump(2));
}

CachingProvider::CachingProvider(std::shared_ptr<ChatProvider> inner, fs::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {}

std::mutex& CachingProvider::stripe(const std::string& key) {
    return stripes_[std::stoul(key.substr(0, 4), nullptr, 16) % stripes_.size()];
}

ChatResponse CachingProvider::complete(const ChatRequest& request) {
    auto key = cache_key(request);
    std::lock_guard lock(stripe(key));
    if (auto hit = cache_.get(request, key)) {
        hits_.fetch_add(1);
        return ChatResponse{*hit, request.model, std::chrono::milliseconds{0}, true};
    }
    calls_.fetch_add(1);
    auto response = inner_->complete(request);
    cache_.put(request, key, response.text);
    response.from_cache = false;
    return response;
}

ProviderStats CachingProvider::stats() const noexcept { return {calls_.load(), hits_.load()}; }

// --- throttle -------------------------------------------------------------

ThrottledProvider::ThrottledProvider(std::shared_ptr<ChatProvider> inner, int max_in_flight,
                                     std::chrono::milliseconds min_interval)
    : inner_(std::move(inner)), max_in_flight_(max_in_flight), min_interval_(min_interval) {
    if (max_in_flight_ < 1) throw ConfigError("max_in_flight must be >= 1");
}

ChatResponse ThrottledProvider::complete(const ChatRequest& request) {
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
        ++in_flight_;
        int now_in_flight = in_flight_;
        int prev = peak_.load();
        while (now_in_flight > prev && !peak_.compare_exchange_weak(prev, now_in_flight)) {
        }
        if (min_interval_.count() > 0) {
            auto now = Clock::now();
            auto start_at = std::max(now, next_start_);
            next_start_ = start_at + min_interval_;
            lock.unlock();
            std::this_thread::sleep_until(start_at);
        }
    }
    struct Release {
        ThrottledProvider* self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->in_flight_;
            }
            self->cv_.notify_one();
        }
    } release{this};
    return inner_->complete(request);
}

// --- factories ------------------------------------------------------------

std::shared_ptr<ChatProvider> make_provider(const ProviderConfig& config) {
    config.validate();
    if (config.kind == ProviderKind::Mock) {
        if (config.mock_script.empty()) throw ConfigError("mock provider needs a 'script' path");
        return std::make_shared<MockProvider>(MockProvider::load_script(config.mock_script));
    }
    return std::make_shared<HttpProvider>(config);
}

ProviderStack make_provider_stack(const ProviderConfig& config, const fs::path& cache_dir) {
    ProviderStack stack;
    auto raw = make_provider(config);
    std::shared_ptr<ChatProvider> inner = raw;
    if (!cache_dir.empty()) {
        stack.cache = std::make_shared<CachingProvider>(raw, cache_dir);
        inner = stack.cache;
    }
    stack.provider = std::make_shared<ThrottledProvider>(inner, config.max_in_flight,
                                                         config.min_request_interval);
    return stack;
}

ChatResponse complete(const ProviderConfig& config, const ChatRequest& request) {
    return make_provider(config)->complete(request);
}

} // namespace personaforge
