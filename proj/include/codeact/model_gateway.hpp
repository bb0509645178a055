// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codeact
{

/// Decoding parameters. Defaults are the benchmark's published inference settings.
struct SamplingParams
{
    int max_tokens = 8192;
    double temperature = 0.7;
    double top_p = 0.9;
    int best_of = 1;
    double repetition_penalty = 1.05;
    std::int64_t seed = 42;
    int num_samples = 5; // self-consistency n

    void validate() const
    {
        if (max_tokens <= 0)
            throw std::invalid_argument("max_tokens must be positive");
        if (!(temperature >= 0.0))
            throw std::invalid_argument("temperature must be non-negative");
        if (!(top_p > 0.0 && top_p <= 1.0))
            throw std::invalid_argument("top_p must lie in (0, 1]");
        if (best_of <= 0)
            throw std::invalid_argument("best_of must be positive");
        if (!(repetition_penalty > 0.0))
            throw std::invalid_argument("repetition_penalty must be positive");
        if (num_samples <= 0)
            throw std::invalid_argument("num_samples must be positive");
    }

    bool operator==(SamplingParams const&) const = default;
};

enum class Role
{
    system,
    user,
    assistant,
};

inline std::string_view to_string(Role r)
{
    switch (r)
    {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

struct ChatMessage
{
    Role role = Role::user;
    std::string content;

    bool operator==(ChatMessage const&) const = default;
};

enum class FinishReason
{
    stop,
    length,
    error,
};

inline std::string_view to_string(FinishReason f)
{
    switch (f)
    {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

inline std::optional<FinishReason> parse_finish_reason(std::string_view s)
{
    if (s == "stop")
        return FinishReason::stop;
    if (s == "length")
        return FinishReason::length;
    if (s == "error")
        return FinishReason::error;
    return std::nullopt;
}

struct TokenUsage
{
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(TokenUsage const&) const = default;
};

struct ModelReply
{
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    std::optional<TokenUsage> usage;

    bool operator==(ModelReply const&) const = default;
};

class GatewayError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Connection failure or timeout.
class TransportError: public GatewayError
{
  public:
    using GatewayError::GatewayError;
};

/// The backend answered with a non-2xx status, or refused the request.
class BackendError: public GatewayError
{
  public:
    BackendError(int status, std::string body):
        GatewayError(fmt::format("backend returned HTTP {}: {}", status, body)), _status(status), _body(std::move(body))
    {
    }

    explicit BackendError(std::string const& what): GatewayError(what) {}

    [[nodiscard]] int status() const noexcept { return _status; }
    [[nodiscard]] std::string const& body() const noexcept { return _body; }

  private:
    int _status = 0;
    std::string _body;
};

class ScriptExhausted: public BackendError
{
  public:
    ScriptExhausted(): BackendError(std::string("scripted mock backend: script exhausted")) {}
};

/// The response body could not be interpreted.
class ProtocolError: public GatewayError
{
  public:
    using GatewayError::GatewayError;
};

/// A chat-completion backend. Implementations must be safe for concurrent calls.
class Backend
{
  public:
    virtual ~Backend() = default;

    virtual ModelReply complete(std::span<ChatMessage const> messages, SamplingParams const& params) = 0;

    /// Exactly `n` independent samples; a failure anywhere fails the whole batch.
    virtual std::vector<ModelReply> complete_n(std::span<ChatMessage const> messages,
                                               SamplingParams const& params,
                                               int n)
    {
        if (n < 1)
            throw std::invalid_argument("complete_n: n must be >= 1");
        std::vector<ModelReply> out;
        out.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            out.push_back(complete(messages, params));
        return out;
    }
};

// {{{ scripted mock

struct ScriptEntry
{
    /// When set, the entry is eligible only if the last user message contains this substring.
    std::optional<std::string> when_contains;
    ModelReply reply;
};

/// Deterministic offline backend. Each call consumes the first unconsumed entry whose
/// condition holds against the conversation; unconditional entries always hold.
class ScriptedMock final: public Backend
{
  public:
    explicit ScriptedMock(std::vector<ScriptEntry> script): _script(std::move(script)), _used(_script.size(), false)
    {
        if (_script.empty())
            throw std::invalid_argument("scripted mock: script must not be empty");
    }

    static ScriptedMock from_replies(std::vector<std::string> const& texts)
    {
        std::vector<ScriptEntry> s;
        for (auto const& t: texts)
            s.push_back(ScriptEntry { std::nullopt, ModelReply { t, FinishReason::stop, std::nullopt } });
        return ScriptedMock(std::move(s));
    }

    ModelReply complete(std::span<ChatMessage const> messages, SamplingParams const&) override
    {
        if (messages.empty())
            throw std::invalid_argument("complete: messages must not be empty");
        auto const lock = std::scoped_lock(_mutex);
        ++_calls;
        return pop(messages);
    }

    std::vector<ModelReply> complete_n(std::span<ChatMessage const> messages,
                                       SamplingParams const&,
                                       int n) override
    {
        if (n < 1)
            throw std::invalid_argument("complete_n: n must be >= 1");
        if (messages.empty())
            throw std::invalid_argument("complete_n: messages must not be empty");
        auto const lock = std::scoped_lock(_mutex);
        ++_calls;
        std::vector<ModelReply> out;
        for (int i = 0; i < n; ++i)
            out.push_back(pop(messages));
        return out;
    }

    /// Number of replies handed out (a complete_n of n counts n).
    [[nodiscard]] std::size_t served() const
    {
        auto const lock = std::scoped_lock(_mutex);
        return _served;
    }

    /// A new mock over the same script with nothing consumed.
    [[nodiscard]] std::unique_ptr<ScriptedMock> fresh() const { return std::make_unique<ScriptedMock>(_script); }

    /// Number of complete / complete_n invocations so far.
    [[nodiscard]] std::size_t calls() const
    {
        auto const lock = std::scoped_lock(_mutex);
        return _calls;
    }

    [[nodiscard]] std::size_t remaining() const
    {
        auto const lock = std::scoped_lock(_mutex);
        return static_cast<std::size_t>(std::count(_used.begin(), _used.end(), false));
    }

  private:
    ModelReply pop(std::span<ChatMessage const> messages)
    {
        std::string_view last_user;
        for (auto it = messages.rbegin(); it != messages.rend(); ++it)
            if (it->role == Role::user)
            {
                last_user = it->content;
                break;
            }

        for (std::size_t i = 0; i < _script.size(); ++i)
        {
            if (_used[i])
                continue;
            auto const& cond = _script[i].when_contains;
            if (cond && last_user.find(*cond) == std::string_view::npos)
                continue;
            _used[i] = true;
            ++_served;
            return _script[i].reply;
        }
        throw ScriptExhausted();
    }

    std::vector<ScriptEntry> _script;
    std::vector<bool> _used;
    std::size_t _calls = 0;
    std::size_t _served = 0;
    mutable std::mutex _mutex;
};

/// Parses a mock script: one JSON object per line,
/// `{"text": str, "finish_reason"?: "stop"|"length"|"error", "when_contains"?: str}`.
inline std::vector<ScriptEntry> parse_script(std::istream& in, std::string const& source)
{
    std::vector<ScriptEntry> script;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos)
            continue;
        auto fail = [&](std::string_view why) {
            return std::runtime_error(fmt::format("{}:{}: {}", source, lineno, why));
        };
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(line);
        }
        catch (nlohmann::json::parse_error const& e)
        {
            throw fail(e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
            throw fail("script entry needs a string field 'text'");
        ScriptEntry e;
        e.reply.text = j["text"].get<std::string>();
        if (auto it = j.find("finish_reason"); it != j.end())
        {
            auto fr = it->is_string() ? parse_finish_reason(it->get<std::string>()) : std::nullopt;
            if (!fr)
                throw fail("finish_reason must be stop, length or error");
            e.reply.finish_reason = *fr;
        }
        if (auto it = j.find("when_contains"); it != j.end())
        {
            if (!it->is_string())
                throw fail("when_contains must be a string");
            e.when_contains = it->get<std::string>();
        }
        script.push_back(std::move(e));
    }
    if (script.empty())
        throw std::runtime_error(fmt::format("{}: mock script is empty", source));
    return script;
}

inline std::vector<ScriptEntry> load_script(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(fmt::format("cannot open mock script '{}'", path));
    return parse_script(in, path);
}

// }}}

// {{{ OpenAI-compatible HTTP backend

struct HttpBackendConfig
{
    std::string base_url = "http://localhost:8000";
    std::string model;
    std::string api_key; // taken from CODEACT_API_KEY by the CLI
    std::chrono::seconds timeout { 120 };
    bool send_repetition_penalty = true;
};

/// Chat-completion request body. `n` goes on the wire as the number of choices requested.
inline nlohmann::json build_chat_request(std::span<ChatMessage const> messages,
                                         SamplingParams const& params,
                                         std::string const& model,
                                         int n,
                                         bool include_repetition_penalty)
{
    auto msgs = nlohmann::json::array();
    for (auto const& m: messages)
        msgs.push_back({ { "role", to_string(m.role) }, { "content", m.content } });
    nlohmann::json body {
        { "model", model },
        { "messages", std::move(msgs) },
        { "max_tokens", params.max_tokens },
        { "temperature", params.temperature },
        { "top_p", params.top_p },
        { "best_of", params.best_of },
        { "seed", params.seed },
        { "n", n },
    };
    if (include_repetition_penalty)
        body["repetition_penalty"] = params.repetition_penalty;
    return body;
}

/// Extracts exactly `expected` replies from a chat-completion response body.
inline std::vector<ModelReply> parse_chat_response(std::string_view body, int expected)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(body);
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw ProtocolError(fmt::format("unparseable response body: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array())
        throw ProtocolError("response has no 'choices' array");

    auto const& choices = j["choices"];
    if (choices.size() != static_cast<std::size_t>(expected))
        throw ProtocolError(fmt::format("expected {} choices, got {}", expected, choices.size()));

    std::optional<TokenUsage> usage;
    if (auto it = j.find("usage"); it != j.end() && it->is_object())
        usage = TokenUsage { it->value("prompt_tokens", 0), it->value("completion_tokens", 0) };

    std::vector<ModelReply> out(choices.size());
    for (std::size_t i = 0; i < choices.size(); ++i)
    {
        auto const& c = choices[i];
        if (!c.is_object())
            throw ProtocolError("choice is not an object");
        auto const index = c.value("index", static_cast<int>(i));
        if (index < 0 || index >= expected)
            throw ProtocolError(fmt::format("choice index {} out of range", index));
        if (!c.contains("message") || !c["message"].is_object())
            throw ProtocolError("choice has no 'message' object");
        auto const& content = c["message"].value("content", nlohmann::json());
        ModelReply r;
        if (content.is_string())
            r.text = content.get<std::string>();
        else if (!content.is_null())
            throw ProtocolError("message content is not a string");
        auto fr = c.value("finish_reason", nlohmann::json());
        if (fr.is_string() && fr == "length")
            r.finish_reason = r.text.empty() ? FinishReason::error : FinishReason::length;
        else if (fr.is_null() || (fr.is_string() && fr == "stop"))
            r.finish_reason = FinishReason::stop;
        else
            r.finish_reason = FinishReason::error;
        r.usage = usage;
        out[static_cast<std::size_t>(index)] = std::move(r);
    }
    return out;
}

namespace detail
{
    struct SplitUrl
    {
        std::string origin; // scheme://host[:port]
        std::string prefix; // path without trailing slash
    };

    inline SplitUrl split_base_url(std::string_view url)
    {
        auto const scheme_end = url.find("://");
        if (scheme_end == std::string_view::npos)
            throw std::invalid_argument(fmt::format("base URL '{}' has no scheme", url));
        auto const path_start = url.find('/', scheme_end + 3);
        SplitUrl out;
        out.origin = std::string(url.substr(0, path_start));
        if (path_start != std::string_view::npos)
            out.prefix = std::string(url.substr(path_start));
        while (!out.prefix.empty() && out.prefix.back() == '/')
            out.prefix.pop_back();
        return out;
    }
} // namespace detail

/// Client for `{base_url}/v1/chat/completions`. No transport-level retries.
class HttpBackend final: public Backend
{
  public:
    explicit HttpBackend(HttpBackendConfig config):
        _config(std::move(config)),
        _url(detail::split_base_url(_config.base_url)),
        _send_repetition_penalty(_config.send_repetition_penalty)
    {
    }

    ModelReply complete(std::span<ChatMessage const> messages, SamplingParams const& params) override
    {
        return std::move(request(messages, params, 1).front());
    }

    std::vector<ModelReply> complete_n(std::span<ChatMessage const> messages,
                                       SamplingParams const& params,
                                       int n) override
    {
        if (n < 1)
            throw std::invalid_argument("complete_n: n must be >= 1");
        return request(messages, params, n);
    }

    /// Fails fast with TransportError when the server cannot be reached.
    void probe() const
    {
        auto client = make_client();
        auto res = client.Get(_url.prefix + "/v1/models", headers());
        if (!res)
            throw TransportError(fmt::format("{}: {}", _config.base_url, httplib::to_string(res.error())));
    }

    [[nodiscard]] HttpBackendConfig const& config() const noexcept { return _config; }

  private:
    [[nodiscard]] httplib::Client make_client() const
    {
        httplib::Client client(_url.origin);
        auto const secs = static_cast<time_t>(_config.timeout.count());
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        client.set_write_timeout(secs, 0);
        return client;
    }

    [[nodiscard]] httplib::Headers headers() const
    {
        httplib::Headers h;
        if (!_config.api_key.empty())
            h.emplace("Authorization", "Bearer " + _config.api_key);
        return h;
    }

    std::vector<ModelReply> request(std::span<ChatMessage const> messages, SamplingParams const& params, int n)
    {
        if (messages.empty())
            throw std::invalid_argument("complete: messages must not be empty");
        auto client = make_client();
        auto const path = _url.prefix + "/v1/chat/completions";

        for (;;)
        {
            bool const with_rp = _send_repetition_penalty.load();
            auto const body = build_chat_request(messages, params, _config.model, n, with_rp).dump();
            auto res = client.Post(path, headers(), body, "application/json");
            if (!res)
                throw TransportError(fmt::format("{}{}: {}", _url.origin, path, httplib::to_string(res.error())));
            if (res->status / 100 == 2)
                return parse_chat_response(res->body, n);
            // repetition_penalty is an extension field; strict servers reject it.
            if (with_rp && res->status == 400 && res->body.find("repetition_penalty") != std::string::npos)
            {
                spdlog::warn("backend rejected repetition_penalty; dropping it from further requests");
                _send_repetition_penalty = false;
                continue;
            }
            throw BackendError(res->status, res->body);
        }
    }

    HttpBackendConfig _config;
    detail::SplitUrl _url;
    std::atomic<bool> _send_repetition_penalty;
};

// }}}

/// Bounds the number of in-flight calls to a shared backend.
class LimitedBackend final: public Backend
{
  public:
    LimitedBackend(Backend& inner, std::counting_semaphore<>& slots): _inner(inner), _slots(slots) {}

    ModelReply complete(std::span<ChatMessage const> messages, SamplingParams const& params) override
    {
        Slot s(_slots);
        return _inner.complete(messages, params);
    }

    std::vector<ModelReply> complete_n(std::span<ChatMessage const> messages,
                                       SamplingParams const& params,
                                       int n) override
    {
        Slot s(_slots);
        return _inner.complete_n(messages, params, n);
    }

  private:
    struct Slot
    {
        explicit Slot(std::counting_semaphore<>& s): sem(s) { sem.acquire(); }
        ~Slot() { sem.release(); }
        Slot(Slot const&) = delete;
        Slot& operator=(Slot const&) = delete;
        std::counting_semaphore<>& sem;
    };

    Backend& _inner;
    std::counting_semaphore<>& _slots;
};

} // namespace codeact
