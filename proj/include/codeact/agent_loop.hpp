// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <codeact/model_gateway.hpp>
#include <codeact/sandbox.hpp>
#include <codeact/task_corpus.hpp>
#include <codeact/text.hpp>

#include <json.hpp>

#include <fmt/format.h>

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codeact
{

// {{{ turn grammar

struct CodeBlock
{
    std::string source;
    std::string language = "python";

    bool operator==(CodeBlock const&) const = default;
};

/// One parsed model reply. `code` and `answer` hold source text only.
struct AgentTurn
{
    std::optional<std::string> thought;
    std::optional<CodeBlock> code;
    std::optional<std::string> answer;
    std::string raw;

    [[nodiscard]] bool valid() const noexcept { return thought || code || answer; }
};

/// The reply was empty or carried nothing the loop can act on.
class InvalidTurn: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

namespace detail
{
    struct TagSpan
    {
        std::size_t outer_begin = 0;
        std::size_t outer_end = 0;
        std::string_view attributes;
        std::string_view content;
    };

    /// First `<name ...>...</name>`. An unclosed tag extends to the end of the text.
    inline std::optional<TagSpan> find_tag(std::string_view s, std::string_view name)
    {
        auto const open = fmt::format("<{}", name);
        auto const close = fmt::format("</{}>", name);
        std::size_t pos = 0;
        while ((pos = s.find(open, pos)) != std::string_view::npos)
        {
            auto const after = pos + open.size();
            if (after < s.size() && (s[after] == '>' || s[after] == ' ' || s[after] == '\t' || s[after] == '\n'))
            {
                auto const gt = s.find('>', after);
                if (gt == std::string_view::npos)
                    return std::nullopt;
                TagSpan span;
                span.outer_begin = pos;
                span.attributes = s.substr(after, gt - after);
                auto const body = gt + 1;
                auto const end = s.find(close, body);
                if (end == std::string_view::npos)
                {
                    span.content = s.substr(body);
                    span.outer_end = s.size();
                }
                else
                {
                    span.content = s.substr(body, end - body);
                    span.outer_end = end + close.size();
                }
                return span;
            }
            pos = after;
        }
        return std::nullopt;
    }

    inline std::string erase_span(std::string_view s, TagSpan const& span)
    {
        std::string out(s.substr(0, span.outer_begin));
        out += s.substr(span.outer_end);
        return out;
    }

    /// Value of `lang="..."` / `language='...'` in a tag's attribute text.
    inline std::optional<std::string> language_attribute(std::string_view attrs)
    {
        for (std::string_view key: { "lang=", "language=" })
        {
            auto const at = attrs.find(key);
            if (at == std::string_view::npos)
                continue;
            auto rest = attrs.substr(at + key.size());
            if (rest.empty())
                continue;
            auto const quote = rest.front();
            if (quote == '"' || quote == '\'')
            {
                auto const end = rest.find(quote, 1);
                return std::string(rest.substr(1, end == std::string_view::npos ? rest.npos : end - 1));
            }
            return std::string(rest.substr(0, rest.find_first_of(" \t")));
        }
        return std::nullopt;
    }

    struct Fence
    {
        std::string info;
        std::string body;
    };

    /// Markdown fenced blocks in order; an unterminated fence runs to the end.
    inline std::vector<Fence> fenced_blocks(std::string_view s)
    {
        std::vector<Fence> blocks;
        std::optional<Fence> current;
        std::size_t pos = 0;
        while (pos <= s.size())
        {
            auto const nl = s.find('\n', pos);
            auto line = s.substr(pos, nl == std::string_view::npos ? s.npos : nl - pos);
            auto const stripped = text::trim(line);
            if (stripped.starts_with("```"))
            {
                if (current)
                {
                    if (text::trim(stripped.substr(3)).empty())
                    {
                        blocks.push_back(std::move(*current));
                        current.reset();
                    }
                    else
                        current->body.append(line).append("\n");
                }
                else
                    current = Fence { std::string(text::trim(stripped.substr(3))), {} };
            }
            else if (current)
                current->body.append(line).append("\n");
            if (nl == std::string_view::npos)
                break;
            pos = nl + 1;
        }
        if (current)
            blocks.push_back(std::move(*current));
        return blocks;
    }

    inline std::optional<CodeBlock> last_fenced_block(std::string_view s)
    {
        auto blocks = fenced_blocks(s);
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
        {
            auto src = normalize_code_key(it->body);
            if (src.empty())
                continue;
            auto lang = it->info.substr(0, it->info.find_first_of(" \t{"));
            return CodeBlock { std::move(src), lang.empty() ? "python" : lang };
        }
        return std::nullopt;
    }

    /// Tag content as source: a fenced block inside the tag wins over the raw text.
    inline std::optional<CodeBlock> unwrap_source(std::string_view content, std::optional<std::string> lang)
    {
        if (auto fenced = last_fenced_block(content))
        {
            if (lang)
                fenced->language = *lang;
            return fenced;
        }
        auto src = normalize_code_key(content);
        if (src.empty())
            return std::nullopt;
        return CodeBlock { std::move(src), lang.value_or("python") };
    }
} // namespace detail

/// Extracts thought / code / answer. Returns nullopt for replies with nothing actionable.
/// Never throws; arbitrary bytes are accepted.
inline std::optional<AgentTurn> try_parse_turn(std::string_view raw)
{
    AgentTurn turn;
    turn.raw = std::string(raw);
    if (text::is_blank(raw))
        return std::nullopt;

    // Thought text is removed before looking for code so it is never executed.
    std::string rest(raw);
    if (auto t = detail::find_tag(rest, "thought"))
    {
        if (auto thought = text::trim(t->content); !thought.empty())
            turn.thought = std::string(thought);
        rest = detail::erase_span(rest, *t);
    }

    bool tagged = false;
    if (auto a = detail::find_tag(rest, "answer"))
    {
        tagged = true;
        std::string_view content = a->content;
        std::string inner;
        if (auto nested = detail::find_tag(content, "code"))
        {
            inner = std::string(nested->content);
            content = inner;
        }
        if (auto src = detail::unwrap_source(content, std::nullopt))
            turn.answer = std::move(src->source);
        rest = detail::erase_span(rest, *a);
    }
    if (auto c = detail::find_tag(rest, "code"))
    {
        tagged = true;
        turn.code = detail::unwrap_source(c->content, detail::language_attribute(c->attributes));
    }
    if (!tagged)
        turn.code = detail::last_fenced_block(rest);

    if (!turn.valid())
        return std::nullopt;
    return turn;
}

/// As try_parse_turn, but reports an unusable reply as InvalidTurn.
inline AgentTurn parse_turn(std::string_view raw)
{
    if (auto turn = try_parse_turn(raw))
        return std::move(*turn);
    if (text::is_blank(raw))
        throw InvalidTurn("empty model reply");
    throw InvalidTurn("model reply contains no thought, code or answer");
}

// }}}

// {{{ prompts and observations

/// `{instruction}`, `{entry_point}` and `{tests}` are substituted into both parts.
struct PromptTemplate
{
    std::string system;
    std::string user;
};

inline PromptTemplate default_codeact_prompt()
{
    return PromptTemplate {
        .system =
            "You are an expert Python programmer. You receive programming tasks written in Bangla and solve "
            "them in Python by working in a Thought-Code-Observation cycle.\n"
            "\n"
            "On every turn:\n"
            "1. Inside <thought>...</thought>, state in Bangla what the task asks for and your plan.\n"
            "2. Inside <code>...</code>, write Python code that implements the solution, followed by the "
            "given test assertions so it can be verified immediately.\n"
            "3. The code is executed in a sandbox and you receive the result as an observation: which "
            "assertions passed or failed and any error such as a TypeError. If something failed, think "
            "about the cause and send corrected code.\n"
            "\n"
            "When you are confident the solution is correct, put the final solution (definitions only, no "
            "tests) inside <answer>...</answer>. Define the function exactly as named in the signature.",
        .user = "Task (Bangla):\n{instruction}\n\n"
                "Function signature: {entry_point}\n\n"
                "Your solution must pass these tests:\n{tests}",
    };
}

inline std::string join_tests(std::vector<std::string> const& tests)
{
    std::string out;
    for (auto const& t: tests)
        out.append(t).append("\n");
    if (!out.empty())
        out.pop_back();
    return out;
}

inline std::vector<ChatMessage> render_task_prompt(Task const& task, PromptTemplate const& tmpl)
{
    if (text::is_blank(tmpl.system) || text::is_blank(tmpl.user))
        throw std::invalid_argument("prompt template needs both a system and a user part");
    auto const tests = join_tests(task.tests);
    auto lookup = [&](std::string_view key) -> std::optional<std::string_view> {
        if (key == "instruction")
            return task.instruction;
        if (key == "entry_point")
            return task.entry_point;
        if (key == "tests")
            return tests;
        return std::nullopt;
    };
    return {
        ChatMessage { Role::system, text::substitute(tmpl.system, lookup) },
        ChatMessage { Role::user, text::substitute(tmpl.user, lookup) },
    };
}

inline constexpr std::size_t observation_char_cap = 2000;
inline constexpr std::size_t observation_tail_chars = 500;

/// Keeps the head and the last `observation_tail_chars` characters within `cap` characters.
inline std::string truncate_observation(std::string s, std::size_t cap = observation_char_cap)
{
    if (text::char_count(s) <= cap)
        return s;
    constexpr std::string_view marker = "\n...[truncated]...\n";
    auto const tail = std::min(observation_tail_chars, cap / 4);
    auto const head = cap - tail - std::min(cap - tail, marker.size());
    auto out = text::head_chars(s, head);
    if (head + marker.size() + tail <= cap)
        out += marker;
    out += text::tail_chars(s, tail);
    return out;
}

/// Status line, per-assertion results, then captured output and traceback.
inline std::string render_observation(ExecutionVerdict const& v, std::size_t total_tests, std::size_t cap = observation_char_cap)
{
    std::size_t passed = 0;
    for (auto const& t: v.per_test)
        passed += t.passed ? 1 : 0;
    std::string out = fmt::format("Execution status: {} ({}/{} assertions passed)\n", to_string(v.status), passed, total_tests);
    for (auto const& t: v.per_test)
    {
        if (t.passed)
            out += fmt::format("PASS {}\n", t.test);
        else
            out += fmt::format("FAIL {}\n     {}\n", t.test, t.error.value_or("assertion failed"));
    }
    if (v.per_test.size() < total_tests && v.status != VerdictStatus::pass)
        out += fmt::format("{} assertion(s) not evaluated\n", total_tests - v.per_test.size());
    if (!text::is_blank(v.stdout_text))
        out += fmt::format("stdout:\n{}\n", text::trim(v.stdout_text));
    if (!text::is_blank(v.stderr_text))
        out += fmt::format("stderr:\n{}\n", text::trim(v.stderr_text));
    return truncate_observation(std::move(out), cap);
}

inline constexpr std::string_view no_code_observation =
    "No code was found in your reply. Put Python code inside <code>...</code>, or the final solution inside "
    "<answer>...</answer>.";

// }}}

// {{{ episode

struct LoopBudget
{
    int max_iterations = 10;
    int max_retries = 25;

    void validate() const
    {
        if (max_iterations < 1)
            throw std::invalid_argument("max_iterations must be >= 1");
        if (max_retries < 1)
            throw std::invalid_argument("max_retries must be >= 1");
    }
};

/// `verdict` is absent when the turn had nothing to execute.
struct Observation
{
    std::optional<ExecutionVerdict> verdict;
    std::string rendered;
};

struct TurnRecord
{
    AgentTurn turn;
    Observation observation;
};

enum class EpisodeStatus
{
    solved,
    answer_unverified,
    iteration_budget_exhausted,
    retry_budget_exhausted,
    backend_failed,
};

inline std::string_view to_string(EpisodeStatus s)
{
    switch (s)
    {
        case EpisodeStatus::solved: return "solved";
        case EpisodeStatus::answer_unverified: return "answer_unverified";
        case EpisodeStatus::iteration_budget_exhausted: return "iteration_budget_exhausted";
        case EpisodeStatus::retry_budget_exhausted: return "retry_budget_exhausted";
        case EpisodeStatus::backend_failed: return "backend_failed";
    }
    return "backend_failed";
}

struct Transcript
{
    std::string task_id;
    std::vector<TurnRecord> turns;
    EpisodeStatus status = EpisodeStatus::iteration_budget_exhausted;
    int iterations_used = 0;
    int retries_used = 0;
    std::string error; // set for backend_failed / retry_budget_exhausted

    /// The last code that was executed, and its verdict.
    [[nodiscard]] std::optional<std::pair<std::string, ExecutionVerdict>> final_candidate() const
    {
        for (auto it = turns.rbegin(); it != turns.rend(); ++it)
        {
            if (!it->observation.verdict)
                continue;
            auto const& t = it->turn;
            auto const& src = t.answer ? *t.answer : t.code->source;
            return std::pair { src, *it->observation.verdict };
        }
        return std::nullopt;
    }
};

inline nlohmann::json to_json(Transcript const& t)
{
    auto turns = nlohmann::json::array();
    auto opt = [](std::optional<std::string> const& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
    for (auto const& r: t.turns)
        turns.push_back({
            { "thought", opt(r.turn.thought) },
            { "code", r.turn.code ? nlohmann::json(r.turn.code->source) : nlohmann::json(nullptr) },
            { "answer", opt(r.turn.answer) },
            { "observation",
              { { "rendered", r.observation.rendered },
                { "verdict", r.observation.verdict ? to_json(*r.observation.verdict) : nlohmann::json(nullptr) } } },
        });
    nlohmann::json j {
        { "task_id", t.task_id },
        { "status", to_string(t.status) },
        { "iterations_used", t.iterations_used },
        { "retries_used", t.retries_used },
        { "turns", std::move(turns) },
    };
    if (!t.error.empty())
        j["error"] = t.error;
    return j;
}

/// Raised when the retry pool runs dry. `backend_error` tells whether the last failure was a
/// backend/transport error rather than an unusable reply.
class RetryBudgetExhausted: public std::runtime_error
{
  public:
    RetryBudgetExhausted(std::string const& last_error, bool backend_error):
        std::runtime_error(fmt::format("retry budget exhausted; last failure: {}", last_error)), _backend_error(backend_error)
    {
    }

    [[nodiscard]] bool backend_error() const noexcept { return _backend_error; }

  private:
    bool _backend_error;
};

/// A retry pool. Each invalid or failed attempt consumes one unit; valid turns are free.
struct RetryBudget
{
    int max_retries = 25;
    int used = 0;
};

/// Re-invokes `attempt` until it yields a valid turn, drawing failures from `budget`.
/// Invalid turns and backend errors both count as failures.
inline AgentTurn safe_run(std::function<AgentTurn()> const& attempt, RetryBudget& budget)
{
    if (budget.max_retries < 1)
        throw std::invalid_argument("max_retries must be >= 1");
    for (;;)
    {
        std::string last_error;
        bool backend_error = false;
        try
        {
            return attempt();
        }
        catch (InvalidTurn const& e)
        {
            last_error = e.what();
        }
        catch (GatewayError const& e)
        {
            last_error = e.what();
            backend_error = true;
        }
        if (++budget.used >= budget.max_retries)
            throw RetryBudgetExhausted(last_error, backend_error);
    }
}

inline AgentTurn safe_run(std::function<AgentTurn()> const& attempt, int max_retries, int* retries_used = nullptr)
{
    RetryBudget budget { max_retries, 0 };
    struct Report
    {
        RetryBudget const& b;
        int* out;
        ~Report()
        {
            if (out)
                *out = b.used;
        }
    } report { budget, retries_used };
    return safe_run(attempt, budget);
}

/// Runs the Thought-Code-Observation loop for one task. Model misbehaviour never escapes as an
/// exception; it ends up in the transcript status.
inline Transcript run_episode(Task const& task,
                              Backend& backend,
                              Sandbox& sandbox,
                              LoopBudget const& budget,
                              SamplingParams const& params,
                              PromptTemplate const& prompt = default_codeact_prompt())
{
    budget.validate();
    Transcript transcript;
    transcript.task_id = task.id;

    auto messages = render_task_prompt(task, prompt);
    RetryBudget retries { budget.max_retries, 0 };
    auto attempt = [&]() -> AgentTurn {
        auto reply = backend.complete(messages, params);
        return parse_turn(reply.text);
    };

    for (int iteration = 1; iteration <= budget.max_iterations; ++iteration)
    {
        AgentTurn turn;
        try
        {
            turn = safe_run(attempt, retries);
        }
        catch (RetryBudgetExhausted const& e)
        {
            transcript.retries_used = retries.used;
            transcript.status = e.backend_error() ? EpisodeStatus::backend_failed : EpisodeStatus::retry_budget_exhausted;
            transcript.error = e.what();
            return transcript;
        }
        transcript.retries_used = retries.used;
        transcript.iterations_used = iteration;
        messages.push_back(ChatMessage { Role::assistant, turn.raw });

        Observation obs;
        bool const is_answer = turn.answer.has_value();
        if (is_answer || turn.code)
        {
            auto const& src = is_answer ? *turn.answer : turn.code->source;
            obs.verdict = sandbox.execute(src, task.tests);
            obs.rendered = render_observation(*obs.verdict, task.tests.size());
        }
        else
            obs.rendered = std::string(no_code_observation);

        bool const passed = obs.verdict && obs.verdict->passed();
        auto feedback = obs.rendered;
        transcript.turns.push_back(TurnRecord { std::move(turn), std::move(obs) });

        if (is_answer)
        {
            transcript.status = passed ? EpisodeStatus::solved : EpisodeStatus::answer_unverified;
            return transcript;
        }
        if (passed)
        {
            transcript.status = EpisodeStatus::solved;
            return transcript;
        }
        messages.push_back(ChatMessage { Role::user, "Observation:\n" + std::move(feedback) });
    }
    transcript.status = EpisodeStatus::iteration_budget_exhausted;
    return transcript;
}

// }}}

} // namespace codeact
