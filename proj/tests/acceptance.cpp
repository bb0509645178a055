// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS / FAIL / SKIP line per criterion; exits non-zero on any FAIL.
#include "pass_at_k_oracle.hpp"
#include "scenarios.hpp"

#include <codeact/harness.hpp>

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace codeact;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    bool ok = false;
    std::string detail;
    bool skipped = false;
};

int failures = 0;

void criterion(std::string const& name, double limit_s, std::function<Outcome()> const& check)
{
    auto const start = std::chrono::steady_clock::now();
    Outcome o;
    try
    {
        o = check();
    }
    catch (std::exception const& e)
    {
        o = Outcome { false, fmt::format("unexpected exception: {}", e.what()) };
    }
    auto const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.skipped && limit_s > 0 && secs >= limit_s)
    {
        o.ok = false;
        o.detail += fmt::format(" (took {:.2f}s, limit {}s)", secs, limit_s);
    }
    char const* verdict = o.skipped ? "SKIP" : o.ok ? "PASS" : "FAIL";
    if (!o.skipped && !o.ok)
        ++failures;
    std::cout << fmt::format("{} {} [{:.3f}s] {}\n", verdict, name, secs, o.detail);
}

std::string slurp(fs::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir()
{
    auto tmpl = (fs::temp_directory_path() / "codeact-accept-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
        throw std::runtime_error("mkdtemp failed");
    return tmpl;
}

std::string data(char const* name)
{
    return std::string(CODEACT_TEST_DATA) + "/" + name;
}

RunConfig fixture_run(fs::path const& out)
{
    RunConfig c;
    c.backend = BackendKind::mock;
    c.script_path = data("fixture_script.jsonl");
    c.runner = RunnerKind::stub;
    c.stub_table = data("fixture_stub.jsonl");
    c.output_dir = out.string();
    return c;
}

Outcome oracle_equivalence()
{
    double worst = 0.0;
    int cases = 0;
    for (int n = 1; n <= 12; ++n)
        for (int c = 0; c <= n; ++c)
            for (int k = 1; k <= n; ++k)
            {
                auto const v = pass_at_k(SampleTally { "t", n, c }, k);
                worst = std::max(worst, std::abs(v - oracle::pass_at_k_by_enumeration(n, c, k)));
                if (!(v >= 0.0 && v <= 1.0))
                    return { false, fmt::format("out of bounds at ({},{},{})", n, c, k) };
                if (k < n && v > pass_at_k(SampleTally { "t", n, c }, k + 1))
                    return { false, fmt::format("not monotone in k at ({},{},{})", n, c, k) };
                if (c < n && v > pass_at_k(SampleTally { "t", n, c + 1 }, k))
                    return { false, fmt::format("not monotone in c at ({},{},{})", n, c, k) };
                ++cases;
            }
    return { worst <= 1e-12, fmt::format("{} cases, max |error| = {:.3g}", cases, worst) };
}

Outcome spot_values()
{
    auto const a = pass_at_k(SampleTally { "t", 1, 1 }, 1);
    auto const b = pass_at_k(SampleTally { "t", 5, 0 }, 1);
    auto const c = pass_at_k(SampleTally { "t", 5, 2 }, 1);
    return { a == 1.0 && b == 0.0 && c == 0.4, fmt::format("(1,1,1)={} (5,0,1)={} (5,2,1)={}", a, b, c) };
}

Outcome table_shape()
{
    // Fifty tasks per strategy, listed out of order on purpose.
    std::vector<std::pair<std::string, int>> const passes { { "few_shot", 23 },
                                                            { "zero_shot", 18 },
                                                            { "self_consistency", 44 },
                                                            { "codeact_agent", 47 },
                                                            { "majority_voting", 33 } };
    std::vector<ResultRecord> records;
    for (auto const& [strategy, c]: passes)
        for (int i = 0; i < 50; ++i)
            records.push_back({ "Qwen3-8B", strategy, { fmt::format("t{}", i), 1, i < c ? 1 : 0 } });
    auto const md = render_markdown(build_report(records, { 1 }));
    std::vector<std::string> const expected { "| Qwen3-8B | codeact_agent | 94.0 |",
                                              "| Qwen3-8B | self_consistency | 88.0 |",
                                              "| Qwen3-8B | majority_voting | 66.0 |",
                                              "| Qwen3-8B | few_shot | 46.0 |",
                                              "| Qwen3-8B | zero_shot | 36.0 |" };
    std::size_t pos = 0;
    for (auto const& row: expected)
    {
        auto const at = md.find(row, pos);
        if (at == std::string::npos)
            return { false, fmt::format("missing or misplaced row '{}'", row) };
        pos = at + row.size();
    }
    return { true, "94.0 > 88.0 > 66.0 > 46.0 > 36.0" };
}

Outcome agent_convergence()
{
    auto const& task = scenarios::fixture("sort_matrix");
    StubRunner stub;
    scenarios::add_sort_matrix_verdicts(stub);
    Sandbox sandbox(stub);

    ScriptedMock agent_mock(scenarios::sort_matrix_recovery_script());
    Transcript transcript;
    auto const agent = codeact_agent(task, agent_mock, sandbox, LoopBudget {}, SamplingParams {}, &transcript);

    ScriptedMock zs_mock(scenarios::sort_matrix_recovery_script());
    auto const zs = zero_shot(task, zs_mock, sandbox, SamplingParams {});

    bool const ok = transcript.status == EpisodeStatus::solved && transcript.iterations_used == 2 && agent.correct_c == 1
                    && zs.correct_c == 0;
    return { ok,
             fmt::format("agent: {} in {} iterations; zero-shot: {}/{} correct",
                         to_string(transcript.status),
                         transcript.iterations_used,
                         zs.correct_c,
                         zs.samples_n) };
}

Outcome budget_enforcement()
{
    auto const& task = scenarios::fixture("is_palindrome");
    std::string const wrong = "def is_palindrome(s):\n    return False";
    StubRunner stub;
    stub.add(wrong, CannedVerdict { VerdictStatus::assertion_failure, std::nullopt, std::nullopt, "", "", 1 });
    Sandbox sandbox(stub);

    auto failing = ScriptedMock::from_replies(std::vector<std::string>(50, scenarios::codeact_reply(wrong)));
    auto const a = run_episode(task, failing, sandbox, LoopBudget {}, SamplingParams {});

    auto empty = ScriptedMock::from_replies(std::vector<std::string>(50, ""));
    auto const b = run_episode(task, empty, sandbox, LoopBudget {}, SamplingParams {});

    bool const ok = a.status == EpisodeStatus::iteration_budget_exhausted && a.iterations_used == 10
                    && b.status == EpisodeStatus::retry_budget_exhausted && b.retries_used == 25 && empty.calls() == 25;
    return { ok,
             fmt::format("{} at {} iterations; {} at {} retries",
                         to_string(a.status),
                         a.iterations_used,
                         to_string(b.status),
                         b.retries_used) };
}

Outcome parse_fuzz()
{
    std::mt19937_64 rng(42);
    std::vector<std::string> const pieces { "<thought>", "</thought>", "<code>",    "</code>",  "<answer>", "</answer>",
                                            "```",       "```python", "\n",        " ",        "lang=\"py\"", "<code ",
                                            ">",         "<",         "def f():",  "return 1", "অ",        "\xC3",
                                            "\xFF",      "\0",        "\r\n",      "{",        "}",        "\t" };
    std::vector<std::string> const seeds { scenarios::codeact_reply("x = 1"),
                                           "<answer><code>def f(): pass</code></answer>",
                                           "```python\nprint(1)\n```\n```\nprint(2)\n```",
                                           "<thought>ভাবনা</thought>" };
    std::uniform_int_distribution<int> byte(0, 255);
    int turns = 0, invalid = 0;
    for (int i = 0; i < 10'000; ++i)
    {
        std::string s;
        if (i % 2 == 0)
        {
            auto const len = std::uniform_int_distribution<int>(0, 24)(rng);
            for (int j = 0; j < len; ++j)
                s += rng() % 3 == 0 ? std::string(1, static_cast<char>(byte(rng))) : pieces[rng() % pieces.size()];
        }
        else
        {
            s = seeds[rng() % seeds.size()];
            auto const edits = std::uniform_int_distribution<int>(1, 8)(rng);
            for (int e = 0; e < edits && !s.empty(); ++e)
            {
                auto const at = rng() % s.size();
                switch (rng() % 3)
                {
                    case 0: s.erase(at, 1 + rng() % 4); break;
                    case 1: s.insert(at, pieces[rng() % pieces.size()]); break;
                    default: s[at] = static_cast<char>(byte(rng)); break;
                }
            }
        }
        try
        {
            auto const turn = parse_turn(s);
            if (!turn.valid())
                return { false, fmt::format("invalid AgentTurn returned for input #{}", i) };
            ++turns;
        }
        catch (InvalidTurn const&)
        {
            ++invalid;
        }
    }
    return { turns + invalid == 10'000, fmt::format("{} turns, {} InvalidTurn, 0 crashes", turns, invalid) };
}

Outcome determinism()
{
    auto const dir = temp_dir();
    std::ostringstream log;
    int const a = cmd_run(fixture_run(dir / "a"), log);
    int const b = cmd_run(fixture_run(dir / "b"), log);
    auto const ra = slurp(dir / "a" / "results.jsonl");
    auto const rb = slurp(dir / "b" / "results.jsonl");
    std::error_code ec;
    fs::remove_all(dir, ec);
    if (a != 0 || b != 0)
        return { false, fmt::format("run exit codes {} / {}: {}", a, b, log.str()) };
    return { !ra.empty() && ra == rb, fmt::format("results.jsonl {} bytes, identical: {}", ra.size(), ra == rb) };
}

Outcome live_smoke()
{
    if (!std::getenv(api_key_env))
        return { true, fmt::format("{} not set", api_key_env), true };
    auto const dir = temp_dir();
    RunConfig c;
    c.output_dir = (dir / "live").string();
    if (char const* url = std::getenv("CODEACT_BASE_URL"))
        c.base_url = url;
    if (char const* model = std::getenv("CODEACT_MODEL"))
        c.model_name = model;
    c.runner = RunnerKind::stub;
    c.stub_table = data("fixture_stub.jsonl");
    std::ostringstream log;
    int const rc = cmd_run(c, log);
    bool const report_ok = rc == 0 && fs::exists(dir / "live" / "report.json")
                           && nlohmann::json::parse(slurp(dir / "live" / "report.json"))["rows"].size() == 1;
    std::error_code ec;
    fs::remove_all(dir, ec);
    return { report_ok, report_ok ? fmt::format("exit {}; report well-formed", rc) : fmt::format("exit {}; {}", rc, log.str()) };
}

} // namespace

int main()
{
    spdlog::set_level(spdlog::level::err);
    criterion("pass@k matches exhaustive enumeration (n <= 12), monotone and bounded", 5.0, oracle_equivalence);
    criterion("pass@k spot values exact", 0, spot_values);
    criterion("report reproduces the Qwen3-8B method ordering with one-decimal scores", 1.0, table_shape);
    criterion("agent converges on scripted TypeError feedback in 2 iterations; zero-shot does not", 1.0, agent_convergence);
    criterion("iteration cap 10 and retry cap 25 are enforced", 1.0, budget_enforcement);
    criterion("parse_turn survives 10000 random and mutated replies", 0, parse_fuzz);
    criterion("two identical fixture runs give byte-identical results.jsonl", 0, determinism);
    criterion("live smoke run against an OpenAI-compatible endpoint", 0, live_smoke);
    std::cout << (failures == 0 ? "acceptance: all criteria passed\n" : fmt::format("acceptance: {} criteria failed\n", failures));
    return failures == 0 ? 0 : 1;
}
