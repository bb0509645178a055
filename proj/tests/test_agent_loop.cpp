// SPDX-License-Identifier: Apache-2.0
#include "scenarios.hpp"

#include <codeact/agent_loop.hpp>

#include <gtest/gtest.h>

using namespace codeact;

namespace
{

ScriptedMock replies(std::vector<std::string> const& texts)
{
    return ScriptedMock::from_replies(texts);
}

} // namespace

TEST(ParseTurn, CanonicalTags)
{
    auto const t = parse_turn("<thought>ভাবনা</thought>\n<code>\ndef f():\n    return 1\n</code>");
    EXPECT_EQ(t.thought, "ভাবনা");
    ASSERT_TRUE(t.code);
    EXPECT_EQ(t.code->source, "def f():\n    return 1");
    EXPECT_EQ(t.code->language, "python");
    EXPECT_FALSE(t.answer);
}

TEST(ParseTurn, AnswerWithNestedCodeOrFence)
{
    auto t = parse_turn("<answer><code>def f(): return 1</code></answer>");
    EXPECT_EQ(t.answer, "def f(): return 1");
    EXPECT_FALSE(t.code);
    t = parse_turn("<answer>\n```python\ndef f(): return 2\n```\n</answer>");
    EXPECT_EQ(t.answer, "def f(): return 2");
}

TEST(ParseTurn, CodeLanguageAndInnerFence)
{
    auto const t = parse_turn("<code lang=\"python3\">\n```\nx = 1\n```\n</code>");
    ASSERT_TRUE(t.code);
    EXPECT_EQ(t.code->source, "x = 1");
    EXPECT_EQ(t.code->language, "python3");
}

TEST(ParseTurn, EmptyReplyIsInvalid)
{
    EXPECT_THROW(parse_turn(""), InvalidTurn);
    EXPECT_THROW(parse_turn("   \n\t"), InvalidTurn);
    EXPECT_THROW(parse_turn("just prose, no code"), InvalidTurn);
    EXPECT_FALSE(try_parse_turn(""));
}

TEST(ParseTurn, LastOfSeveralFencedBlocks)
{
    auto const t = parse_turn("First try:\n```python\nx = 1\n```\nBetter:\n```python\nx = 2\n```\n");
    ASSERT_TRUE(t.code);
    EXPECT_EQ(t.code->source, "x = 2");
}

TEST(ParseTurn, ThoughtIsNeverCode)
{
    auto t = parse_turn("<thought>```python\nimport os; os.remove('x')\n```</thought>");
    EXPECT_TRUE(t.thought);
    EXPECT_FALSE(t.code);
    EXPECT_FALSE(t.answer);

    t = parse_turn("<thought>try <code>evil()</code></thought><code>good()</code>");
    ASSERT_TRUE(t.code);
    EXPECT_EQ(t.code->source, "good()");
}

TEST(ParseTurn, UnclosedTagRunsToEnd)
{
    auto const t = parse_turn("<code>\ndef f():\n    return 1\n");
    ASSERT_TRUE(t.code);
    EXPECT_EQ(t.code->source, "def f():\n    return 1");
}

TEST(SafeRun, CountsInvalidAttempts)
{
    auto mock = replies({ "", "", scenarios::codeact_reply("x = 1") });
    int used = -1;
    auto const turn = safe_run([&] { return parse_turn(mock.complete({ std::vector { ChatMessage { Role::user, "q" } } }, {}).text); },
                               25,
                               &used);
    EXPECT_EQ(used, 2);
    ASSERT_TRUE(turn.code);
    EXPECT_EQ(turn.code->source, "x = 1");
}

TEST(SafeRun, ExhaustsAfterMaxRetries)
{
    int calls = 0;
    auto empty = [&]() -> AgentTurn {
        ++calls;
        return parse_turn("");
    };
    int used = 0;
    EXPECT_THROW(safe_run(empty, 25, &used), RetryBudgetExhausted);
    EXPECT_EQ(calls, 25);
    EXPECT_EQ(used, 25);

    auto failing = []() -> AgentTurn { throw BackendError(503, "busy"); };
    try
    {
        safe_run(failing, 3);
        FAIL();
    }
    catch (RetryBudgetExhausted const& e)
    {
        EXPECT_TRUE(e.backend_error());
    }
    EXPECT_THROW(safe_run(empty, 0), std::invalid_argument);
}

TEST(Prompt, CarriesTaskAndTagNames)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto const msgs = render_task_prompt(task, default_codeact_prompt());
    ASSERT_EQ(msgs.size(), 2u);
    EXPECT_EQ(msgs[0].role, Role::system);
    for (auto const* tag: { "<thought>", "<code>", "<answer>" })
        EXPECT_NE(msgs[0].content.find(tag), std::string::npos) << tag;
    EXPECT_NE(msgs[1].content.find(task.instruction), std::string::npos);
    EXPECT_NE(msgs[1].content.find(R"(assert is_palindrome("TENET") == True)"), std::string::npos);
    EXPECT_NE(msgs[1].content.find("is_palindrome(s)"), std::string::npos);
}

TEST(Observation, TruncatesOnCharacterBoundaries)
{
    std::string big;
    for (int i = 0; i < 3000; ++i)
        big += "অ";
    big += "END";
    auto const cut = truncate_observation(big);
    EXPECT_LE(text::char_count(cut), observation_char_cap);
    EXPECT_TRUE(text::is_valid_utf8(cut));
    EXPECT_TRUE(cut.ends_with("END"));
    EXPECT_NE(cut.find("truncated"), std::string::npos);
    EXPECT_EQ(truncate_observation("short"), "short");
}

TEST(Observation, RendersVerdict)
{
    ExecutionVerdict v;
    v.status = VerdictStatus::assertion_failure;
    v.per_test = { { "assert f() == 1", true, std::nullopt }, { "assert f() == 2", false, "AssertionError" } };
    v.stdout_text = "debug\n";
    auto const r = render_observation(v, 3);
    EXPECT_NE(r.find("assertion_failure (1/3 assertions passed)"), std::string::npos) << r;
    EXPECT_NE(r.find("PASS assert f() == 1"), std::string::npos);
    EXPECT_NE(r.find("FAIL assert f() == 2"), std::string::npos);
    EXPECT_NE(r.find("1 assertion(s) not evaluated"), std::string::npos);
    EXPECT_NE(r.find("debug"), std::string::npos);
}

TEST(Episode, SolvedInOneShot)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto mock = replies({ scenarios::codeact_reply(scenarios::palindrome_solution) });
    StubRunner stub;
    stub.add(scenarios::palindrome_solution, CannedVerdict { VerdictStatus::pass, std::nullopt, std::nullopt, "", "", 1 });
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::solved);
    EXPECT_EQ(t.iterations_used, 1);
    EXPECT_EQ(t.retries_used, 0);
    ASSERT_TRUE(t.final_candidate());
    EXPECT_EQ(t.final_candidate()->first, scenarios::palindrome_solution);
}

TEST(Episode, RecoversFromTypeErrorInTwoIterations)
{
    auto const& task = scenarios::fixture("sort_matrix");
    ScriptedMock mock(scenarios::sort_matrix_recovery_script());
    StubRunner stub;
    scenarios::add_sort_matrix_verdicts(stub);
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::solved);
    EXPECT_EQ(t.iterations_used, 2);
    ASSERT_EQ(t.turns.size(), 2u);
    EXPECT_NE(t.turns[0].observation.rendered.find("TypeError"), std::string::npos);
    EXPECT_EQ(t.turns[0].observation.verdict->status, VerdictStatus::runtime_error);
    EXPECT_EQ(t.turns[1].turn.code->source, scenarios::sort_matrix_fixed);
}

/// Records the conversation each call sees.
class RecordingBackend final: public Backend
{
  public:
    explicit RecordingBackend(Backend& inner): _inner(inner) {}
    ModelReply complete(std::span<ChatMessage const> messages, SamplingParams const& params) override
    {
        seen.emplace_back(messages.begin(), messages.end());
        return _inner.complete(messages, params);
    }
    std::vector<std::vector<ChatMessage>> seen;

  private:
    Backend& _inner;
};

TEST(Episode, FeedbackIsTheRenderedObservation)
{
    auto const& task = scenarios::fixture("sort_matrix");
    ScriptedMock mock(scenarios::sort_matrix_recovery_script());
    RecordingBackend rec(mock);
    StubRunner stub;
    scenarios::add_sort_matrix_verdicts(stub);
    Sandbox sandbox(stub);
    auto const t = run_episode(task, rec, sandbox, LoopBudget {}, SamplingParams {});
    ASSERT_EQ(rec.seen.size(), 2u);
    auto const& second = rec.seen[1];
    ASSERT_EQ(second.size(), 4u);
    EXPECT_EQ(second[2].role, Role::assistant);
    EXPECT_EQ(second[2].content, t.turns[0].turn.raw);
    EXPECT_EQ(second[3].role, Role::user);
    EXPECT_EQ(second[3].content, "Observation:\n" + t.turns[0].observation.rendered);
}

TEST(Episode, IterationBudgetStopsAtTen)
{
    auto const& task = scenarios::fixture("is_palindrome");
    std::vector<std::string> wrong(30, scenarios::codeact_reply("def is_palindrome(s):\n    return False"));
    auto mock = replies(wrong);
    StubRunner stub;
    stub.add("def is_palindrome(s):\n    return False",
             CannedVerdict { VerdictStatus::assertion_failure, std::vector<bool> { false, true, false }, std::nullopt, "", "", 1 });
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::iteration_budget_exhausted);
    EXPECT_EQ(t.iterations_used, 10);
    EXPECT_EQ(mock.calls(), 10u);
    EXPECT_EQ(stub.runs(), 10u);
}

TEST(Episode, RetryBudgetStopsAtTwentyFive)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto mock = replies(std::vector<std::string>(40, ""));
    StubRunner stub;
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::retry_budget_exhausted);
    EXPECT_EQ(t.retries_used, 25);
    EXPECT_EQ(mock.calls(), 25u);
    EXPECT_EQ(stub.runs(), 0u);
}

TEST(Episode, BackendFailureIsRecorded)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto mock = replies({ "" }); // exhausted on the second call
    StubRunner stub;
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget { 10, 5 }, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::backend_failed);
    EXPECT_NE(t.error.find("exhausted"), std::string::npos);
}

TEST(Episode, AnswerIsVerifiedAndTerminal)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto mock = replies({ "<answer>\ndef is_palindrome(s):\n    return True\n</answer>", "unused" });
    StubRunner stub;
    Sandbox sandbox(stub);
    auto t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::answer_unverified);
    EXPECT_EQ(mock.calls(), 1u);

    auto good = replies({ "<answer>" + scenarios::palindrome_solution + "</answer>" });
    stub.add(scenarios::palindrome_solution, CannedVerdict { VerdictStatus::pass, std::nullopt, std::nullopt, "", "", 1 });
    t = run_episode(task, good, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::solved);
}

TEST(Episode, ThoughtOnlyTurnGetsAHint)
{
    auto const& task = scenarios::fixture("is_palindrome");
    auto mock = replies({ "<thought>ভাবছি</thought>", scenarios::codeact_reply(scenarios::palindrome_solution) });
    StubRunner stub;
    stub.add(scenarios::palindrome_solution, CannedVerdict { VerdictStatus::pass, std::nullopt, std::nullopt, "", "", 1 });
    Sandbox sandbox(stub);
    auto const t = run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {});
    EXPECT_EQ(t.status, EpisodeStatus::solved);
    EXPECT_EQ(t.iterations_used, 2);
    EXPECT_FALSE(t.turns[0].observation.verdict);
    EXPECT_EQ(t.turns[0].observation.rendered, no_code_observation);
}

TEST(Episode, TranscriptJson)
{
    auto const& task = scenarios::fixture("sort_matrix");
    ScriptedMock mock(scenarios::sort_matrix_recovery_script());
    StubRunner stub;
    scenarios::add_sort_matrix_verdicts(stub);
    Sandbox sandbox(stub);
    auto const j = to_json(run_episode(task, mock, sandbox, LoopBudget {}, SamplingParams {}));
    EXPECT_EQ(j["task_id"], "sort_matrix");
    EXPECT_EQ(j["status"], "solved");
    ASSERT_EQ(j["turns"].size(), 2u);
    EXPECT_EQ(j["turns"][0]["observation"]["verdict"]["status"], "runtime_error");
    EXPECT_TRUE(j["turns"][0]["answer"].is_null());
}
