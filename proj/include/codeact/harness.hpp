// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <codeact/agent_loop.hpp>
#include <codeact/model_gateway.hpp>
#include <codeact/pass_at_k.hpp>
#include <codeact/sandbox.hpp>
#include <codeact/strategies.hpp>
#include <codeact/task_corpus.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace codeact
{

enum class BackendKind
{
    openai_compatible,
    mock,
};

enum class RunnerKind
{
    process,
    stub,
};

inline constexpr std::string_view builtin_corpus_name = "fixtures";
inline constexpr char const* api_key_env = "CODEACT_API_KEY";

/// Everything a run needs. Defaults reproduce the published inference settings.
struct RunConfig
{
    std::string corpus_path = std::string(builtin_corpus_name);
    BackendKind backend = BackendKind::openai_compatible;
    std::string base_url = "http://localhost:8000";
    std::string model_name = "Qwen/Qwen3-8B";
    std::string script_path; // mock backend only
    Strategy strategy = Strategy::codeact_agent;
    SamplingParams sampling;
    LoopBudget budget;
    int num_paths = 1;
    int workers = 4;
    int backend_concurrency = 4;
    int exec_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    RunnerKind runner = RunnerKind::process;
    std::vector<std::string> runner_cmd { "codeact-runner" };
    std::string stub_table;
    double timeout_s = default_timeout_s;
    std::vector<int> ks { 1 };
    std::string output_dir = "codeact-out";
    bool resume = false;
    std::chrono::seconds request_timeout { 120 };
};

class ConfigError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

inline std::string_view to_string(BackendKind b)
{
    return b == BackendKind::mock ? "mock" : "openai_compatible";
}

inline std::string_view to_string(RunnerKind r)
{
    return r == RunnerKind::stub ? "stub" : "process";
}

inline void validate(RunConfig const& c)
{
    try
    {
        c.sampling.validate();
        c.budget.validate();
    }
    catch (std::invalid_argument const& e)
    {
        throw ConfigError(e.what());
    }
    if (c.backend == BackendKind::mock && c.script_path.empty())
        throw ConfigError("the mock backend requires a script (--script)");
    if (c.num_paths < 1)
        throw ConfigError("num_paths must be >= 1");
    if (c.workers < 1 || c.backend_concurrency < 1 || c.exec_workers < 1)
        throw ConfigError("worker counts must be >= 1");
    if (!(c.timeout_s > 0.0))
        throw ConfigError("timeout_s must be positive");
    if (c.ks.empty() || std::any_of(c.ks.begin(), c.ks.end(), [](int k) { return k < 1; }))
        throw ConfigError("k values must be >= 1");
    if (c.runner == RunnerKind::process && c.runner_cmd.empty())
        throw ConfigError("the process runner needs a command");
    if (c.output_dir.empty())
        throw ConfigError("output directory must not be empty");
}

inline nlohmann::json to_json(RunConfig const& c)
{
    return nlohmann::json {
        { "corpus", c.corpus_path },
        { "backend", to_string(c.backend) },
        { "base_url", c.base_url },
        { "model", c.model_name },
        { "script", c.script_path },
        { "strategy", to_string(c.strategy) },
        { "sampling",
          {
              { "max_tokens", c.sampling.max_tokens },
              { "temperature", c.sampling.temperature },
              { "top_p", c.sampling.top_p },
              { "best_of", c.sampling.best_of },
              { "repetition_penalty", c.sampling.repetition_penalty },
              { "seed", c.sampling.seed },
              { "num_samples", c.sampling.num_samples },
          } },
        { "budget", { { "max_iterations", c.budget.max_iterations }, { "max_retries", c.budget.max_retries } } },
        { "num_paths", c.num_paths },
        { "workers", c.workers },
        { "backend_concurrency", c.backend_concurrency },
        { "exec_workers", c.exec_workers },
        { "runner", to_string(c.runner) },
        { "runner_cmd", c.runner_cmd },
        { "stub_table", c.stub_table },
        { "timeout_s", c.timeout_s },
        { "ks", c.ks },
        { "output", c.output_dir },
        { "resume", c.resume },
        { "request_timeout_s", c.request_timeout.count() },
    };
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_config_json(RunConfig& c, nlohmann::json const& j)
{
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    try
    {
        for (auto const& [key, v]: j.items())
        {
            if (key == "corpus")
                c.corpus_path = v.get<std::string>();
            else if (key == "backend")
            {
                auto s = v.get<std::string>();
                if (s == "mock")
                    c.backend = BackendKind::mock;
                else if (s == "openai_compatible")
                    c.backend = BackendKind::openai_compatible;
                else
                    throw ConfigError(fmt::format("unknown backend '{}'", s));
            }
            else if (key == "base_url")
                c.base_url = v.get<std::string>();
            else if (key == "model")
                c.model_name = v.get<std::string>();
            else if (key == "script")
                c.script_path = v.get<std::string>();
            else if (key == "strategy")
            {
                auto s = parse_strategy(v.get<std::string>());
                if (!s)
                    throw ConfigError(fmt::format("unknown strategy '{}'", v.get<std::string>()));
                c.strategy = *s;
            }
            else if (key == "sampling")
            {
                for (auto const& [sk, sv]: v.items())
                {
                    if (sk == "max_tokens")
                        c.sampling.max_tokens = sv.get<int>();
                    else if (sk == "temperature")
                        c.sampling.temperature = sv.get<double>();
                    else if (sk == "top_p")
                        c.sampling.top_p = sv.get<double>();
                    else if (sk == "best_of")
                        c.sampling.best_of = sv.get<int>();
                    else if (sk == "repetition_penalty")
                        c.sampling.repetition_penalty = sv.get<double>();
                    else if (sk == "seed")
                        c.sampling.seed = sv.get<std::int64_t>();
                    else if (sk == "num_samples")
                        c.sampling.num_samples = sv.get<int>();
                    else
                        throw ConfigError(fmt::format("unknown sampling key '{}'", sk));
                }
            }
            else if (key == "budget")
            {
                for (auto const& [bk, bv]: v.items())
                {
                    if (bk == "max_iterations")
                        c.budget.max_iterations = bv.get<int>();
                    else if (bk == "max_retries")
                        c.budget.max_retries = bv.get<int>();
                    else
                        throw ConfigError(fmt::format("unknown budget key '{}'", bk));
                }
            }
            else if (key == "num_paths")
                c.num_paths = v.get<int>();
            else if (key == "workers")
                c.workers = v.get<int>();
            else if (key == "backend_concurrency")
                c.backend_concurrency = v.get<int>();
            else if (key == "exec_workers")
                c.exec_workers = v.get<int>();
            else if (key == "runner")
            {
                auto s = v.get<std::string>();
                if (s == "stub")
                    c.runner = RunnerKind::stub;
                else if (s == "process")
                    c.runner = RunnerKind::process;
                else
                    throw ConfigError(fmt::format("unknown runner '{}'", s));
            }
            else if (key == "runner_cmd")
                c.runner_cmd = v.get<std::vector<std::string>>();
            else if (key == "stub_table")
                c.stub_table = v.get<std::string>();
            else if (key == "timeout_s")
                c.timeout_s = v.get<double>();
            else if (key == "ks")
                c.ks = v.get<std::vector<int>>();
            else if (key == "output")
                c.output_dir = v.get<std::string>();
            else if (key == "resume")
                c.resume = v.get<bool>();
            else if (key == "request_timeout_s")
                c.request_timeout = std::chrono::seconds(v.get<int>());
            else
                throw ConfigError(fmt::format("unknown config key '{}'", key));
        }
    }
    catch (nlohmann::json::exception const& e)
    {
        throw ConfigError(fmt::format("config: {}", e.what()));
    }
}

inline RunConfig load_config_file(std::string const& path, RunConfig base = {})
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(fmt::format("cannot open config file '{}'", path));
    try
    {
        apply_config_json(base, nlohmann::json::parse(in));
    }
    catch (nlohmann::json::parse_error const& e)
    {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return base;
}

inline Corpus load_corpus_or_fixtures(std::string const& path)
{
    if (path == builtin_corpus_name)
        return builtin_fixtures();
    return load_corpus(path);
}

namespace detail
{
    /// Appends per-task lines to the output files in task order, one complete record at a time,
    /// regardless of the order in which workers finish.
    class OrderedAppender
    {
      public:
        OrderedAppender(std::filesystem::path const& results, std::filesystem::path const& transcripts, bool truncate)
        {
            auto const mode = std::ios::binary | (truncate ? std::ios::trunc : std::ios::app);
            _results.open(results, std::ios::out | mode);
            _transcripts.open(transcripts, std::ios::out | mode);
            if (!_results || !_transcripts)
                throw std::runtime_error(fmt::format("cannot open output files in '{}'", results.parent_path().string()));
        }

        void submit(std::size_t slot, std::string results_lines, std::string transcript_lines)
        {
            auto const lock = std::scoped_lock(_mutex);
            _pending.emplace(slot, std::pair { std::move(results_lines), std::move(transcript_lines) });
            while (!_pending.empty() && _pending.begin()->first == _next)
            {
                auto& [res, tr] = _pending.begin()->second;
                // Transcript first: a results line is only present once its audit trail is.
                _transcripts << tr;
                _transcripts.flush();
                _results << res;
                _results.flush();
                _pending.erase(_pending.begin());
                ++_next;
            }
        }

      private:
        std::mutex _mutex;
        std::ofstream _results;
        std::ofstream _transcripts;
        std::map<std::size_t, std::pair<std::string, std::string>> _pending;
        std::size_t _next = 0;
    };

    inline std::string utc_timestamp()
    {
        auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm {};
        ::gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    inline void write_file(std::filesystem::path const& p, std::string const& content)
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
        out << content;
    }

    /// Merges repeated strategy runs on one task into a single result.
    inline StrategyResult merge_paths(std::vector<StrategyResult> paths)
    {
        auto merged = std::move(paths.front());
        for (std::size_t i = 1; i < paths.size(); ++i)
        {
            for (auto& c: paths[i].candidates)
                merged.candidates.push_back(std::move(c));
            merged.samples_n += paths[i].samples_n;
            merged.correct_c += paths[i].correct_c;
            if (paths[i].status != "ok" && merged.status == "ok")
                merged.status = paths[i].status;
        }
        return merged;
    }
} // namespace detail

/// Parsed results.jsonl line, as much as reporting needs.
inline ResultRecord parse_result_line(std::string const& line, std::string const& source, std::size_t lineno)
{
    auto fail = [&](std::string_view why) {
        return std::runtime_error(fmt::format("schema mismatch in {} line {}: {}", source, lineno, why));
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
    if (!j.is_object())
        throw fail("record is not an object");
    for (auto const* key: { "model", "strategy", "task_id" })
        if (!j.contains(key) || !j[key].is_string())
            throw fail(fmt::format("missing string field '{}'", key));
    for (auto const* key: { "samples_n", "correct_c" })
        if (!j.contains(key) || !j[key].is_number_integer())
            throw fail(fmt::format("missing integer field '{}'", key));
    ResultRecord r { j["model"].get<std::string>(),
                     j["strategy"].get<std::string>(),
                     SampleTally { j["task_id"].get<std::string>(), j["samples_n"].get<int>(), j["correct_c"].get<int>() } };
    if (!parse_strategy(r.strategy))
        throw fail(fmt::format("unknown strategy '{}'", r.strategy));
    if (r.tally.n < 1 || r.tally.c < 0 || r.tally.c > r.tally.n)
        throw fail("samples_n / correct_c out of range");
    return r;
}

inline std::vector<ResultRecord> read_results(std::filesystem::path const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(fmt::format("cannot open results file '{}'", path.string()));
    std::vector<ResultRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (text::is_blank(line))
            continue;
        out.push_back(parse_result_line(line, path.string(), lineno));
    }
    return out;
}

inline void write_report_files(RunReport const& report, std::filesystem::path const& dir)
{
    detail::write_file(dir / "report.md", render_markdown(report));
    detail::write_file(dir / "report.csv", render_csv(report));
    detail::write_file(dir / "report.json", render_json(report).dump(2) + "\n");
}

/// Exit codes of the command functions.
enum ExitCode : int
{
    exit_ok = 0,
    exit_findings = 1,
    exit_config = 2,
    exit_corpus = 3,
    exit_backend_unreachable = 4,
    exit_io = 5,
};

/// Runs the configured strategy over every task. Returns an ExitCode; pass rates never affect it.
inline int cmd_run(RunConfig const& config, std::ostream& log = std::cerr)
{
    try
    {
        validate(config);
    }
    catch (ConfigError const& e)
    {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    }

    Corpus corpus;
    try
    {
        corpus = load_corpus_or_fixtures(config.corpus_path);
    }
    catch (CorpusError const& e)
    {
        log << "corpus error: " << e.what() << "\n";
        return exit_corpus;
    }

    // Backend
    std::unique_ptr<ScriptedMock> mock_template;
    std::unique_ptr<HttpBackend> http;
    if (config.backend == BackendKind::mock)
    {
        try
        {
            mock_template = std::make_unique<ScriptedMock>(load_script(config.script_path));
        }
        catch (std::exception const& e)
        {
            log << "config error: " << e.what() << "\n";
            return exit_config;
        }
    }
    else
    {
        HttpBackendConfig hc;
        hc.base_url = config.base_url;
        hc.model = config.model_name;
        hc.timeout = config.request_timeout;
        if (char const* key = std::getenv(api_key_env))
            hc.api_key = key;
        try
        {
            http = std::make_unique<HttpBackend>(std::move(hc));
            http->probe();
        }
        catch (std::invalid_argument const& e)
        {
            log << "config error: " << e.what() << "\n";
            return exit_config;
        }
        catch (TransportError const& e)
        {
            log << "backend unreachable: " << e.what() << "\n";
            return exit_backend_unreachable;
        }
    }

    // Runner
    std::unique_ptr<Runner> runner;
    try
    {
        if (config.runner == RunnerKind::stub)
            runner = std::make_unique<StubRunner>(config.stub_table.empty() ? std::unordered_map<std::string, CannedVerdict> {}
                                                                             : load_stub_table(config.stub_table));
        else
            runner = std::make_unique<ProcessRunner>(ProcessRunnerConfig { .argv = config.runner_cmd });
    }
    catch (std::exception const& e)
    {
        log << "config error: " << e.what() << "\n";
        return exit_config;
    }

    namespace fs = std::filesystem;
    fs::path const out_dir = config.output_dir;
    auto const results_path = out_dir / "results.jsonl";
    auto const transcripts_path = out_dir / "transcripts.jsonl";
    auto const started_at = detail::utc_timestamp();

    std::set<std::string> done;
    std::vector<Task const*> todo;
    try
    {
        fs::create_directories(out_dir);
        detail::write_file(out_dir / "config.resolved", to_json(config).dump(2) + "\n");
        if (config.resume && fs::exists(results_path))
            for (auto const& r: read_results(results_path))
                if (r.model == config.model_name && r.strategy == to_string(config.strategy))
                    done.insert(r.tally.task_id);
    }
    catch (std::exception const& e)
    {
        log << "io error: " << e.what() << "\n";
        return exit_io;
    }
    for (auto const& t: corpus.tasks)
        if (!done.contains(t.id))
            todo.push_back(&t);

    StrategyOptions opts;
    opts.strategy = config.strategy;
    opts.params = config.sampling;
    opts.budget = config.budget;

    Sandbox sandbox(*runner, config.timeout_s, static_cast<unsigned>(config.exec_workers));
    std::counting_semaphore<> backend_slots(config.backend_concurrency);

    std::optional<detail::OrderedAppender> appender;
    try
    {
        appender.emplace(results_path, transcripts_path, !config.resume);
    }
    catch (std::exception const& e)
    {
        log << "io error: " << e.what() << "\n";
        return exit_io;
    }

    std::atomic<std::size_t> next { 0 };
    std::mutex error_mutex;
    std::string worker_error;
    auto worker = [&] {
        for (;;)
        {
            auto const i = next.fetch_add(1);
            if (i >= todo.size())
                return;
            auto const& task = *todo[i];
            try
            {
                std::vector<StrategyResult> paths;
                std::string transcript_lines;
                for (int p = 0; p < config.num_paths; ++p)
                {
                    // The mock is per path so script consumption does not depend on scheduling.
                    std::unique_ptr<ScriptedMock> mock;
                    Backend* inner = http.get();
                    if (mock_template)
                    {
                        mock = mock_template->fresh();
                        inner = mock.get();
                    }
                    LimitedBackend backend(*inner, backend_slots);
                    Transcript transcript;
                    paths.push_back(run_strategy(task, opts, backend, sandbox, &transcript));
                    if (config.strategy == Strategy::codeact_agent)
                        transcript_lines += to_json(transcript).dump() + "\n";
                }
                auto merged = detail::merge_paths(std::move(paths));
                auto j = to_json(merged);
                j["model"] = config.model_name;
                appender->submit(i, j.dump() + "\n", std::move(transcript_lines));
            }
            catch (std::exception const& e)
            {
                auto const lock = std::scoped_lock(error_mutex);
                worker_error = fmt::format("task '{}': {}", task.id, e.what());
                appender->submit(i, "", "");
            }
        }
    };

    auto const pool_size = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(1, todo.size()));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < pool_size; ++w)
            pool.emplace_back(worker);
    }
    appender.reset();

    if (!worker_error.empty())
        log << "warning: " << worker_error << "\n";

    try
    {
        auto const records = read_results(results_path);
        if (!records.empty())
            write_report_files(build_report(records, config.ks), out_dir);
        detail::write_file(out_dir / "run_meta.json",
                           nlohmann::json { { "started_at", started_at },
                                            { "finished_at", detail::utc_timestamp() },
                                            { "tasks_total", corpus.tasks.size() },
                                            { "tasks_run", todo.size() },
                                            { "tasks_skipped", done.size() } }
                                   .dump(2)
                               + "\n");
    }
    catch (std::exception const& e)
    {
        log << "report error: " << e.what() << "\n";
        return exit_io;
    }
    log << fmt::format("{} task(s) run, {} skipped; results in {}\n", todo.size(), done.size(), out_dir.string());
    return exit_ok;
}

/// Merges several results files into one comparison table.
inline int cmd_report(std::vector<std::string> const& results_paths,
                      std::vector<int> const& ks,
                      std::string const& output_dir,
                      std::ostream& out = std::cout,
                      std::ostream& log = std::cerr)
{
    if (results_paths.empty())
    {
        log << "report: no results files given\n";
        return exit_config;
    }
    std::vector<ResultRecord> all;
    std::map<std::pair<std::string, std::string>, std::string> owner;
    try
    {
        for (auto const& path: results_paths)
        {
            auto records = read_results(path);
            std::set<std::pair<std::string, std::string>> here;
            for (auto const& r: records)
                here.emplace(r.model, r.strategy);
            for (auto const& key: here)
            {
                auto [it, inserted] = owner.emplace(key, path);
                if (!inserted)
                {
                    log << fmt::format("report: ({}, {}) appears in both '{}' and '{}'\n", key.first, key.second, it->second, path);
                    return exit_findings;
                }
            }
            for (auto& r: records)
                all.push_back(std::move(r));
        }
        if (all.empty())
        {
            log << "report: no records\n";
            return exit_findings;
        }
        auto const report = build_report(all, ks);
        if (!output_dir.empty())
        {
            std::filesystem::create_directories(output_dir);
            write_report_files(report, output_dir);
        }
        out << render_markdown(report);
    }
    catch (std::exception const& e)
    {
        log << "report: " << e.what() << "\n";
        return exit_findings;
    }
    return exit_ok;
}

/// Lints a corpus without contacting any backend. Exit code 1 when anything is wrong.
inline int cmd_validate(std::string const& corpus_path, std::ostream& out = std::cout)
{
    std::size_t count = 0;
    std::vector<Diagnostic> diags;
    if (corpus_path == builtin_corpus_name)
    {
        auto const corpus = builtin_fixtures();
        count = corpus.tasks.size();
        for (auto const& t: corpus.tasks)
            for (auto& p: task_problems(t))
                diags.push_back(Diagnostic { 0, CorpusErrorKind::invalid_task, std::move(p) });
    }
    else
        diags = validate_corpus(corpus_path, &count);

    if (diags.empty())
    {
        out << fmt::format("{} tasks OK\n", count);
        return exit_ok;
    }
    for (auto const& d: diags)
    {
        if (d.line)
            out << fmt::format("{}:{}: {}\n", corpus_path, d.line, d.message);
        else
            out << fmt::format("{}: {}\n", corpus_path, d.message);
    }
    out << fmt::format("{} problem(s) found\n", diags.size());
    return exit_findings;
}

} // namespace codeact
