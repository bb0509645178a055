// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <codeact/text.hpp>

#include <json.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace codeact
{

inline constexpr double default_timeout_s = 5.0;

struct ExecutionRequest
{
    std::string code;
    std::vector<std::string> tests;
    double timeout_s = default_timeout_s;
};

enum class VerdictStatus
{
    pass,
    assertion_failure,
    runtime_error,
    syntax_error,
    timeout,
    runner_crash,
};

inline std::string_view to_string(VerdictStatus s)
{
    switch (s)
    {
        case VerdictStatus::pass: return "pass";
        case VerdictStatus::assertion_failure: return "assertion_failure";
        case VerdictStatus::runtime_error: return "runtime_error";
        case VerdictStatus::syntax_error: return "syntax_error";
        case VerdictStatus::timeout: return "timeout";
        case VerdictStatus::runner_crash: return "runner_crash";
    }
    return "runner_crash";
}

inline std::optional<VerdictStatus> parse_verdict_status(std::string_view s)
{
    for (auto v: { VerdictStatus::pass,
                   VerdictStatus::assertion_failure,
                   VerdictStatus::runtime_error,
                   VerdictStatus::syntax_error,
                   VerdictStatus::timeout,
                   VerdictStatus::runner_crash })
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

struct TestOutcome
{
    std::string test;
    bool passed = false;
    std::optional<std::string> error;

    bool operator==(TestOutcome const&) const = default;
};

struct ExecutionVerdict
{
    VerdictStatus status = VerdictStatus::runner_crash;
    std::vector<TestOutcome> per_test;
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;

    [[nodiscard]] bool passed() const noexcept { return status == VerdictStatus::pass; }

    /// Ordered per-assertion pass flags.
    [[nodiscard]] std::vector<bool> signature() const
    {
        std::vector<bool> sig;
        sig.reserve(per_test.size());
        for (auto const& t: per_test)
            sig.push_back(t.passed);
        return sig;
    }

    bool operator==(ExecutionVerdict const&) const = default;
};

inline nlohmann::json to_json(ExecutionVerdict const& v)
{
    auto tests = nlohmann::json::array();
    for (auto const& t: v.per_test)
        tests.push_back({ { "test", t.test },
                          { "passed", t.passed },
                          { "error", t.error ? nlohmann::json(*t.error) : nlohmann::json(nullptr) } });
    return nlohmann::json {
        { "status", to_string(v.status) }, { "per_test", std::move(tests) }, { "stdout", v.stdout_text },
        { "stderr", v.stderr_text },       { "duration_ms", v.duration_ms },
    };
}

/// Wire form of a request, as written to the runner's stdin.
inline std::string encode_request(ExecutionRequest const& req)
{
    return nlohmann::json { { "code", req.code }, { "tests", req.tests }, { "timeout_s", req.timeout_s } }.dump();
}

/// What a runner process left behind: exit state and raw streams.
struct RawRunnerReply
{
    int exit_code = 0;
    bool signaled = false;
    bool timed_out = false;
    std::string stdout_bytes;
    std::string stderr_bytes;
    std::int64_t duration_ms = 0;
};

namespace detail
{
    inline ExecutionVerdict crash_verdict(std::string reason, RawRunnerReply const& raw)
    {
        ExecutionVerdict v;
        v.status = VerdictStatus::runner_crash;
        v.stderr_text = std::move(reason);
        if (!raw.stderr_bytes.empty())
            v.stderr_text += "\n" + raw.stderr_bytes;
        v.duration_ms = raw.duration_ms;
        return v;
    }
} // namespace detail

/// Maps a runner's raw output to a verdict. Pure: the same input always gives the same verdict.
/// When `expected_tests` is given, per_test entries must name those tests in order.
inline ExecutionVerdict classify(RawRunnerReply const& raw,
                                 std::optional<std::span<std::string const>> expected_tests = std::nullopt,
                                 double timeout_s = default_timeout_s)
{
    if (raw.timed_out)
    {
        ExecutionVerdict v;
        v.status = VerdictStatus::timeout;
        v.stderr_text = fmt::format("execution exceeded the {}s time limit and was killed", timeout_s);
        v.duration_ms = std::max(raw.duration_ms, static_cast<std::int64_t>(std::ceil(timeout_s * 1000.0)));
        return v;
    }
    if (raw.signaled)
        return detail::crash_verdict(fmt::format("runner killed by signal {}", raw.exit_code), raw);
    if (raw.exit_code != 0)
        return detail::crash_verdict(fmt::format("runner exited with status {}", raw.exit_code), raw);

    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(raw.stdout_bytes);
    }
    catch (nlohmann::json::exception const& e)
    {
        return detail::crash_verdict(fmt::format("protocol violation: {}", e.what()), raw);
    }

    auto violation = [&](std::string_view why) {
        return detail::crash_verdict(fmt::format("protocol violation: {}", why), raw);
    };
    if (!j.is_object())
        return violation("reply is not a JSON object");

    auto status_it = j.find("status");
    if (status_it == j.end() || !status_it->is_string())
        return violation("missing string field 'status'");
    auto status = parse_verdict_status(status_it->get<std::string>());
    if (!status || *status == VerdictStatus::timeout || *status == VerdictStatus::runner_crash)
        return violation(fmt::format("unknown status '{}'", status_it->get<std::string>()));

    ExecutionVerdict v;
    v.status = *status;

    auto per_test = j.find("per_test");
    if (per_test == j.end() || !per_test->is_array())
        return violation("missing array field 'per_test'");
    for (auto const& t: *per_test)
    {
        if (!t.is_object() || !t.contains("test") || !t["test"].is_string() || !t.contains("passed")
            || !t["passed"].is_boolean())
            return violation("malformed per_test entry");
        TestOutcome o { t["test"].get<std::string>(), t["passed"].get<bool>(), std::nullopt };
        if (auto e = t.find("error"); e != t.end() && !e->is_null())
        {
            if (!e->is_string())
                return violation("per_test error must be a string or null");
            o.error = e->get<std::string>();
        }
        v.per_test.push_back(std::move(o));
    }

    for (auto const* name: { "stdout", "stderr" })
        if (!j.contains(name) || !j[name].is_string())
            return violation(fmt::format("missing string field '{}'", name));
    v.stdout_text = j["stdout"].get<std::string>();
    v.stderr_text = j["stderr"].get<std::string>();

    auto dur = j.find("duration_ms");
    if (dur == j.end() || !dur->is_number_integer() || dur->get<std::int64_t>() < 0)
        return violation("duration_ms must be a non-negative integer");
    v.duration_ms = dur->get<std::int64_t>();

    if (v.status == VerdictStatus::syntax_error)
        v.per_test.clear();

    bool const all_passed = std::all_of(v.per_test.begin(), v.per_test.end(), [](auto const& t) { return t.passed; });
    if (v.status == VerdictStatus::pass && !all_passed)
        return violation("status pass with a failing test");
    if (v.status != VerdictStatus::pass && v.status != VerdictStatus::syntax_error && v.status != VerdictStatus::runtime_error
        && all_passed)
        return violation(fmt::format("status {} but every test passed", to_string(v.status)));

    if (expected_tests)
    {
        auto const want = *expected_tests;
        if (v.per_test.size() > want.size())
            return violation("more per_test entries than tests");
        if (v.status == VerdictStatus::pass && v.per_test.size() != want.size())
            return violation("status pass but not every test was evaluated");
        for (std::size_t i = 0; i < v.per_test.size(); ++i)
            if (v.per_test[i].test != want[i])
                return violation(fmt::format("per_test[{}] does not match request order", i));
    }
    return v;
}

/// Something that runs one request out of the harness process and reports what happened.
class Runner
{
  public:
    virtual ~Runner() = default;
    virtual RawRunnerReply run(ExecutionRequest const& req) = 0;
};

// {{{ process runner

struct ProcessRunnerConfig
{
    std::vector<std::string> argv; // runner command, e.g. {"python3", "runner.py"}
    std::chrono::milliseconds grace { 2000 };
    std::size_t max_output_bytes = 16u << 20;
    std::vector<std::string> env_allowlist { "PATH", "LANG", "LC_ALL", "LC_CTYPE" };
};

/// Spawns a fresh runner process per request, in its own process group and a scratch
/// directory, with a minimal environment. The whole group is killed at the deadline.
class ProcessRunner final: public Runner
{
  public:
    explicit ProcessRunner(ProcessRunnerConfig config): _config(std::move(config))
    {
        if (_config.argv.empty())
            throw std::invalid_argument("process runner: empty command");
        // Writes to a runner that already exited must fail with EPIPE, not kill the harness.
        std::signal(SIGPIPE, SIG_IGN);
    }

    RawRunnerReply run(ExecutionRequest const& req) override
    {
        auto const scratch = make_scratch_dir();
        struct Cleanup
        {
            std::filesystem::path dir;
            ~Cleanup()
            {
                std::error_code ec;
                std::filesystem::remove_all(dir, ec);
            }
        } cleanup { scratch };

        auto const payload = encode_request(req);
        return spawn_and_wait(scratch, payload, req.timeout_s);
    }

    [[nodiscard]] ProcessRunnerConfig const& config() const noexcept { return _config; }

  private:
    static std::filesystem::path make_scratch_dir()
    {
        auto tmpl = (std::filesystem::temp_directory_path() / "codeact-sbx-XXXXXX").string();
        if (!::mkdtemp(tmpl.data()))
            throw std::runtime_error(fmt::format("mkdtemp failed: {}", std::strerror(errno)));
        return tmpl;
    }

    [[nodiscard]] std::string resolve_executable() const
    {
        auto const& exe = _config.argv.front();
        if (exe.find('/') != std::string::npos)
            return exe;
        char const* path = std::getenv("PATH");
        std::string_view dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
        while (!dirs.empty())
        {
            auto const colon = dirs.find(':');
            auto const dir = dirs.substr(0, colon);
            auto candidate = std::filesystem::path(dir.empty() ? "." : std::string(dir)) / exe;
            if (::access(candidate.c_str(), X_OK) == 0)
                return candidate.string();
            if (colon == std::string_view::npos)
                break;
            dirs.remove_prefix(colon + 1);
        }
        return exe;
    }

    [[nodiscard]] std::vector<std::string> child_environment(std::filesystem::path const& scratch) const
    {
        std::vector<std::string> env;
        for (auto const& name: _config.env_allowlist)
            if (char const* value = std::getenv(name.c_str()))
                env.push_back(name + "=" + value);
        env.push_back("HOME=" + scratch.string());
        env.push_back("TMPDIR=" + scratch.string());
        env.emplace_back("PYTHONIOENCODING=utf-8");
        env.emplace_back("PYTHONDONTWRITEBYTECODE=1");
        return env;
    }

    RawRunnerReply spawn_and_wait(std::filesystem::path const& scratch, std::string const& payload, double timeout_s)
    {
        using clock = std::chrono::steady_clock;

        // Everything the child needs is prepared before fork; after fork only
        // async-signal-safe calls are made.
        auto const exe = resolve_executable();
        auto const env = child_environment(scratch);
        auto const dir = scratch.string();
        std::vector<char*> argv;
        for (auto const& a: _config.argv)
            argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        std::vector<char*> envp;
        for (auto const& e: env)
            envp.push_back(const_cast<char*>(e.c_str()));
        envp.push_back(nullptr);

        Pipe in, out, err;
        auto const start = clock::now();
        pid_t const pid = ::fork();
        if (pid < 0)
            throw std::runtime_error(fmt::format("fork failed: {}", std::strerror(errno)));
        if (pid == 0)
        {
            ::setpgid(0, 0);
            ::dup2(in.read_end, STDIN_FILENO);
            ::dup2(out.write_end, STDOUT_FILENO);
            ::dup2(err.write_end, STDERR_FILENO);
            if (::chdir(dir.c_str()) != 0)
                ::_exit(126);
            ::execve(exe.c_str(), argv.data(), envp.data());
            ::_exit(127);
        }
        ::setpgid(pid, pid);
        in.close_read();
        out.close_write();
        err.close_write();
        set_nonblocking(in.write_end);
        set_nonblocking(out.read_end);
        set_nonblocking(err.read_end);

        auto const deadline = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(timeout_s));
        RawRunnerReply raw;
        std::size_t written = 0;
        bool out_open = true;
        bool err_open = true;

        while (out_open || err_open)
        {
            auto const now = clock::now();
            if (now >= deadline)
            {
                raw.timed_out = true;
                break;
            }
            std::array<pollfd, 3> fds {};
            nfds_t count = 0;
            int in_idx = -1, out_idx = -1, err_idx = -1;
            if (in.write_end >= 0)
            {
                in_idx = static_cast<int>(count);
                fds[count++] = pollfd { in.write_end, POLLOUT, 0 };
            }
            if (out_open)
            {
                out_idx = static_cast<int>(count);
                fds[count++] = pollfd { out.read_end, POLLIN, 0 };
            }
            if (err_open)
            {
                err_idx = static_cast<int>(count);
                fds[count++] = pollfd { err.read_end, POLLIN, 0 };
            }
            auto const wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
            int const rc = ::poll(fds.data(), count, static_cast<int>(std::min<std::int64_t>(wait_ms, 100)));
            if (rc < 0 && errno != EINTR)
                break;
            if (rc <= 0)
                continue;

            if (in_idx >= 0 && fds[in_idx].revents)
            {
                auto const n = ::write(in.write_end, payload.data() + written, payload.size() - written);
                if (n > 0)
                    written += static_cast<std::size_t>(n);
                if ((n < 0 && errno != EAGAIN) || written == payload.size())
                    in.close_write();
            }
            if (out_idx >= 0 && fds[out_idx].revents)
                out_open = drain(out.read_end, raw.stdout_bytes);
            if (err_idx >= 0 && fds[err_idx].revents)
                err_open = drain(err.read_end, raw.stderr_bytes);
        }
        in.close_write();

        int status = 0;
        if (!raw.timed_out)
        {
            // Streams closed; give the process until the deadline to exit.
            while (::waitpid(pid, &status, WNOHANG) == 0)
            {
                if (clock::now() >= deadline)
                {
                    raw.timed_out = true;
                    break;
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(2));
            }
        }
        ::kill(-pid, SIGKILL);
        if (raw.timed_out)
            ::waitpid(pid, &status, 0);

        raw.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - start).count();
        if (!raw.timed_out)
        {
            if (WIFSIGNALED(status))
            {
                raw.signaled = true;
                raw.exit_code = WTERMSIG(status);
            }
            else
                raw.exit_code = WEXITSTATUS(status);
        }
        return raw;
    }

    /// Returns false at EOF.
    bool drain(int fd, std::string& sink) const
    {
        std::array<char, 8192> buf {};
        for (;;)
        {
            auto const n = ::read(fd, buf.data(), buf.size());
            if (n > 0)
            {
                auto const room = _config.max_output_bytes - std::min(_config.max_output_bytes, sink.size());
                sink.append(buf.data(), std::min(room, static_cast<std::size_t>(n)));
                continue;
            }
            if (n == 0)
                return false;
            return errno == EAGAIN || errno == EINTR;
        }
    }

    static void set_nonblocking(int fd)
    {
        if (fd >= 0)
            ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    }

    struct Pipe
    {
        int read_end = -1;
        int write_end = -1;

        Pipe()
        {
            std::array<int, 2> fds {};
            if (::pipe2(fds.data(), O_CLOEXEC) != 0)
                throw std::runtime_error(fmt::format("pipe failed: {}", std::strerror(errno)));
            read_end = fds[0];
            write_end = fds[1];
        }
        ~Pipe()
        {
            close_read();
            close_write();
        }
        Pipe(Pipe const&) = delete;
        Pipe& operator=(Pipe const&) = delete;

        void close_read()
        {
            if (read_end >= 0)
                ::close(read_end);
            read_end = -1;
        }
        void close_write()
        {
            if (write_end >= 0)
                ::close(write_end);
            write_end = -1;
        }
    };

    ProcessRunnerConfig _config;
};

// }}}

// {{{ stub runner

/// A canned verdict for the stub runner. `passed` gives per-test flags (may be shorter than the
/// test list when a runtime error stops the run); when absent it is derived from `status`.
struct CannedVerdict
{
    VerdictStatus status = VerdictStatus::runtime_error;
    std::optional<std::vector<bool>> passed;
    std::optional<std::string> error;
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;
};

/// Strips leading blank lines and trailing whitespace: the form in which code is compared.
inline std::string normalize_code_key(std::string_view code)
{
    auto const end = code.find_last_not_of(" \t\r\n\f\v");
    if (end == std::string_view::npos)
        return {};
    code = code.substr(0, end + 1);
    std::size_t start = 0;
    for (;;)
    {
        auto const nl = code.find('\n', start);
        if (nl == std::string_view::npos || !text::is_blank(code.substr(start, nl - start)))
            break;
        start = nl + 1;
    }
    return std::string(code.substr(start));
}

/// In-process simulated runner: looks the code up in a table and emits the canned verdict over
/// the same wire protocol the real runner uses. Timeouts are simulated without waiting.
class StubRunner final: public Runner
{
  public:
    StubRunner() = default;

    explicit StubRunner(std::unordered_map<std::string, CannedVerdict> table)
    {
        for (auto& [code, verdict]: table)
            _table.insert_or_assign(normalize_code_key(code), std::move(verdict));
    }

    void add(std::string_view code, CannedVerdict verdict)
    {
        auto const lock = std::scoped_lock(_mutex);
        _table.insert_or_assign(normalize_code_key(code), std::move(verdict));
    }

    RawRunnerReply run(ExecutionRequest const& req) override
    {
        CannedVerdict canned;
        {
            auto const lock = std::scoped_lock(_mutex);
            ++_runs;
            if (auto it = _table.find(normalize_code_key(req.code)); it != _table.end())
                canned = it->second;
            else
                canned = default_verdict();
        }

        RawRunnerReply raw;
        if (canned.status == VerdictStatus::timeout)
        {
            raw.timed_out = true;
            raw.duration_ms = static_cast<std::int64_t>(std::ceil(req.timeout_s * 1000.0));
            return raw;
        }
        if (canned.status == VerdictStatus::runner_crash)
        {
            raw.exit_code = 1;
            raw.stderr_bytes = canned.stderr_text;
            return raw;
        }
        raw.stdout_bytes = to_json(expand(canned, req.tests)).dump();
        raw.duration_ms = canned.duration_ms;
        return raw;
    }

    [[nodiscard]] std::size_t runs() const
    {
        auto const lock = std::scoped_lock(_mutex);
        return _runs;
    }

    static CannedVerdict default_verdict()
    {
        CannedVerdict v;
        v.status = VerdictStatus::runtime_error;
        v.passed = std::vector<bool> {};
        v.stderr_text = "RuntimeError: stub runner has no canned verdict for this code";
        return v;
    }

  private:
    static ExecutionVerdict expand(CannedVerdict const& c, std::vector<std::string> const& tests)
    {
        ExecutionVerdict v;
        v.status = c.status;
        v.stdout_text = c.stdout_text;
        v.stderr_text = c.stderr_text;
        v.duration_ms = c.duration_ms;
        if (c.status == VerdictStatus::syntax_error)
            return v;

        std::vector<bool> flags;
        if (c.passed)
            flags = *c.passed;
        else if (c.status == VerdictStatus::pass)
            flags.assign(tests.size(), true);
        else if (c.status == VerdictStatus::assertion_failure)
            flags.assign(tests.size(), false);
        else if (!tests.empty())
            flags.assign(1, false);
        flags.resize(std::min(flags.size(), tests.size()));

        auto const default_error = c.status == VerdictStatus::assertion_failure ? "AssertionError" : "RuntimeError";
        for (std::size_t i = 0; i < flags.size(); ++i)
            v.per_test.push_back(TestOutcome { tests[i],
                                               flags[i],
                                               flags[i] ? std::nullopt
                                                        : std::optional<std::string>(c.error.value_or(default_error)) });
        return v;
    }

    std::unordered_map<std::string, CannedVerdict> _table;
    std::size_t _runs = 0;
    mutable std::mutex _mutex;
};

/// Stub table file: one `{"code", "status", "passed"?, "error"?, "stdout"?, "stderr"?, "duration_ms"?}` per line.
inline std::unordered_map<std::string, CannedVerdict> load_stub_table(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(fmt::format("cannot open stub table '{}'", path));
    std::unordered_map<std::string, CannedVerdict> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (text::is_blank(line))
            continue;
        auto fail = [&](std::string_view why) {
            return std::runtime_error(fmt::format("{}:{}: {}", path, lineno, why));
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
        if (!j.is_object() || !j.contains("code") || !j["code"].is_string() || !j.contains("status")
            || !j["status"].is_string())
            throw fail("stub entry needs string fields 'code' and 'status'");
        CannedVerdict v;
        auto status = parse_verdict_status(j["status"].get<std::string>());
        if (!status)
            throw fail("unknown status");
        v.status = *status;
        if (j.contains("passed"))
            v.passed = j["passed"].get<std::vector<bool>>();
        if (j.contains("error") && j["error"].is_string())
            v.error = j["error"].get<std::string>();
        v.stdout_text = j.value("stdout", "");
        v.stderr_text = j.value("stderr", "");
        v.duration_ms = j.value("duration_ms", std::int64_t { 0 });
        table.insert_or_assign(normalize_code_key(j["code"].get<std::string>()), std::move(v));
    }
    return table;
}

// }}}

/// Runs a request through a runner and classifies the result. Never throws for runner failures;
/// they come back as runner_crash verdicts.
inline ExecutionVerdict execute(ExecutionRequest const& req, Runner& runner)
{
    if (!(req.timeout_s > 0.0))
        throw std::invalid_argument("timeout_s must be positive");
    if (req.code.empty())
        throw std::invalid_argument("code must not be empty");
    RawRunnerReply raw;
    try
    {
        raw = runner.run(req);
    }
    catch (std::exception const& e)
    {
        return detail::crash_verdict(fmt::format("runner failed: {}", e.what()), raw);
    }
    return classify(raw, std::span<std::string const>(req.tests), req.timeout_s);
}

/// Shared entry point for strategies: applies the configured timeout and bounds how many
/// executions run at once.
class Sandbox
{
  public:
    explicit Sandbox(Runner& runner,
                     double timeout_s = default_timeout_s,
                     unsigned max_parallel = std::max(1u, std::thread::hardware_concurrency())):
        _runner(runner), _timeout_s(timeout_s), _slots(static_cast<std::ptrdiff_t>(std::max(1u, max_parallel)))
    {
        if (!(timeout_s > 0.0))
            throw std::invalid_argument("timeout_s must be positive");
    }

    ExecutionVerdict execute(std::string const& code, std::vector<std::string> const& tests)
    {
        _slots.acquire();
        struct Release
        {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release { _slots };
        return codeact::execute(ExecutionRequest { code, tests, _timeout_s }, _runner);
    }

    [[nodiscard]] double timeout_s() const noexcept { return _timeout_s; }

  private:
    Runner& _runner;
    double _timeout_s;
    std::counting_semaphore<> _slots;
};

} // namespace codeact
