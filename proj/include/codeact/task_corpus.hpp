// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <codeact/text.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fmt/format.h>

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace codeact
{

enum class Split
{
    dev,
    blind_test,
};

inline std::string_view to_string(Split s)
{
    return s == Split::dev ? "dev" : "blind_test";
}

inline std::optional<Split> parse_split(std::string_view s)
{
    if (s == "dev")
        return Split::dev;
    if (s == "blind_test")
        return Split::blind_test;
    return std::nullopt;
}

/// One benchmark problem. `instruction` is kept byte-for-byte as read; no Unicode normalization.
struct Task
{
    std::string id;
    std::string instruction;
    std::string entry_point;
    std::vector<std::string> tests;
    Split split = Split::dev;

    bool operator==(Task const&) const = default;
};

inline constexpr std::string_view assertion_keyword = "assert ";

/// Immutable after load; safe to share across workers.
struct Corpus
{
    std::vector<Task> tasks;
    std::string source_path;

    [[nodiscard]] Task const* find(std::string_view id) const
    {
        for (auto const& t: tasks)
            if (t.id == id)
                return &t;
        return nullptr;
    }

    bool operator==(Corpus const&) const = default;
};

enum class CorpusErrorKind
{
    io,
    malformed_record,
    duplicate_id,
    empty_corpus,
    invalid_task,
};

struct Diagnostic
{
    std::size_t line = 0; // 1-based, 0 when not tied to a line
    CorpusErrorKind kind = CorpusErrorKind::malformed_record;
    std::string message;
};

class CorpusError: public std::runtime_error
{
  public:
    explicit CorpusError(Diagnostic d):
        std::runtime_error(d.line ? fmt::format("line {}: {}", d.line, d.message) : d.message),
        _diagnostic(std::move(d))
    {
    }

    [[nodiscard]] CorpusErrorKind kind() const noexcept { return _diagnostic.kind; }
    [[nodiscard]] std::size_t line() const noexcept { return _diagnostic.line; }
    [[nodiscard]] Diagnostic const& diagnostic() const noexcept { return _diagnostic; }

  private:
    Diagnostic _diagnostic;
};

/// Checks the Task invariants that do not need corpus context.
inline std::vector<std::string> task_problems(Task const& t)
{
    std::vector<std::string> out;
    if (t.id.empty())
        out.emplace_back("id is empty");
    if (text::is_blank(t.instruction))
        out.push_back(fmt::format("task '{}': instruction is empty", t.id));
    else if (!text::is_valid_utf8(t.instruction))
        out.push_back(fmt::format("task '{}': instruction is not valid UTF-8", t.id));
    if (t.entry_point.empty())
        out.push_back(fmt::format("task '{}': entry_point is empty", t.id));
    if (t.tests.empty())
        out.push_back(fmt::format(
            "task '{}' has no tests; a task passes only when all of its assertions hold, so at least one is required",
            t.id));
    for (std::size_t i = 0; i < t.tests.size(); ++i)
        if (!t.tests[i].starts_with(assertion_keyword))
            out.push_back(fmt::format("task '{}': test #{} does not start with \"assert \": {}", t.id, i + 1, t.tests[i]));
    return out;
}

inline nlohmann::json to_json(Task const& t)
{
    return nlohmann::json {
        { "id", t.id },
        { "instruction", t.instruction },
        { "entry_point", t.entry_point },
        { "tests", t.tests },
        { "split", to_string(t.split) },
    };
}

namespace detail
{
    struct RecordOutcome
    {
        std::optional<Task> task;
        std::vector<Diagnostic> problems;
    };

    inline RecordOutcome parse_record(std::string_view line, std::size_t lineno)
    {
        RecordOutcome out;
        auto fail = [&](CorpusErrorKind kind, std::string msg) {
            out.problems.push_back(Diagnostic { lineno, kind, std::move(msg) });
        };

        if (!text::is_valid_utf8(line))
        {
            fail(CorpusErrorKind::malformed_record, "record is not valid UTF-8");
            return out;
        }

        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(line);
        }
        catch (nlohmann::json::parse_error const& e)
        {
            fail(CorpusErrorKind::malformed_record, fmt::format("bad JSON: {}", e.what()));
            return out;
        }
        if (!j.is_object())
        {
            fail(CorpusErrorKind::malformed_record, "record is not a JSON object");
            return out;
        }

        Task t;
        auto string_field = [&](char const* name, std::string& dst) {
            auto it = j.find(name);
            if (it == j.end())
                fail(CorpusErrorKind::malformed_record, fmt::format("missing field '{}'", name));
            else if (!it->is_string())
                fail(CorpusErrorKind::malformed_record, fmt::format("field '{}' must be a string", name));
            else
                dst = it->get<std::string>();
        };
        string_field("id", t.id);
        string_field("instruction", t.instruction);
        string_field("entry_point", t.entry_point);

        if (auto it = j.find("tests"); it == j.end())
            fail(CorpusErrorKind::malformed_record, "missing field 'tests'");
        else if (!it->is_array())
            fail(CorpusErrorKind::malformed_record, "field 'tests' must be an array of strings");
        else
        {
            for (auto const& test: *it)
            {
                if (!test.is_string())
                {
                    fail(CorpusErrorKind::malformed_record, "field 'tests' must be an array of strings");
                    break;
                }
                t.tests.push_back(test.get<std::string>());
            }
        }

        if (auto it = j.find("split"); it != j.end())
        {
            auto parsed = it->is_string() ? parse_split(it->get<std::string>()) : std::nullopt;
            if (!parsed)
                fail(CorpusErrorKind::malformed_record, "field 'split' must be \"dev\" or \"blind_test\"");
            else
                t.split = *parsed;
        }

        static std::set<std::string, std::less<>> const known { "id", "instruction", "entry_point", "tests", "split" };
        for (auto const& [key, _]: j.items())
            if (!known.contains(key))
                spdlog::warn("corpus line {}: ignoring unknown field '{}'", lineno, key);

        if (!out.problems.empty())
            return out;

        for (auto& p: task_problems(t))
            fail(CorpusErrorKind::invalid_task, std::move(p));
        if (out.problems.empty())
            out.task = std::move(t);
        return out;
    }

    /// Collects every diagnostic; when `stop_at_first` is set returns as soon as one is found.
    inline std::vector<Diagnostic> scan(std::istream& in, Corpus& corpus, bool stop_at_first)
    {
        std::vector<Diagnostic> diags;
        std::unordered_set<std::string> seen;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (text::is_blank(line))
                continue;
            auto rec = parse_record(line, lineno);
            for (auto& d: rec.problems)
                diags.push_back(std::move(d));
            if (rec.task)
            {
                if (!seen.insert(rec.task->id).second)
                    diags.push_back(Diagnostic { lineno,
                                                 CorpusErrorKind::duplicate_id,
                                                 fmt::format("duplicate task id '{}'", rec.task->id) });
                else
                    corpus.tasks.push_back(std::move(*rec.task));
            }
            if (stop_at_first && !diags.empty())
                return diags;
        }
        if (diags.empty() && corpus.tasks.empty())
            diags.push_back(Diagnostic { 0, CorpusErrorKind::empty_corpus, "corpus contains no tasks" });
        return diags;
    }
} // namespace detail

inline Corpus parse_corpus(std::istream& in, std::string source_path)
{
    Corpus corpus;
    corpus.source_path = std::move(source_path);
    if (auto diags = detail::scan(in, corpus, true); !diags.empty())
        throw CorpusError(std::move(diags.front()));
    return corpus;
}

/// Loads a JSONL corpus: one `{id, instruction, entry_point, tests, split?}` object per line.
inline Corpus load_corpus(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CorpusError(Diagnostic { 0, CorpusErrorKind::io, fmt::format("cannot open corpus file '{}'", path) });
    return parse_corpus(in, path);
}

/// Lints a corpus file without throwing; an empty result means the corpus is clean.
inline std::vector<Diagnostic> validate_corpus(std::string const& path, std::size_t* task_count = nullptr)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return { Diagnostic { 0, CorpusErrorKind::io, fmt::format("cannot open corpus file '{}'", path) } };
    Corpus corpus;
    auto diags = detail::scan(in, corpus, false);
    if (task_count)
        *task_count = corpus.tasks.size();
    return diags;
}

inline void write_corpus(std::ostream& out, Corpus const& corpus)
{
    for (auto const& t: corpus.tasks)
        out << to_json(t).dump() << '\n';
}

/// The three dataset-sample problems and the two error-recovery problems, with the Bangla
/// instructions in Unicode. Tests are stored in assertion form.
inline Corpus builtin_fixtures()
{
    Corpus c;
    c.source_path = "builtin:fixtures";
    c.tasks = {
        Task {
            .id = "is_palindrome",
            .instruction = "একটি ফাংশন লিখুন যা পরীক্ষা করবে প্রদত্ত স্ট্রিং প্যালিনড্রোম কিনা। খালি স্ট্রিংকে "
                           "প্যালিনড্রোম হিসেবে গণ্য হবে।",
            .entry_point = "is_palindrome(s)",
            .tests = {
                R"(assert is_palindrome("TENET") == True)",
                R"(assert is_palindrome("Bangla") == False)",
                R"(assert is_palindrome(" ") == True)",
            },
        },
        Task {
            .id = "reverse_words",
            .instruction = "একটি ফাংশন লিখুন যা একটি স্ট্রিং-এর মধ্যে থাকা শব্দগুলোকে উল্টো করে সাজাবে।",
            .entry_point = "reverse_words(string)",
            .tests = {
                R"(assert reverse_words("hello")=="hello")",
                R"(assert reverse_words(" a b ") == "b a")",
                R"(assert reverse_words("hello world") == "world hello")",
            },
        },
        Task {
            .id = "opposite_Signs",
            .instruction = "একটি পাইথন ফাংশন লিখুন যা দিয়ে দুইটি পূর্ণসংখ্যার বিপরীত চিহ্ন আছে কিনা তা পরীক্ষা করা যায়।",
            .entry_point = "opposite_Signs(n1, n2)",
            .tests = {
                "assert opposite_Signs(1,-2) == True",
                "assert opposite_Signs(3,2) == False",
                "assert opposite_Signs(-10,-10) == False",
            },
        },
        Task {
            .id = "remove_Occ",
            .instruction = "স্ট্রিং থেকে প্রদত্ত অক্ষরের প্রথম এবং শেষ উপসর্গ মুছে ফেলুন।",
            .entry_point = "remove_Occ(s, ch)",
            .tests = {
                R"(assert remove_Occ("hello","l") == "heo")",
                R"(assert remove_Occ("banana","a") == "bann")",
                R"(assert remove_Occ("abc","x") == "abc")",
            },
        },
        Task {
            .id = "sort_matrix",
            .instruction = "একটি প্রদত্ত ম্যাট্রিক্সকে তার সারিগুলির যোগফল অনুযায়ী সাজান।",
            .entry_point = "sort_matrix(M)",
            .tests = {
                "assert sort_matrix([[1,2,3],[2,4,5],[0,1,1]]) == [[0,1,1],[1,2,3],[2,4,5]]",
                "assert sort_matrix([[5,5],[2,2],[3,3]]) == [[2,2],[3,3],[5,5]]",
            },
        },
    };
    return c;
}

} // namespace codeact
