// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace codeact
{

/// Samples drawn (n) and samples passing (c) for one task.
struct SampleTally
{
    std::string task_id;
    int n = 0;
    int c = 0;
};

class PassAtKError: public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

class KExceedsN: public PassAtKError
{
  public:
    KExceedsN(std::string const& task_id, int k, int n):
        PassAtKError(fmt::format("task '{}': k = {} exceeds the {} samples drawn", task_id, k, n)), _task_id(task_id)
    {
    }

    [[nodiscard]] std::string const& task_id() const noexcept { return _task_id; }

  private:
    std::string _task_id;
};

class EmptyTallies: public PassAtKError
{
  public:
    EmptyTallies(): PassAtKError("pass@k needs at least one task") {}
};

/// Unbiased pass@k for one task: 1 - C(n-c, k) / C(n, k), evaluated as
/// 1 - prod_{i=n-c+1}^{n} (1 - k/i) so no binomial coefficient is ever formed.
/// Each factor (i-k)/i is folded into a reduced integer ratio; the ratio is only converted to
/// floating point when the next factor would overflow, so small cases round exactly once.
inline double pass_at_k(SampleTally const& t, int k)
{
    if (k < 1)
        throw PassAtKError("k must be >= 1");
    if (t.n < 1 || t.c < 0 || t.c > t.n)
        throw PassAtKError(fmt::format("task '{}': invalid tally n = {}, c = {}", t.task_id, t.n, t.c));
    if (k > t.n)
        throw KExceedsN(t.task_id, k, t.n);
    if (t.n - t.c < k)
        return 1.0;

    double fail = 1.0;
    std::uint64_t num = 1;
    std::uint64_t den = 1;
    for (int i = t.n - t.c + 1; i <= t.n; ++i)
    {
        auto const a = static_cast<std::uint64_t>(i - k);
        auto const b = static_cast<std::uint64_t>(i);
        std::uint64_t next_num = 0;
        std::uint64_t next_den = 0;
        if (__builtin_mul_overflow(num, a, &next_num) || __builtin_mul_overflow(den, b, &next_den))
        {
            fail *= static_cast<double>(num) / static_cast<double>(den);
            next_num = a;
            next_den = b;
        }
        auto const g = std::gcd(next_num, next_den);
        num = next_num / g;
        den = next_den / g;
    }
    return 1.0 - fail * (static_cast<double>(num) / static_cast<double>(den));
}

/// Mean of per-task pass@k.
inline double pass_at_k(std::span<SampleTally const> tallies, int k)
{
    if (tallies.empty())
        throw EmptyTallies();
    double sum = 0.0;
    for (auto const& t: tallies)
        sum += pass_at_k(t, k);
    return sum / static_cast<double>(tallies.size());
}

// {{{ report

/// One scored (model, strategy) group.
struct ResultRecord
{
    std::string model;
    std::string strategy;
    SampleTally tally;
};

struct MetricRow
{
    std::string model;
    std::string strategy;
    int k = 1;
    double score = 0.0;
    std::size_t task_count = 0;
};

struct ReportRow
{
    std::string model;
    std::string strategy;
    std::size_t task_count = 0;
    std::vector<double> scores; // parallel to RunReport::ks
};

struct RunReport
{
    std::vector<int> ks;
    std::vector<ReportRow> rows;

    [[nodiscard]] std::vector<MetricRow> metric_rows() const
    {
        std::vector<MetricRow> out;
        for (auto const& r: rows)
            for (std::size_t i = 0; i < ks.size(); ++i)
                out.push_back(MetricRow { r.model, r.strategy, ks[i], r.scores[i], r.task_count });
        return out;
    }
};

/// Groups records by (model, strategy) and scores each group at every k. Models keep their
/// first-appearance order; within a model rows are sorted by the first k's score, descending.
inline RunReport build_report(std::span<ResultRecord const> records, std::vector<int> ks)
{
    if (ks.empty())
        throw PassAtKError("at least one k is required");
    std::vector<std::string> model_order;
    std::vector<std::pair<std::string, std::string>> group_order;
    std::map<std::pair<std::string, std::string>, std::vector<SampleTally>> groups;
    for (auto const& rec: records)
    {
        auto key = std::pair { rec.model, rec.strategy };
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted)
        {
            group_order.push_back(key);
            if (std::find(model_order.begin(), model_order.end(), rec.model) == model_order.end())
                model_order.push_back(rec.model);
        }
        it->second.push_back(rec.tally);
    }

    RunReport report;
    report.ks = std::move(ks);
    for (auto const& model: model_order)
    {
        std::vector<ReportRow> rows;
        for (auto const& key: group_order)
        {
            if (key.first != model)
                continue;
            auto const& tallies = groups.at(key);
            ReportRow row { key.first, key.second, tallies.size(), {} };
            for (int k: report.ks)
                row.scores.push_back(pass_at_k(tallies, k));
            rows.push_back(std::move(row));
        }
        std::stable_sort(rows.begin(), rows.end(), [](auto const& a, auto const& b) { return a.scores[0] > b.scores[0]; });
        for (auto& r: rows)
            report.rows.push_back(std::move(r));
    }
    return report;
}

/// Percentages with one decimal, one column per k.
inline std::string render_markdown(RunReport const& report)
{
    std::string out = "| Model | Method |";
    std::string rule = "|---|---|";
    for (int k: report.ks)
    {
        out += fmt::format(" pass@{} |", k);
        rule += "---:|";
    }
    out += "\n" + rule + "\n";
    for (auto const& r: report.rows)
    {
        out += fmt::format("| {} | {} |", r.model, r.strategy);
        for (double s: r.scores)
            out += fmt::format(" {:.1f} |", 100.0 * s);
        out += "\n";
    }
    return out;
}

/// Long format, one line per (model, strategy, k); scores as fractions in [0, 1].
inline std::string render_csv(RunReport const& report)
{
    auto quote = [](std::string const& s) {
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char ch: s)
        {
            if (ch == '"')
                q += '"';
            q += ch;
        }
        return q + "\"";
    };
    std::string out = "model,strategy,k,score,task_count\n";
    for (auto const& m: report.metric_rows())
        out += fmt::format("{},{},{},{},{}\n", quote(m.model), quote(m.strategy), m.k, m.score, m.task_count);
    return out;
}

inline nlohmann::json render_json(RunReport const& report)
{
    auto rows = nlohmann::json::array();
    for (auto const& m: report.metric_rows())
        rows.push_back({ { "model", m.model },
                         { "strategy", m.strategy },
                         { "k", m.k },
                         { "score", m.score },
                         { "task_count", m.task_count } });
    return nlohmann::json { { "rows", std::move(rows) } };
}

// }}}

} // namespace codeact
