#include "boxprompt/evalkit.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

namespace boxprompt {

double dice(const BinaryMask& pred, const BinaryMask& gt) {
    if (!pred.same_shape(gt)) {
        throw Error(ErrorKind::DimensionMismatch,
                    fmt::format("dice of {}x{} against {}x{}", pred.width(), pred.height(), gt.width(),
                                gt.height()));
    }
    const auto p = pred.values();
    const auto g = gt.values();
    std::size_t inter = 0, sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool a = p[i] != 0;
        const bool b = g[i] != 0;
        inter += (a && b);
        sum += a + b;
    }
    if (sum == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

DiceReport aggregate(std::vector<CaseScore> scores) {
    if (scores.empty()) {
        throw Error(ErrorKind::EmptyInput, "no case scores to aggregate");
    }
    const std::string source = scores.front().source_domain;
    for (const auto& s : scores) {
        if (s.source_domain != source) {
            throw Error(ErrorKind::InvalidArgument,
                        "scores mix source domains '" + source + "' and '" + s.source_domain + "'");
        }
        if (!(s.dice >= 0.0 && s.dice <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "dice of case '" + s.case_id + "' outside [0,1]");
        }
    }
    std::sort(scores.begin(), scores.end(), [](const CaseScore& a, const CaseScore& b) {
        return std::tie(a.target_domain, a.case_id, a.dice) < std::tie(b.target_domain, b.case_id, b.dice);
    });

    DiceReport report;
    report.source_domain = source;
    for (auto it = scores.begin(); it != scores.end();) {
        auto end = std::find_if(it, scores.end(),
                                [&](const CaseScore& s) { return s.target_domain != it->target_domain; });
        const double total = std::accumulate(it, end, 0.0, [](double acc, const CaseScore& s) { return acc + s.dice; });
        report.per_domain_mean[it->target_domain] = total / static_cast<double>(end - it);
        it = end;
    }

    double total = 0.0;
    int domains = 0;
    for (const auto& [domain, mean] : report.per_domain_mean) {
        if (domain == source) continue;
        total += mean;
        ++domains;
    }
    if (domains == 0) {
        throw Error(ErrorKind::InvalidArgument, "no target domain differs from source '" + source + "'");
    }
    report.source_to_rest = total / domains;
    report.scores = std::move(scores);
    return report;
}

SweepTable sweep_report(const std::map<double, std::vector<DiceReport>>& reports) {
    if (reports.empty()) {
        throw Error(ErrorKind::EmptyInput, "sweep needs at least one theta2 entry");
    }
    SweepTable table;
    {
        std::set<std::string> sources;
        for (const auto& r : reports.begin()->second) sources.insert(r.source_domain);
        table.columns.assign(sources.begin(), sources.end());
    }
    if (table.columns.empty()) {
        throw Error(ErrorKind::EmptyInput, "sweep entry has no reports");
    }
    for (const auto& [theta, row_reports] : reports) {
        std::map<std::string, double> by_source;
        for (const auto& r : row_reports) {
            if (!by_source.emplace(r.source_domain, r.source_to_rest).second) {
                throw Error(ErrorKind::InvalidArgument,
                            fmt::format("theta2={} has two reports for source '{}'", theta, r.source_domain));
            }
        }
        if (by_source.size() != table.columns.size() ||
            !std::equal(table.columns.begin(), table.columns.end(), by_source.begin(),
                        [](const std::string& c, const auto& kv) { return c == kv.first; })) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("theta2={} covers different source domains than the first row", theta));
        }
        SweepRow row;
        row.theta2 = theta;
        for (const auto& [_, value] : by_source) row.values.push_back(value);
        row.average = std::accumulate(row.values.begin(), row.values.end(), 0.0) /
                      static_cast<double>(row.values.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_percent(double fraction) { return fmt::format("{:.2f}", fraction * 100.0); }

namespace {

std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = header[c].size();
        for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == 0) {
                out += fmt::format("{:<{}}", cells[c], widths[c]);
            } else {
                out += fmt::format("  {:>{}}", cells[c], widths[c]);
            }
        }
        out += '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : widths) total += w;
    out += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
    for (const auto& row : rows) emit(row);
    return out;
}

}  // namespace

std::string render_report_table(const DiceReport& report) {
    std::vector<std::string> header{"Source"};
    std::vector<std::string> cells{report.source_domain};
    for (const auto& [domain, mean] : report.per_domain_mean) {
        if (domain == report.source_domain) continue;
        header.push_back(domain);
        cells.push_back(format_percent(mean));
    }
    header.emplace_back("AVG");
    cells.push_back(format_percent(report.source_to_rest));
    return render(header, {cells});
}

std::string render_summary_table(const std::vector<DiceReport>& reports) {
    if (reports.empty()) {
        throw Error(ErrorKind::EmptyInput, "no reports to summarise");
    }
    std::vector<const DiceReport*> sorted;
    for (const auto& r : reports) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const DiceReport* a, const DiceReport* b) { return a->source_domain < b->source_domain; });

    std::vector<std::string> header{"Source"};
    std::vector<std::string> cells{"Dice"};
    double total = 0.0;
    for (const auto* r : sorted) {
        header.push_back(r->source_domain);
        cells.push_back(format_percent(r->source_to_rest));
        total += r->source_to_rest;
    }
    header.emplace_back("AVG");
    cells.push_back(format_percent(total / static_cast<double>(sorted.size())));
    return render(header, {cells});
}

std::string render_sweep_table(const SweepTable& table) {
    std::vector<std::string> header{"theta2"};
    for (const auto& c : table.columns) header.push_back(c + " to Rest");
    header.emplace_back("Average");
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : table.rows) {
        std::vector<std::string> cells{fmt::format("{}", row.theta2)};
        for (double v : row.values) cells.push_back(format_percent(v));
        cells.push_back(format_percent(row.average));
        rows.push_back(std::move(cells));
    }
    return render(header, rows);
}

}  // namespace boxprompt
