#pragma once

#include <map>
#include <string>
#include <vector>

#include "boxprompt/grid.hpp"

namespace boxprompt {

/// 2|P∩G| / (|P|+|G|). Two empty masks score 1.0.
double dice(const BinaryMask& pred, const BinaryMask& gt);

struct CaseScore {
    std::string case_id;
    std::string source_domain;
    std::string target_domain;
    double dice = 0.0;

    friend bool operator==(const CaseScore&, const CaseScore&) = default;
};

/// Scores for one source domain evaluated on the other domains.
struct DiceReport {
    std::string source_domain;
    /// Sorted by (target_domain, case_id).
    std::vector<CaseScore> scores;
    std::map<std::string, double> per_domain_mean;
    /// Unweighted mean of per_domain_mean over targets other than the source.
    double source_to_rest = 0.0;
    /// Cases left out because no prompt box could be produced.
    std::vector<std::string> skipped_cases;

    friend bool operator==(const DiceReport&, const DiceReport&) = default;
};

/// Per-domain means first, then the unweighted mean over domains. Throws EmptyInput
/// for no scores and InvalidArgument when source domains disagree or no target
/// differs from the source. The result does not depend on input order.
DiceReport aggregate(std::vector<CaseScore> scores);

struct SweepRow {
    double theta2 = 0.0;
    std::vector<double> values;  // one per column, source_to_rest
    double average = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepTable {
    std::vector<std::string> columns;  // source domains
    std::vector<SweepRow> rows;        // ascending theta2

    friend bool operator==(const SweepTable&, const SweepTable&) = default;
};

/// One row per theta2, one column per source domain. Every row must cover the same
/// source domains.
SweepTable sweep_report(const std::map<double, std::vector<DiceReport>>& reports);

/// Per-target-domain columns with a trailing AVG column, percentages to two decimals.
std::string render_report_table(const DiceReport& report);

/// One row per source-domain report: target columns are replaced by the source
/// columns, e.g. "A B C ... AVG" as in a leave-one-out summary.
std::string render_summary_table(const std::vector<DiceReport>& reports);

std::string render_sweep_table(const SweepTable& table);

/// Percent with two decimals, e.g. 0.79538 -> "79.54".
std::string format_percent(double fraction);

}  // namespace boxprompt
