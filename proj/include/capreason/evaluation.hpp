#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capreason/gateway.hpp"
#include "capreason/pipeline.hpp"
#include "capreason/prompts.hpp"

namespace capreason::eval {

// Reads the last "VERDICT:" line of a judge completion. Total: anything
// unparseable is Incorrect with rationale "unparseable"; there is no third
// state.
domain::JudgeVerdict parse_judge_verdict(std::string_view completion);

// Renders the judge prompt, dispatches it, and parses the binary verdict.
domain::JudgeVerdict judge(const domain::Problem& p, const domain::Answer& answer,
                           const domain::ModelSpec& model, const prompts::TemplateSet& templates,
                           backend::Gateway& gateway);

enum class Grouping { ByLevel, ByCategory, ByVisionVariant };

std::string_view to_string(Grouping grouping);
std::optional<Grouping> parse_grouping(std::string_view name);

// Exact round-half-up of 100*correct/total to one decimal, in tenths of a
// percent. total must be positive.
int accuracy_pct_tenths(long long correct, long long total);
std::string format_pct_tenths(int tenths);

struct GroupStat {
  long long correct = 0;
  long long total = 0;
  int pct_tenths = 0;
};

bool operator==(const GroupStat& a, const GroupStat& b);

struct AccuracyReport {
  Grouping grouping = Grouping::ByLevel;
  std::vector<std::pair<std::string, GroupStat>> groups;  // fixed group order
  std::optional<GroupStat> overall;                       // absent when no records
};

class MissingVerdict : public std::runtime_error {
 public:
  explicit MissingVerdict(const std::string& problem_id)
      : std::runtime_error("record for problem " + problem_id + " carries no verdict"),
        problem_id(problem_id) {}
  std::string problem_id;
};

AccuracyReport aggregate(const std::vector<pipeline::RunRecord>& records, Grouping grouping);

enum class ReportFormat { TableText, Csv };

std::optional<ReportFormat> parse_report_format(std::string_view name);

std::string render_report(const AccuracyReport& report, ReportFormat format);

// Inverse of the CSV rendering; used for round-trip verification.
AccuracyReport parse_report_csv(std::string_view text, Grouping grouping);

}  // namespace capreason::eval
