#include "capreason/evaluation.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "capreason/util.hpp"

namespace capreason::eval {

namespace {

constexpr std::string_view kVerdictMarker = "VERDICT:";
constexpr std::string_view kUncategorized = "(uncategorized)";
constexpr std::string_view kUnspecifiedVariant = "(unspecified)";
constexpr std::string_view kOverallKey = "OVERALL";

}  // namespace

domain::JudgeVerdict parse_judge_verdict(std::string_view completion) {
  auto pos = completion.rfind(kVerdictMarker);
  if (pos != std::string_view::npos) {
    std::string_view rest = completion.substr(pos + kVerdictMarker.size());
    if (auto newline = rest.find('\n'); newline != std::string_view::npos)
      rest = rest.substr(0, newline);
    std::string token = lower_copy(trim_copy(rest));
    while (!token.empty() && !std::isalpha(static_cast<unsigned char>(token.back())))
      token.pop_back();
    if (token == "correct") return {domain::Verdict::Correct, std::nullopt};
    if (token == "incorrect") return {domain::Verdict::Incorrect, std::nullopt};
  }
  return {domain::Verdict::Incorrect, std::string("unparseable")};
}

domain::JudgeVerdict judge(const domain::Problem& p, const domain::Answer& answer,
                           const domain::ModelSpec& model, const prompts::TemplateSet& templates,
                           backend::Gateway& gateway) {
  if (trim_copy(answer.final).empty())
    return {domain::Verdict::Incorrect, std::string("empty answer")};

  const prompts::PromptTemplate& tmpl = templates.get(prompts::TemplateId::JudgePrompt);
  prompts::RenderedPrompt rendered = prompts::render(
      tmpl,
      {{"question", p.question}, {"ground_truth", p.ground_truth}, {"answer", answer.final}});

  backend::CompletionRequest req;
  req.model = model;
  req.messages = {backend::user_message(rendered.text)};
  req.meta.problem_id = p.id;
  req.meta.stage_label = std::string(prompts::to_string(prompts::TemplateId::JudgePrompt));
  backend::CompletionResult result = gateway.invoke(req);
  return parse_judge_verdict(result.text);
}

std::string_view to_string(Grouping grouping) {
  switch (grouping) {
    case Grouping::ByLevel: return "level";
    case Grouping::ByCategory: return "category";
    case Grouping::ByVisionVariant: return "vision";
  }
  return "?";
}

std::optional<Grouping> parse_grouping(std::string_view name) {
  if (name == "level") return Grouping::ByLevel;
  if (name == "category") return Grouping::ByCategory;
  if (name == "vision") return Grouping::ByVisionVariant;
  return std::nullopt;
}

int accuracy_pct_tenths(long long correct, long long total) {
  if (total <= 0) throw std::invalid_argument("total must be positive");
  if (correct < 0 || correct > total) throw std::invalid_argument("correct out of range");
  // round-half-up of 1000*correct/total: floor((2000c + t) / 2t)
  return static_cast<int>((2000 * correct + total) / (2 * total));
}

std::string format_pct_tenths(int tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

bool operator==(const GroupStat& a, const GroupStat& b) {
  return a.correct == b.correct && a.total == b.total && a.pct_tenths == b.pct_tenths;
}

AccuracyReport aggregate(const std::vector<pipeline::RunRecord>& records, Grouping grouping) {
  AccuracyReport report;
  report.grouping = grouping;
  if (records.empty()) return report;

  auto group_key = [grouping](const pipeline::RunRecord& record) -> std::string {
    switch (grouping) {
      case Grouping::ByLevel:
        return std::string(domain::to_string(record.level));
      case Grouping::ByCategory:
        return record.category.value_or(std::string(kUncategorized));
      case Grouping::ByVisionVariant:
        return record.vision_variant
                   ? std::string(domain::display_name(*record.vision_variant))
                   : std::string(kUnspecifiedVariant);
    }
    return "?";
  };

  std::map<std::string, GroupStat> stats;
  GroupStat overall;
  for (const pipeline::RunRecord& record : records) {
    if (!record.verdict) throw MissingVerdict(record.problem_id);
    GroupStat& stat = stats[group_key(record)];
    stat.total += 1;
    overall.total += 1;
    if (record.verdict->verdict == domain::Verdict::Correct) {
      stat.correct += 1;
      overall.correct += 1;
    }
  }
  for (auto& [key, stat] : stats) stat.pct_tenths = accuracy_pct_tenths(stat.correct, stat.total);
  overall.pct_tenths = accuracy_pct_tenths(overall.correct, overall.total);

  if (grouping == Grouping::ByLevel) {
    for (domain::KnowledgeLevel level : domain::kLevelOrder) {
      auto it = stats.find(std::string(domain::to_string(level)));
      if (it != stats.end()) report.groups.emplace_back(it->first, it->second);
    }
  } else {
    for (const auto& [key, stat] : stats) report.groups.emplace_back(key, stat);
  }
  report.overall = overall;
  return report;
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "table-text") return ReportFormat::TableText;
  if (name == "csv") return ReportFormat::Csv;
  return std::nullopt;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string render_table(const AccuracyReport& report) {
  if (report.groups.empty() && !report.overall) return "(no records)\n";

  std::vector<std::string> headers;
  std::vector<std::string> values;
  for (const auto& [key, stat] : report.groups) {
    headers.push_back(key);
    values.push_back(format_pct_tenths(stat.pct_tenths));
  }
  if (report.overall) {
    headers.emplace_back("Total");
    values.push_back(format_pct_tenths(report.overall->pct_tenths));
  }

  const std::size_t columns = headers.size();
  auto emit_row = [&](const std::vector<std::string>& cells, std::ostream& out) {
    for (std::size_t i = 0; i < columns; ++i) {
      if (i > 0) out << "  ";
      out << cells[i];
      const std::size_t width = std::max(headers[i].size(), values[i].size());
      if (i + 1 < columns) out << std::string(width - cells[i].size(), ' ');
    }
    out << '\n';
  };

  std::ostringstream out;
  emit_row(headers, out);
  emit_row(values, out);
  return out.str();
}

std::string render_csv(const AccuracyReport& report) {
  std::ostringstream out;
  out << "group,correct,total,accuracy_pct\n";
  for (const auto& [key, stat] : report.groups)
    out << csv_escape(key) << ',' << stat.correct << ',' << stat.total << ','
        << format_pct_tenths(stat.pct_tenths) << '\n';
  if (report.overall)
    out << kOverallKey << ',' << report.overall->correct << ',' << report.overall->total << ','
        << format_pct_tenths(report.overall->pct_tenths) << '\n';
  return out.str();
}

GroupStat parse_stat(const std::vector<std::string>& fields) {
  GroupStat stat;
  stat.correct = std::stoll(fields.at(1));
  stat.total = std::stoll(fields.at(2));
  const std::string& pct = fields.at(3);
  auto dot = pct.find('.');
  if (dot == std::string::npos) throw std::invalid_argument("accuracy_pct missing decimal");
  stat.pct_tenths = std::stoi(pct.substr(0, dot)) * 10 + std::stoi(pct.substr(dot + 1));
  return stat;
}

}  // namespace

std::string render_report(const AccuracyReport& report, ReportFormat format) {
  return format == ReportFormat::TableText ? render_table(report) : render_csv(report);
}

AccuracyReport parse_report_csv(std::string_view text, Grouping grouping) {
  AccuracyReport report;
  report.grouping = grouping;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim_copy(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = csv_split(line);
    if (fields.size() != 4) throw std::invalid_argument("csv row must have 4 fields");
    if (fields[0] == kOverallKey)
      report.overall = parse_stat(fields);
    else
      report.groups.emplace_back(fields[0], parse_stat(fields));
  }
  return report;
}

}  // namespace capreason::eval
