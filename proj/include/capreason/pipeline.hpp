#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "capreason/domain.hpp"
#include "capreason/gateway.hpp"
#include "capreason/prompts.hpp"

namespace capreason::pipeline {

enum class Route { CaptionBased, ImageDirect };

std::string_view to_string(Route route);

struct RouteTable {
  std::set<std::string> image_direct_categories;  // lowercase
  // default route for everything else (including absent category) is
  // CaptionBased; lookup is total by construction
};

// The seven categories whose problems go to direct image input.
RouteTable default_route_table();

Route route(const domain::Problem& p, const RouteTable& table);

struct PipelineConfig {
  std::optional<domain::CaptionMode> caption_mode;  // absent = no-caption direct multimodal
  std::optional<domain::ModelSpec> caption_model;
  domain::ModelSpec answer_model;
  bool reintegrate_image = false;                 // Img
  std::optional<RouteTable> adaptive_routing;     // AAR
  bool format_optimization = false;               // FO
  std::optional<domain::ModelSpec> critical_review;  // CR model
  bool image_to_answer_allowed = true;  // false = caption-only / "w/o image"
};

std::vector<std::string> validate_config(const PipelineConfig& cfg);

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const nlohmann::json& value);
std::string config_digest(const PipelineConfig& cfg);

struct StageEntry {
  domain::StageTag tag = domain::StageTag::AnswerStage;
  std::string request_digest;  // empty for RouteDecision
  std::string output;
  std::optional<domain::ModelSpec> model;
  std::chrono::milliseconds latency{0};
};

struct StageFailureInfo {
  domain::StageTag tag = domain::StageTag::AnswerStage;
  std::string message;
};

struct RunRecord {
  std::string problem_id;
  std::string config_digest;
  // problem metadata snapshot so reports need no dataset reload
  domain::KnowledgeLevel level = domain::KnowledgeLevel::Mid;
  std::optional<std::string> category;
  std::optional<domain::VisionVariant> vision_variant;
  std::vector<StageEntry> stages;
  domain::Answer final_answer;
  std::optional<domain::JudgeVerdict> verdict;
  std::vector<std::string> warnings;
  std::optional<StageFailureInfo> failure;

  bool completed() const { return !failure.has_value(); }
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& value);

// Canonical digest over the deterministic content of a record; timing
// fields are excluded so replayed runs digest identically.
std::string run_record_digest(const RunRecord& record);

class MissingImage : public std::runtime_error {
 public:
  explicit MissingImage(const std::string& problem_id)
      : std::runtime_error("problem " + problem_id + " has no image but the stage requires one") {}
};

class ContextEmpty : public std::runtime_error {
 public:
  explicit ContextEmpty(const std::string& problem_id)
      : std::runtime_error("problem " + problem_id +
                           ": answer stage has neither caption nor image context") {}
};

struct EngineOptions {
  std::string answer_marker = std::string(domain::kDefaultAnswerMarker);
};

struct BatchFailure {
  std::string problem_id;
  std::string stage;
  std::string message;
};

class RunStore;  // run persistence, see run_store.hpp

struct BatchResult {
  std::vector<RunRecord> records;  // dataset order, one per problem
  std::vector<BatchFailure> failures;
  int reused = 0;  // records skipped because they were already complete

  bool all_completed() const { return failures.empty(); }
};

// Executes pipeline stages against a template set and gateway. Per-problem
// stage execution is sequential; run_batch fans problems out across
// threads.
class Engine {
 public:
  Engine(const prompts::TemplateSet& templates, backend::Gateway& gateway,
         EngineOptions options = {});

  domain::Caption caption_stage(const domain::Problem& p, domain::CaptionMode mode,
                                const domain::ModelSpec& model,
                                std::vector<StageEntry>* trace = nullptr);

  domain::Answer answer_stage(const domain::Problem& p,
                              const std::optional<domain::Caption>& caption, bool include_image,
                              const domain::ModelSpec& model,
                              std::vector<StageEntry>* trace = nullptr);

  domain::Answer format_optimize(const domain::Problem& p, const domain::Answer& answer,
                                 const domain::ModelSpec& model,
                                 std::vector<StageEntry>* trace = nullptr,
                                 std::vector<std::string>* warnings = nullptr);

  domain::Answer critical_review(const domain::Problem& p,
                                 const std::optional<domain::Caption>& caption,
                                 const domain::Answer& answer, const domain::ModelSpec& model,
                                 bool include_image, std::vector<StageEntry>* trace = nullptr,
                                 std::vector<std::string>* warnings = nullptr);

  // Executes the configured stages in declared order; failures are
  // captured on the record rather than thrown so batches can aggregate.
  RunRecord run_pipeline(const domain::Problem& p, const PipelineConfig& cfg);

  // One record per problem, in dataset order. Existing complete records
  // with a matching config digest are reused, which makes half-finished
  // batches resumable.
  BatchResult run_batch(const std::vector<domain::Problem>& problems, const PipelineConfig& cfg,
                        int parallelism, RunStore* store = nullptr);

  const EngineOptions& options() const { return options_; }

 private:
  const prompts::TemplateSet& templates_;
  backend::Gateway& gateway_;
  EngineOptions options_;
};

}  // namespace capreason::pipeline
