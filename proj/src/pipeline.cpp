#include "capreason/pipeline.hpp"

#include <atomic>
#include <thread>

#include "capreason/run_store.hpp"
#include "capreason/util.hpp"

namespace capreason::pipeline {

std::string_view to_string(Route r) {
  return r == Route::CaptionBased ? "CaptionBased" : "ImageDirect";
}

RouteTable default_route_table() {
  return RouteTable{{"quantum mechanics", "projectile motion", "electromagnetic fields",
                     "charge distribution", "circuit diagrams", "spring force",
                     "atomic physics"}};
}

Route route(const domain::Problem& p, const RouteTable& table) {
  if (p.category && table.image_direct_categories.count(*p.category) > 0)
    return Route::ImageDirect;
  return Route::CaptionBased;
}

std::vector<std::string> validate_config(const PipelineConfig& cfg) {
  std::vector<std::string> violations;
  if (cfg.caption_mode.has_value() != cfg.caption_model.has_value())
    violations.push_back("caption_mode and caption_model must be set together");
  if (cfg.reintegrate_image && !cfg.caption_mode)
    violations.push_back("reintegrate_image requires a caption mode");
  if (cfg.reintegrate_image && !cfg.image_to_answer_allowed)
    violations.push_back("reintegrate_image requires image_to_answer_allowed");
  if (cfg.adaptive_routing && !cfg.caption_mode)
    violations.push_back("adaptive_routing requires a caption mode to route against");
  if (cfg.adaptive_routing && !cfg.image_to_answer_allowed)
    violations.push_back("adaptive_routing requires image_to_answer_allowed");
  if (cfg.answer_model.provider.empty() || cfg.answer_model.model_id.empty())
    violations.push_back("answer_model incomplete");
  return violations;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  nlohmann::json value;
  value["caption_mode"] =
      cfg.caption_mode ? nlohmann::json(std::string(domain::to_string(*cfg.caption_mode)))
                       : nlohmann::json(nullptr);
  value["caption_model"] =
      cfg.caption_model ? domain::to_json(*cfg.caption_model) : nlohmann::json(nullptr);
  value["answer_model"] = domain::to_json(cfg.answer_model);
  value["reintegrate_image"] = cfg.reintegrate_image;
  if (cfg.adaptive_routing) {
    value["adaptive_routing"] = {
        {"image_direct_categories",
         std::vector<std::string>(cfg.adaptive_routing->image_direct_categories.begin(),
                                  cfg.adaptive_routing->image_direct_categories.end())}};
  } else {
    value["adaptive_routing"] = nullptr;
  }
  value["format_optimization"] = cfg.format_optimization;
  value["critical_review"] =
      cfg.critical_review ? domain::to_json(*cfg.critical_review) : nlohmann::json(nullptr);
  value["image_to_answer_allowed"] = cfg.image_to_answer_allowed;
  return value;
}

PipelineConfig config_from_json(const nlohmann::json& value) {
  PipelineConfig cfg;
  if (value.contains("caption_mode") && !value.at("caption_mode").is_null()) {
    const std::string name = value.at("caption_mode").get<std::string>();
    auto mode = domain::parse_caption_mode(name);
    if (!mode) throw std::invalid_argument("unknown caption_mode \"" + name + "\"");
    cfg.caption_mode = *mode;
  }
  if (value.contains("caption_model") && !value.at("caption_model").is_null())
    cfg.caption_model = domain::model_spec_from_json(value.at("caption_model"));
  cfg.answer_model = domain::model_spec_from_json(value.at("answer_model"));
  cfg.reintegrate_image = value.value("reintegrate_image", false);
  if (value.contains("adaptive_routing") && !value.at("adaptive_routing").is_null()) {
    RouteTable table;
    if (value.at("adaptive_routing").is_object() &&
        value.at("adaptive_routing").contains("image_direct_categories")) {
      for (const auto& item : value.at("adaptive_routing").at("image_direct_categories"))
        table.image_direct_categories.insert(item.get<std::string>());
    } else if (value.at("adaptive_routing").is_boolean() &&
               value.at("adaptive_routing").get<bool>()) {
      table = default_route_table();
    }
    cfg.adaptive_routing = std::move(table);
  }
  cfg.format_optimization = value.value("format_optimization", false);
  if (value.contains("critical_review") && !value.at("critical_review").is_null())
    cfg.critical_review = domain::model_spec_from_json(value.at("critical_review"));
  cfg.image_to_answer_allowed = value.value("image_to_answer_allowed", true);
  return cfg;
}

std::string config_digest(const PipelineConfig& cfg) {
  return canonical_json_digest(to_json(cfg));
}

namespace {

nlohmann::json stage_to_json(const StageEntry& entry) {
  nlohmann::json value = {{"tag", std::string(domain::to_string(entry.tag))},
                          {"request_digest", entry.request_digest},
                          {"output", entry.output},
                          {"latency_ms", entry.latency.count()}};
  value["model"] = entry.model ? domain::to_json(*entry.model) : nlohmann::json(nullptr);
  return value;
}

StageEntry stage_from_json(const nlohmann::json& value) {
  StageEntry entry;
  entry.tag = domain::parse_stage_tag(value.at("tag").get<std::string>()).value();
  entry.request_digest = value.at("request_digest").get<std::string>();
  entry.output = value.at("output").get<std::string>();
  entry.latency = std::chrono::milliseconds(value.value("latency_ms", 0));
  if (value.contains("model") && !value.at("model").is_null())
    entry.model = domain::model_spec_from_json(value.at("model"));
  return entry;
}

}  // namespace

nlohmann::json to_json(const RunRecord& record) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageEntry& entry : record.stages) stages.push_back(stage_to_json(entry));

  std::vector<std::string> history;
  history.reserve(record.final_answer.stage_history.size());
  for (domain::StageTag tag : record.final_answer.stage_history)
    history.emplace_back(domain::to_string(tag));

  nlohmann::json value = {
      {"problem_id", record.problem_id},
      {"config_digest", record.config_digest},
      {"status", record.completed() ? "completed" : "failed"},
      {"problem_meta",
       {{"level", std::string(domain::to_string(record.level))},
        {"category", record.category ? nlohmann::json(*record.category) : nlohmann::json(nullptr)},
        {"vision_variant", record.vision_variant
                               ? nlohmann::json(std::string(domain::to_string(*record.vision_variant)))
                               : nlohmann::json(nullptr)}}},
      {"stages", stages},
      {"final_answer",
       {{"raw", record.final_answer.raw},
        {"final", record.final_answer.final},
        {"stage_history", history}}},
      {"warnings", record.warnings}};
  value["verdict"] =
      record.verdict
          ? nlohmann::json{{"verdict", std::string(domain::to_string(record.verdict->verdict))},
                           {"rationale", record.verdict->rationale
                                             ? nlohmann::json(*record.verdict->rationale)
                                             : nlohmann::json(nullptr)}}
          : nlohmann::json(nullptr);
  value["failure"] =
      record.failure
          ? nlohmann::json{{"stage", std::string(domain::to_string(record.failure->tag))},
                           {"message", record.failure->message}}
          : nlohmann::json(nullptr);
  return value;
}

RunRecord run_record_from_json(const nlohmann::json& value) {
  RunRecord record;
  record.problem_id = value.at("problem_id").get<std::string>();
  record.config_digest = value.at("config_digest").get<std::string>();
  const auto& meta = value.at("problem_meta");
  record.level = domain::parse_level(meta.at("level").get<std::string>()).value();
  if (!meta.at("category").is_null()) record.category = meta.at("category").get<std::string>();
  if (!meta.at("vision_variant").is_null())
    record.vision_variant =
        domain::parse_vision_variant(meta.at("vision_variant").get<std::string>());
  for (const auto& stage : value.at("stages")) record.stages.push_back(stage_from_json(stage));
  const auto& answer = value.at("final_answer");
  record.final_answer.raw = answer.at("raw").get<std::string>();
  record.final_answer.final = answer.at("final").get<std::string>();
  for (const auto& tag : answer.at("stage_history"))
    record.final_answer.stage_history.push_back(
        domain::parse_stage_tag(tag.get<std::string>()).value());
  if (value.contains("verdict") && !value.at("verdict").is_null()) {
    domain::JudgeVerdict verdict;
    verdict.verdict = value.at("verdict").at("verdict").get<std::string>() == "Correct"
                          ? domain::Verdict::Correct
                          : domain::Verdict::Incorrect;
    if (!value.at("verdict").at("rationale").is_null())
      verdict.rationale = value.at("verdict").at("rationale").get<std::string>();
    record.verdict = verdict;
  }
  if (value.contains("warnings"))
    for (const auto& warning : value.at("warnings"))
      record.warnings.push_back(warning.get<std::string>());
  if (value.contains("failure") && !value.at("failure").is_null()) {
    StageFailureInfo failure;
    failure.tag = domain::parse_stage_tag(value.at("failure").at("stage").get<std::string>()).value();
    failure.message = value.at("failure").at("message").get<std::string>();
    record.failure = failure;
  }
  return record;
}

std::string run_record_digest(const RunRecord& record) {
  nlohmann::json value = to_json(record);
  for (auto& stage : value.at("stages")) stage.erase("latency_ms");
  return canonical_json_digest(value);
}

Engine::Engine(const prompts::TemplateSet& templates, backend::Gateway& gateway,
               EngineOptions options)
    : templates_(templates), gateway_(gateway), options_(std::move(options)) {}

domain::Caption Engine::caption_stage(const domain::Problem& p, domain::CaptionMode mode,
                                      const domain::ModelSpec& model,
                                      std::vector<StageEntry>* trace) {
  if (mode != domain::CaptionMode::Rephrase && !p.image) throw MissingImage(p.id);

  const prompts::TemplateId tid = prompts::template_for_mode(mode);
  const prompts::PromptTemplate& tmpl = templates_.get(tid);
  prompts::RenderedPrompt rendered = prompts::render(tmpl, {{"question", p.question}});

  backend::ChatMessage msg = backend::user_message(rendered.text);
  if (p.image) msg.parts.push_back(backend::image_part_from_ref(*p.image));

  backend::CompletionRequest req;
  req.model = model;
  req.messages = {msg};
  req.meta.problem_id = p.id;
  req.meta.stage_label = std::string(prompts::to_string(tid));
  backend::CompletionResult result = gateway_.invoke(req);

  if (trace != nullptr)
    trace->push_back(StageEntry{domain::StageTag::CaptionStage, backend::cache_key(req),
                                result.text, model, result.latency});

  domain::Caption caption;
  caption.mode = mode;
  caption.text = result.text;
  caption.producer = model;
  caption.source_problem = p.id;
  return caption;
}

domain::Answer Engine::answer_stage(const domain::Problem& p,
                                    const std::optional<domain::Caption>& caption,
                                    bool include_image, const domain::ModelSpec& model,
                                    std::vector<StageEntry>* trace) {
  const bool image_available = include_image && p.image.has_value();
  if (!caption && !image_available) throw ContextEmpty(p.id);

  // A rephrased problem statement replaces the question; other caption
  // modes fill the description slot.
  std::string question = p.question;
  std::string caption_text;
  if (caption) {
    if (caption->mode == domain::CaptionMode::Rephrase)
      question = caption->text;
    else
      caption_text = caption->text;
  }

  const prompts::PromptTemplate& tmpl = templates_.get(prompts::TemplateId::AnswerPrompt);
  prompts::RenderedPrompt rendered =
      prompts::render(tmpl, {{"question", question}, {"caption", caption_text}});

  backend::ChatMessage msg = backend::user_message(rendered.text);
  if (image_available) msg.parts.push_back(backend::image_part_from_ref(*p.image));

  backend::CompletionRequest req;
  req.model = model;
  req.messages = {msg};
  req.meta.problem_id = p.id;
  req.meta.stage_label = std::string(prompts::to_string(prompts::TemplateId::AnswerPrompt));
  backend::CompletionResult result = gateway_.invoke(req);

  if (trace != nullptr)
    trace->push_back(StageEntry{domain::StageTag::AnswerStage, backend::cache_key(req),
                                result.text, model, result.latency});

  domain::Answer answer;
  answer.raw = result.text;
  answer.final = domain::extract_final(result.text, options_.answer_marker);
  answer.stage_history = {domain::StageTag::AnswerStage};
  return answer;
}

domain::Answer Engine::format_optimize(const domain::Problem& p, const domain::Answer& answer,
                                       const domain::ModelSpec& model,
                                       std::vector<StageEntry>* trace,
                                       std::vector<std::string>* warnings) {
  const prompts::PromptTemplate& tmpl =
      templates_.get(prompts::TemplateId::FormatOptimizationPrompt);
  prompts::RenderedPrompt rendered =
      prompts::render(tmpl, {{"question", p.question}, {"answer", answer.raw}});

  backend::CompletionRequest req;
  req.model = model;
  req.messages = {backend::user_message(rendered.text)};
  req.meta.problem_id = p.id;
  req.meta.stage_label = std::string(prompts::to_string(prompts::TemplateId::FormatOptimizationPrompt));
  backend::CompletionResult result = gateway_.invoke(req);

  if (trace != nullptr)
    trace->push_back(StageEntry{domain::StageTag::FormatStage, backend::cache_key(req),
                                result.text, model, result.latency});

  if (!domain::contains_marker(result.text, options_.answer_marker)) {
    if (warnings != nullptr)
      warnings->push_back("format optimization output for " + p.id +
                          " lacks the answer marker; original answer retained");
    return answer;
  }

  domain::Answer formatted;
  formatted.raw = result.text;
  formatted.final = domain::extract_final(result.text, options_.answer_marker);
  formatted.stage_history = answer.stage_history;
  formatted.stage_history.push_back(domain::StageTag::FormatStage);
  return formatted;
}

domain::Answer Engine::critical_review(const domain::Problem& p,
                                       const std::optional<domain::Caption>& caption,
                                       const domain::Answer& answer,
                                       const domain::ModelSpec& model, bool include_image,
                                       std::vector<StageEntry>* trace,
                                       std::vector<std::string>* warnings) {
  std::string question = p.question;
  std::string caption_text;
  if (caption) {
    if (caption->mode == domain::CaptionMode::Rephrase)
      question = caption->text;
    else
      caption_text = caption->text;
  }

  const prompts::PromptTemplate& tmpl = templates_.get(prompts::TemplateId::CriticalReviewPrompt);
  prompts::RenderedPrompt rendered = prompts::render(
      tmpl, {{"question", question}, {"caption", caption_text}, {"answer", answer.raw}});

  backend::ChatMessage msg = backend::user_message(rendered.text);
  if (include_image && p.image) msg.parts.push_back(backend::image_part_from_ref(*p.image));

  backend::CompletionRequest req;
  req.model = model;
  req.messages = {msg};
  req.meta.problem_id = p.id;
  req.meta.stage_label = std::string(prompts::to_string(prompts::TemplateId::CriticalReviewPrompt));
  backend::CompletionResult result = gateway_.invoke(req);

  if (trace != nullptr)
    trace->push_back(StageEntry{domain::StageTag::ReviewStage, backend::cache_key(req),
                                result.text, model, result.latency});

  if (!domain::contains_marker(result.text, options_.answer_marker)) {
    if (warnings != nullptr)
      warnings->push_back("critical review output for " + p.id +
                          " lacks the answer marker; prior answer retained");
    return answer;
  }

  domain::Answer reviewed;
  reviewed.raw = result.text;
  reviewed.final = domain::extract_final(result.text, options_.answer_marker);
  reviewed.stage_history = answer.stage_history;
  reviewed.stage_history.push_back(domain::StageTag::ReviewStage);
  return reviewed;
}

RunRecord Engine::run_pipeline(const domain::Problem& p, const PipelineConfig& cfg) {
  RunRecord record;
  record.problem_id = p.id;
  record.config_digest = config_digest(cfg);
  record.level = p.level;
  record.category = p.category;
  record.vision_variant = p.vision_variant;

  domain::StageTag current = domain::StageTag::RouteDecision;
  try {
    bool direct_route = false;
    if (cfg.adaptive_routing) {
      const Route decision = route(p, *cfg.adaptive_routing);
      direct_route = decision == Route::ImageDirect;
      record.stages.push_back(StageEntry{domain::StageTag::RouteDecision, "",
                                         std::string(to_string(decision)), std::nullopt,
                                         std::chrono::milliseconds(0)});
    }

    std::optional<domain::Caption> caption;
    if (cfg.caption_mode && !direct_route) {
      current = domain::StageTag::CaptionStage;
      caption = caption_stage(p, *cfg.caption_mode, *cfg.caption_model, &record.stages);
    }

    bool include_image = false;
    if (cfg.image_to_answer_allowed) {
      if (direct_route || !cfg.caption_mode)
        include_image = true;  // direct multimodal input
      else
        include_image = cfg.reintegrate_image;
    }

    current = domain::StageTag::AnswerStage;
    domain::Answer answer = answer_stage(p, caption, include_image, cfg.answer_model,
                                         &record.stages);

    if (cfg.format_optimization) {
      current = domain::StageTag::FormatStage;
      answer = format_optimize(p, answer, cfg.answer_model, &record.stages, &record.warnings);
    }

    if (cfg.critical_review) {
      current = domain::StageTag::ReviewStage;
      const bool review_image = cfg.image_to_answer_allowed && p.image.has_value();
      answer = critical_review(p, caption, answer, *cfg.critical_review, review_image,
                               &record.stages, &record.warnings);
    }

    record.final_answer = std::move(answer);
  } catch (const std::exception& e) {
    record.failure = StageFailureInfo{current, e.what()};
  }
  return record;
}

BatchResult Engine::run_batch(const std::vector<domain::Problem>& problems,
                              const PipelineConfig& cfg, int parallelism, RunStore* store) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");

  const std::string digest = config_digest(cfg);
  BatchResult result;
  result.records.resize(problems.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> reused{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= problems.size()) return;
      const domain::Problem& p = problems[index];

      if (store != nullptr) {
        auto existing = store->load(p.id);
        if (existing && existing->completed() && existing->config_digest == digest) {
          result.records[index] = std::move(*existing);
          reused.fetch_add(1);
          continue;
        }
      }

      RunRecord record = run_pipeline(p, cfg);
      if (store != nullptr) store->save(record);
      result.records[index] = std::move(record);
    }
  };

  const int threads = std::min<int>(parallelism, static_cast<int>(problems.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  result.reused = reused.load();
  for (const RunRecord& record : result.records)
    if (!record.completed())
      result.failures.push_back(BatchFailure{record.problem_id,
                                             std::string(domain::to_string(record.failure->tag)),
                                             record.failure->message});
  return result;
}

}  // namespace capreason::pipeline
