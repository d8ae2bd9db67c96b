#include "capreason/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "capreason/http_backend.hpp"

namespace capreason::cfg {

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(value, path.parent_path());
}

RunConfig run_config_from_json(const nlohmann::json& value,
                               const std::filesystem::path& base_dir) {
  RunConfig config;
  try {
    config.pipeline = pipeline::config_from_json(value.at("pipeline"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid pipeline config: ") + e.what());
  }

  auto violations = pipeline::validate_config(config.pipeline);
  if (!violations.empty()) {
    std::string joined;
    for (const std::string& v : violations) {
      if (!joined.empty()) joined += "; ";
      joined += v;
    }
    throw ConfigError("invalid pipeline config: " + joined);
  }

  if (!value.contains("backends") || !value.at("backends").is_object() ||
      value.at("backends").empty())
    throw ConfigError("config requires a non-empty backends map");
  for (const auto& [provider, binding] : value.at("backends").items()) {
    BackendBinding b;
    b.kind = binding.at("kind").get<std::string>();
    if (b.kind != "openai" && b.kind != "gemini" && b.kind != "mock")
      throw ConfigError("backend \"" + provider + "\" has unknown kind \"" + b.kind + "\"");
    b.base_url = binding.value("base_url", "");
    b.api_key_env = binding.value("api_key_env", "");
    if (b.kind != "mock" && b.base_url.empty())
      throw ConfigError("backend \"" + provider + "\" requires base_url");
    config.backends[provider] = std::move(b);
  }

  auto check_provider = [&](const domain::ModelSpec& spec, const std::string& role) {
    if (!config.backends.count(spec.provider))
      throw ConfigError(role + " references unknown backend provider \"" + spec.provider + "\"");
  };
  check_provider(config.pipeline.answer_model, "answer_model");
  if (config.pipeline.caption_model) check_provider(*config.pipeline.caption_model, "caption_model");
  if (config.pipeline.critical_review)
    check_provider(*config.pipeline.critical_review, "critical_review");

  if (value.contains("judge_model") && !value.at("judge_model").is_null()) {
    config.judge_model = domain::model_spec_from_json(value.at("judge_model"));
    check_provider(*config.judge_model, "judge_model");
  }

  std::string templates = value.value("templates_dir", "templates");
  std::filesystem::path templates_path(templates);
  config.templates_dir =
      templates_path.is_absolute() ? templates_path : base_dir / templates_path;

  if (value.contains("retry")) {
    const auto& retry = value.at("retry");
    config.retry.max_attempts = retry.value("max_attempts", 3);
    config.retry.base_delay = std::chrono::milliseconds(retry.value("base_delay_ms", 500));
    config.retry.multiplier = retry.value("multiplier", 2.0);
    config.retry.jitter_fraction = retry.value("jitter_fraction", 0.0);
    if (config.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
    if (config.retry.multiplier < 1.0) throw ConfigError("retry.multiplier must be >= 1");
    if (config.retry.jitter_fraction < 0.0 || config.retry.jitter_fraction > 1.0)
      throw ConfigError("retry.jitter_fraction must be in [0,1]");
  }

  if (value.contains("rate_limits")) {
    for (const auto& [provider, limit] : value.at("rate_limits").items()) {
      backend::RateLimit rate;
      rate.capacity = limit.at("capacity").get<int>();
      rate.refill_per_sec = limit.at("refill_per_sec").get<double>();
      if (rate.capacity < 1 || rate.refill_per_sec <= 0)
        throw ConfigError("rate limit for \"" + provider + "\" must be positive");
      config.rate_limits[provider] = rate;
    }
  }

  config.timeout_s = value.value("timeout_s", 300);
  config.parallelism = value.value("parallelism", 8);
  if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  config.answer_marker = value.value("answer_marker", std::string(domain::kDefaultAnswerMarker));
  if (config.answer_marker.empty()) throw ConfigError("answer_marker must be nonempty");
  return config;
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json backends = nlohmann::json::object();
  for (const auto& [provider, binding] : config.backends) {
    backends[provider] = {{"kind", binding.kind},
                          {"base_url", binding.base_url},
                          {"api_key_env", binding.api_key_env}};
  }
  nlohmann::json rate_limits = nlohmann::json::object();
  for (const auto& [provider, limit] : config.rate_limits)
    rate_limits[provider] = {{"capacity", limit.capacity},
                             {"refill_per_sec", limit.refill_per_sec}};
  return {{"pipeline", pipeline::to_json(config.pipeline)},
          {"backends", backends},
          {"judge_model",
           config.judge_model ? domain::to_json(*config.judge_model) : nlohmann::json(nullptr)},
          {"templates_dir", config.templates_dir.string()},
          {"retry",
           {{"max_attempts", config.retry.max_attempts},
            {"base_delay_ms", config.retry.base_delay.count()},
            {"multiplier", config.retry.multiplier},
            {"jitter_fraction", config.retry.jitter_fraction}}},
          {"rate_limits", rate_limits},
          {"timeout_s", config.timeout_s},
          {"parallelism", config.parallelism},
          {"answer_marker", config.answer_marker}};
}

std::shared_ptr<backend::BackendRegistry> build_registry(const RunConfig& config,
                                                         backend::GatewayMode mode) {
  auto registry = std::make_shared<backend::BackendRegistry>();
  if (mode == backend::GatewayMode::ReplayOnly) return registry;

  for (const auto& [provider, binding] : config.backends) {
    if (binding.kind == "mock") {
      registry->add(provider, std::make_shared<backend::MockBackend>());
      continue;
    }
    backend::HttpOptions options;
    options.base_url = binding.base_url;
    options.timeout_s = config.timeout_s;
    if (!binding.api_key_env.empty()) {
      const char* key = std::getenv(binding.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw ConfigError("backend \"" + provider + "\" needs env var " + binding.api_key_env +
                          " in live mode");
      options.api_key = key;
    }
    if (binding.kind == "openai")
      registry->add(provider, std::make_shared<backend::OpenAiBackend>(options));
    else
      registry->add(provider, std::make_shared<backend::GeminiBackend>(options));
  }
  return registry;
}

std::unique_ptr<backend::Gateway> build_gateway(const RunConfig& config,
                                                std::shared_ptr<backend::BackendRegistry> registry,
                                                std::shared_ptr<backend::RecordStore> store,
                                                backend::GatewayMode mode) {
  auto gateway = std::make_unique<backend::Gateway>(std::move(registry), std::move(store),
                                                    config.retry, mode);
  for (const auto& [provider, limit] : config.rate_limits) gateway->set_rate_limit(provider, limit);
  return gateway;
}

}  // namespace capreason::cfg
