#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "capreason/gateway.hpp"
#include "capreason/pipeline.hpp"

namespace capreason::cfg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendBinding {
  std::string kind;  // "openai" | "gemini" | "mock"
  std::string base_url;
  std::string api_key_env;
};

// Declarative run configuration. The pipeline block maps 1:1 onto
// PipelineConfig and its canonical digest is the run's config digest.
struct RunConfig {
  pipeline::PipelineConfig pipeline;
  std::map<std::string, BackendBinding> backends;
  std::optional<domain::ModelSpec> judge_model;
  std::filesystem::path templates_dir;  // resolved against the config file
  backend::RetryPolicy retry;
  std::map<std::string, backend::RateLimit> rate_limits;
  int timeout_s = 300;
  int parallelism = 8;
  std::string answer_marker = std::string(domain::kDefaultAnswerMarker);
};

RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& value,
                               const std::filesystem::path& base_dir);

// Builds the provider registry for the configured bindings. In live mode a
// declared http backend with its API key variable unset is a startup
// error; replay-only builds an empty registry because nothing may
// dispatch.
std::shared_ptr<backend::BackendRegistry> build_registry(const RunConfig& config,
                                                         backend::GatewayMode mode);

std::unique_ptr<backend::Gateway> build_gateway(const RunConfig& config,
                                                std::shared_ptr<backend::BackendRegistry> registry,
                                                std::shared_ptr<backend::RecordStore> store,
                                                backend::GatewayMode mode);

}  // namespace capreason::cfg
