#include "homegate/service.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "homegate/text.hpp"

namespace homegate::service {
namespace {

void reply_json(httplib::Response& res, int status, nlohmann::json body,
                const std::string& request_id) {
  body["request_id"] = request_id;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& field,
                 const std::string& message, const std::string& request_id) {
  nlohmann::json body{{"error", {{"message", message}}}};
  if (!field.empty()) {
    body["error"]["field"] = field;
  }
  reply_json(res, status, std::move(body), request_id);
}

std::optional<nlohmann::json> parse_body(const httplib::Request& req) {
  nlohmann::json j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return std::nullopt;
  }
  return j;
}

}  // namespace

Service::Service(config::ServiceConfig cfg) : config_(std::move(cfg)) {
  config_.validate();
  backend_ = config::make_backend(config_);
  const auto mem_dir = (std::filesystem::path(config_.data_dir) / "memory").string();
  const auto kb_dir = (std::filesystem::path(config_.data_dir) / "kb").string();
  memory_ = std::make_shared<memory::DialogueMemory>(mem_dir);
  kb_ = std::make_shared<kb::KnowledgeBase>(std::make_shared<kb::HashedNgramEmbedder>(), kb_dir);

  std::shared_ptr<const prompting::PromptTemplate> tmpl;
  if (config_.template_path) {
    tmpl = std::make_shared<const prompting::PromptTemplate>(
        prompting::PromptTemplate::load_file(*config_.template_path));
  }
  pipeline_ = std::make_unique<pipeline::Pipeline>(config_.pipeline, backend_, memory_, kb_, tmpl);
  log_ = std::make_unique<decision_log::Writer>(
      (std::filesystem::path(config_.data_dir) / "decisions.jsonl").string());
  server_ = std::make_unique<httplib::Server>();
  install_routes();
}

Service::~Service() {
  stop();
}

std::string Service::next_request_id() {
  const std::uint64_t n = request_counter_.fetch_add(1) + 1;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "r%08llu", static_cast<unsigned long long>(n));
  return buf;
}

void Service::install_routes() {
  const auto authorized = [this](const httplib::Request& req) {
    if (config_.auth_token_env.empty()) {
      return true;
    }
    const char* token = std::getenv(config_.auth_token_env.c_str());
    if (token == nullptr || *token == 0) {
      return true;  // auth disabled unless the env var is set
    }
    return req.get_header_value("Authorization") == std::string("Bearer ") + token;
  };

  server_->Post("/v1/decide", [this, authorized](const httplib::Request& req,
                                                 httplib::Response& res) {
    const std::string request_id = next_request_id();
    if (!authorized(req)) {
      reply_error(res, 401, "", "missing or invalid bearer token", request_id);
      return;
    }
    const auto body = parse_body(req);
    if (!body) {
      reply_error(res, 400, "", "body must be a JSON object", request_id);
      return;
    }
    const std::string household = body->value("household_id", "");
    if (household.empty()) {
      reply_error(res, 400, "household_id", "household_id is required", request_id);
      return;
    }
    if (!body->contains("text") || !(*body)["text"].is_string()) {
      reply_error(res, 400, "text", "text is required", request_id);
      return;
    }
    const std::string input = (*body)["text"].get<std::string>();
    std::int64_t now;
    if (body->contains("timestamp")) {
      if (!(*body)["timestamp"].is_number_integer()) {
        reply_error(res, 400, "timestamp", "timestamp must be UTC seconds", request_id);
        return;
      }
      now = (*body)["timestamp"].get<std::int64_t>();
    } else {
      now = std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
    }

    pipeline::Decision decision;
    try {
      decision = pipeline_->decide(household, input, now);
    } catch (const backend::BackendError& e) {
      reply_error(res, 503, "", std::string{"classifier backend unavailable: "} + e.what(),
                  request_id);
      return;
    } catch (const pipeline::PipelineError& e) {
      reply_error(res, 503, "", e.what(), request_id);
      return;
    }

    log_->append(decision_log::make_entry(request_id, household, input, now, decision));

    nlohmann::json retrieved = nlohmann::json::array();
    for (const auto& hit : decision.retrieved) {
      retrieved.push_back(hit.bad_case.case_id);
    }
    reply_json(res, 200,
               nlohmann::json{{"verdict", corpus::to_string(decision.verdict)},
                              {"mode", prompting::to_string(decision.mode)},
                              {"degraded", decision.degraded},
                              {"reason", decision.reason},
                              {"retrieved", std::move(retrieved)},
                              {"history_used", decision.history_used},
                              {"latency_ms", decision.backend_latency_ms},
                              {"prompt_hash", decision.prompt_hash}},
               request_id);
  });

  server_->Post("/v1/feedback", [this, authorized](const httplib::Request& req,
                                                   httplib::Response& res) {
    const std::string request_id = next_request_id();
    if (!authorized(req)) {
      reply_error(res, 401, "", "missing or invalid bearer token", request_id);
      return;
    }
    const auto body = parse_body(req);
    if (!body) {
      reply_error(res, 400, "", "body must be a JSON object", request_id);
      return;
    }
    const std::string household = body->value("household_id", "");
    if (household.empty()) {
      reply_error(res, 400, "household_id", "household_id is required", request_id);
      return;
    }
    const std::string utterance = body->value("utterance", "");
    if (text::trim(utterance).empty()) {
      reply_error(res, 400, "utterance", "utterance is required", request_id);
      return;
    }
    const auto predicted = corpus::label_from_string(body->value("predicted", ""));
    const auto corrected = corpus::label_from_string(body->value("corrected", ""));
    if (!predicted) {
      reply_error(res, 400, "predicted", "predicted must be accept or reject", request_id);
      return;
    }
    if (!corrected) {
      reply_error(res, 400, "corrected", "corrected must be accept or reject", request_id);
      return;
    }
    std::int64_t now;
    if (body->contains("timestamp") && (*body)["timestamp"].is_number_integer()) {
      now = (*body)["timestamp"].get<std::int64_t>();
    } else {
      now = std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count();
    }
    const bool stored = pipeline_->record_feedback(household, utterance, *predicted, *corrected,
                                                   now);
    reply_json(res, 200, nlohmann::json{{"stored", stored}}, request_id);
  });

  server_->Get("/v1/households/:id/history", [this, authorized](const httplib::Request& req,
                                                                httplib::Response& res) {
    const std::string request_id = next_request_id();
    if (!authorized(req)) {
      reply_error(res, 401, "", "missing or invalid bearer token", request_id);
      return;
    }
    const std::string household = req.path_params.at("id");
    const bool strict = req.get_param_value("strict") == "1";
    const std::size_t total = memory_->size(household);
    if (strict && total == 0) {
      reply_error(res, 404, "", "unknown household", request_id);
      return;
    }
    std::size_t limit = 10;
    if (req.has_param("limit")) {
      limit = static_cast<std::size_t>(std::max(0L, std::atol(req.get_param_value("limit").c_str())));
    }
    auto turns = memory_->all_turns(household);
    if (turns.size() > limit) {
      turns.erase(turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(turns.size() - limit));
    }
    nlohmann::json items = nlohmann::json::array();
    for (const auto& turn : turns) {
      items.push_back(nlohmann::json{{"speaker", corpus::to_string(turn.speaker)},
                                     {"text", turn.text},
                                     {"ts", turn.timestamp.value_or(0)}});
    }
    reply_json(res, 200, nlohmann::json{{"household_id", household}, {"turns", std::move(items)}},
               request_id);
  });

  server_->Get("/v1/households/:id/kb", [this, authorized](const httplib::Request& req,
                                                           httplib::Response& res) {
    const std::string request_id = next_request_id();
    if (!authorized(req)) {
      reply_error(res, 401, "", "missing or invalid bearer token", request_id);
      return;
    }
    const std::string household = req.path_params.at("id");
    const bool strict = req.get_param_value("strict") == "1";
    const kb::KbStats stats = kb_->stats(household);
    if (strict && stats.total == 0) {
      reply_error(res, 404, "", "unknown household", request_id);
      return;
    }
    reply_json(res, 200,
               nlohmann::json{{"household_id", household},
                              {"accept", stats.accept},
                              {"reject", stats.reject},
                              {"total", stats.total}},
               request_id);
  });

  server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const std::string request_id = next_request_id();
    reply_json(res, 200,
               nlohmann::json{{"version", kVersion},
                              {"backend", backend_->describe()},
                              {"backend_reachable", backend_->probe()}},
               request_id);
  });
}

void Service::run() {
  if (config_.listen_port == 0) {
    const int port = server_->bind_to_any_port(config_.listen_host);
    if (port <= 0) {
      throw config::ConfigError("cannot bind to " + config_.listen_host);
    }
    std::cerr << "bound ephemeral port " << port << "\n";
    server_->listen_after_bind();
    return;
  }
  if (!server_->listen(config_.listen_host, config_.listen_port)) {
    throw config::ConfigError("cannot listen on " + config_.listen_host + ":" +
                              std::to_string(config_.listen_port));
  }
}

int Service::start_async() {
  const int port = server_->bind_to_any_port(config_.listen_host);
  if (port <= 0) {
    throw config::ConfigError("cannot bind to " + config_.listen_host);
  }
  server_thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_ && server_->is_running()) {
    server_->stop();
  }
  if (server_thread_ && server_thread_->joinable()) {
    server_thread_->join();
    server_thread_.reset();
  }
}

}  // namespace homegate::service
