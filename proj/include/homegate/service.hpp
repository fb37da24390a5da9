#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "homegate/config.hpp"
#include "homegate/decision_log.hpp"
#include "homegate/pipeline.hpp"

namespace httplib {
class Server;
}

namespace homegate::service {

inline constexpr const char* kVersion = "0.1.0";

// HTTP gateway binding the pipeline, memory, and knowledge base behind
// POST /v1/decide, POST /v1/feedback, GET /v1/households/{id}/history,
// GET /v1/households/{id}/kb, and GET /healthz. Every response carries a
// request id that the decision log line shares.
class Service {
 public:
  explicit Service(config::ServiceConfig cfg);
  ~Service();

  // Blocks serving requests until stop() is called.
  void run();
  // Binds an ephemeral port and serves from a background thread; returns
  // the bound port. Used by tests and by serve with listen_port = 0.
  int start_async();
  void stop();

  pipeline::Pipeline& pipeline() { return *pipeline_; }
  const config::ServiceConfig& config() const { return config_; }

 private:
  void install_routes();
  std::string next_request_id();

  config::ServiceConfig config_;
  std::shared_ptr<backend::Backend> backend_;
  std::shared_ptr<memory::DialogueMemory> memory_;
  std::shared_ptr<kb::KnowledgeBase> kb_;
  std::unique_ptr<pipeline::Pipeline> pipeline_;
  std::unique_ptr<decision_log::Writer> log_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<std::uint64_t> request_counter_{0};
  std::unique_ptr<std::thread> server_thread_;
};

}  // namespace homegate::service
