#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "homegate/backend.hpp"
#include "homegate/corpus.hpp"
#include "homegate/kb.hpp"
#include "homegate/memory.hpp"
#include "homegate/prompting.hpp"

namespace homegate::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Verdict substituted when the classifier cannot answer. Propagate turns
// the substitution off: backend failures surface to the caller instead.
enum class FailurePolicy { FailReject, FailAccept, Propagate };

std::string to_string(FailurePolicy policy);
std::optional<FailurePolicy> failure_policy_from_string(std::string_view s);

struct PipelineConfig {
  prompting::PromptMode mode = prompting::PromptMode::WithHistoryAndCases;
  memory::WindowPolicy window;
  std::size_t k = 3;
  FailurePolicy failure_policy = FailurePolicy::FailReject;
  bool strict_parse = false;
  bool include_assistant_turns = true;  // whether replies join the injected history
  prompting::Locale locale = prompting::Locale::Zh;

  void validate() const;
};

// Why a decision came out the way it did. Reason strings are part of the
// decision-log format: "", "empty", "tolerant_fallback", "parse_error",
// "backend_error".
struct Decision {
  corpus::Label verdict = corpus::Label::Reject;
  prompting::PromptMode mode = prompting::PromptMode::Generic;
  std::vector<kb::RetrievalHit> retrieved;
  std::size_t history_used = 0;
  double backend_latency_ms = 0.0;
  bool degraded = false;
  std::string prompt_hash;
  std::string reason;
  int attempts = 0;
};

// Orchestrates one rejection decision: window history, top-k bad cases,
// prompt build, classify, verdict parse, memory write. Runtime faults are
// absorbed into degraded decisions under the failure policy.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<backend::Backend> backend,
           std::shared_ptr<memory::DialogueMemory> memory, std::shared_ptr<kb::KnowledgeBase> kb,
           std::shared_ptr<const prompting::PromptTemplate> tmpl = nullptr,
           std::shared_ptr<const prompting::RuleSet> rules = nullptr);

  Decision decide(const std::string& household_id, std::string_view input, std::int64_t now);

  // Stores a misjudgment (predicted != corrected) as a bad case; returns
  // whether the knowledge base kept it.
  bool record_feedback(const std::string& household_id, std::string_view utterance,
                       corpus::Label predicted, corpus::Label corrected, std::int64_t now);

  // Downstream outcome for an accepted utterance; joins the household log.
  void record_assistant_turn(const std::string& household_id, std::string_view reply,
                             std::int64_t now);

  const PipelineConfig& config() const { return config_; }
  memory::DialogueMemory& memory() { return *memory_; }
  kb::KnowledgeBase& kb() { return *kb_; }
  backend::Backend& backend() { return *backend_; }

 private:
  // The prompt carries at most three cases even when a larger k is
  // configured for retrieval evidence.
  static constexpr std::size_t kMaxPromptCases = 3;

  PipelineConfig config_;
  std::shared_ptr<backend::Backend> backend_;
  std::shared_ptr<memory::DialogueMemory> memory_;
  std::shared_ptr<kb::KnowledgeBase> kb_;
  std::shared_ptr<const prompting::PromptTemplate> template_;
  std::shared_ptr<const prompting::RuleSet> rules_;
};

}  // namespace homegate::pipeline
