#include "homegate/pipeline.hpp"

#include "homegate/text.hpp"

namespace homegate::pipeline {
namespace {

constexpr std::uint64_t kPromptHashSeed = 0x9047a5;

}  // namespace

std::string to_string(FailurePolicy policy) {
  switch (policy) {
    case FailurePolicy::FailReject:
      return "reject";
    case FailurePolicy::FailAccept:
      return "accept";
    case FailurePolicy::Propagate:
      return "off";
  }
  return "reject";
}

std::optional<FailurePolicy> failure_policy_from_string(std::string_view s) {
  const std::string lower = text::lower_ascii(text::trim(s));
  if (lower == "reject") {
    return FailurePolicy::FailReject;
  }
  if (lower == "accept") {
    return FailurePolicy::FailAccept;
  }
  if (lower == "off") {
    return FailurePolicy::Propagate;
  }
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (k < 1) {
    throw PipelineError("k must be at least 1");
  }
  window.validate();
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<backend::Backend> backend,
                   std::shared_ptr<memory::DialogueMemory> memory,
                   std::shared_ptr<kb::KnowledgeBase> kb,
                   std::shared_ptr<const prompting::PromptTemplate> tmpl,
                   std::shared_ptr<const prompting::RuleSet> rules)
    : config_(std::move(config)), backend_(std::move(backend)), memory_(std::move(memory)),
      kb_(std::move(kb)), template_(std::move(tmpl)), rules_(std::move(rules)) {
  config_.validate();
  if (!backend_ || !memory_ || !kb_) {
    throw PipelineError("pipeline needs a backend, a dialogue memory, and a knowledge base");
  }
  if (!template_) {
    template_ = std::make_shared<const prompting::PromptTemplate>(
        prompting::PromptTemplate::builtin(config_.locale));
  }
  if (!rules_) {
    rules_ = std::make_shared<const prompting::RuleSet>(
        prompting::render_rules(corpus::taxonomy(), config_.locale));
  }
}

Decision Pipeline::decide(const std::string& household_id, std::string_view input,
                          std::int64_t now) {
  Decision decision;
  decision.mode = config_.mode;

  const std::string query{text::trim(input)};
  if (query.empty()) {
    decision.verdict = corpus::Label::Reject;
    decision.reason = "empty";
    return decision;
  }

  std::vector<corpus::DialogueTurn> history;
  if (config_.mode != prompting::PromptMode::Generic) {
    history = memory_->recent_history(household_id, now, config_.window);
    if (!config_.include_assistant_turns) {
      std::erase_if(history, [](const corpus::DialogueTurn& t) {
        return t.speaker == corpus::Speaker::Assistant;
      });
    }
  }
  if (config_.mode == prompting::PromptMode::WithHistoryAndCases) {
    decision.retrieved = kb_->retrieve_top_k(household_id, query, config_.k);
  }

  std::vector<kb::BadCase> prompt_cases;
  for (std::size_t i = 0; i < decision.retrieved.size() && i < kMaxPromptCases; ++i) {
    prompt_cases.push_back(decision.retrieved[i].bad_case);
  }

  const prompting::PromptText prompt =
      prompting::build_prompt(*template_, config_.mode, *rules_, query, history, prompt_cases);
  decision.history_used = prompt.history_turns;
  decision.prompt_hash = text::fnv1a64_hex(prompt.text, kPromptHashSeed);

  const auto append_user_turn = [&] {
    corpus::DialogueTurn turn;
    turn.speaker = corpus::Speaker::User;
    turn.text = query;
    turn.timestamp = now;
    memory_->append_turn(household_id, std::move(turn));
  };

  backend::BackendResponse response;
  try {
    response = backend_->classify(prompt);
  } catch (const backend::BackendError& e) {
    append_user_turn();
    if (config_.failure_policy == FailurePolicy::Propagate) {
      throw;
    }
    decision.verdict = config_.failure_policy == FailurePolicy::FailAccept
                           ? corpus::Label::Accept
                           : corpus::Label::Reject;
    decision.degraded = true;
    decision.reason = "backend_error";
    decision.attempts = e.attempts;
    return decision;
  }
  decision.backend_latency_ms = response.latency_ms;
  decision.attempts = response.attempts;
  append_user_turn();

  try {
    if (config_.strict_parse) {
      try {
        decision.verdict = prompting::parse_verdict(response.raw_text, true).value;
      } catch (const prompting::VerdictError&) {
        decision.verdict = prompting::parse_verdict(response.raw_text, false).value;
        decision.reason = "tolerant_fallback";
      }
    } else {
      decision.verdict = prompting::parse_verdict(response.raw_text, false).value;
    }
  } catch (const prompting::VerdictError& e) {
    if (config_.failure_policy == FailurePolicy::Propagate) {
      throw PipelineError(std::string{"verdict unparseable: "} + e.what());
    }
    decision.verdict = config_.failure_policy == FailurePolicy::FailAccept
                           ? corpus::Label::Accept
                           : corpus::Label::Reject;
    decision.degraded = true;
    decision.reason = "parse_error";
  }
  return decision;
}

bool Pipeline::record_feedback(const std::string& household_id, std::string_view utterance,
                               corpus::Label predicted, corpus::Label corrected,
                               std::int64_t now) {
  if (predicted == corrected) {
    return false;
  }
  const std::string canon = text::canonical(utterance);
  if (canon.empty()) {
    return false;
  }
  kb::BadCase bad_case;
  bad_case.household_id = household_id;
  bad_case.utterance = std::string{text::trim(utterance)};
  bad_case.corrected_label = corrected;
  bad_case.created_at = now;
  bad_case.case_id = "c" + text::fnv1a64_hex(household_id + "\x1f" + canon + "\x1f" +
                                                 corpus::to_string(corrected) + "\x1f" +
                                                 std::to_string(now),
                                             0xfeedbacc);
  return kb_->add_case(std::move(bad_case));
}

void Pipeline::record_assistant_turn(const std::string& household_id, std::string_view reply,
                                     std::int64_t now) {
  corpus::DialogueTurn turn;
  turn.speaker = corpus::Speaker::Assistant;
  turn.text = std::string{text::trim(reply)};
  turn.timestamp = now;
  memory_->append_turn(household_id, std::move(turn));
}

}  // namespace homegate::pipeline
