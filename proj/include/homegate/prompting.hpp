#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "homegate/corpus.hpp"
#include "homegate/kb.hpp"

namespace homegate::prompting {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerdictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The three prompt tiers: bare rules, rules + household history, and
// rules + history + retrieved knowledge-base cases.
enum class PromptMode { Generic, WithHistory, WithHistoryAndCases };

std::string to_string(PromptMode mode);
std::optional<PromptMode> prompt_mode_from_string(std::string_view s);

enum class Locale { Zh, En };

std::string to_string(Locale locale);
std::optional<Locale> locale_from_string(std::string_view s);

struct RuleSet {
  std::string rules_text;
};

struct PromptText {
  std::string text;
  PromptMode mode = PromptMode::Generic;
  std::size_t case_count = 0;
  std::size_t history_turns = 0;
  std::string query;  // trimmed query, carried for mocks and audit
};

struct Verdict {
  corpus::Label value = corpus::Label::Reject;
  std::string raw;
};

// A prompt template is blank-line-separated paragraphs holding the
// placeholders {rules}, {cases}, {history}, {query}. The paragraphs owning
// {cases} and {history} are dropped wholesale when the mode (or the data)
// does not supply them.
struct PromptTemplate {
  std::string text;

  static PromptTemplate builtin(Locale locale);
  // Loads a template file and verifies all four placeholders are present.
  static PromptTemplate load_file(const std::string& path);
};

// One numbered clause per reject type, ordered by type_id; deterministic.
// Throws when the taxonomy is not the complete 12-type set.
RuleSet render_rules(const std::vector<corpus::UtteranceType>& taxonomy, Locale locale = Locale::Zh);

// Deterministic template expansion. Sections appear in fixed order: task
// statement, rules, cases, output-format instruction, history, query.
// Throws on mode/argument mismatch (cases outside WithHistoryAndCases,
// history in Generic mode, empty query).
PromptText build_prompt(const PromptTemplate& tmpl, PromptMode mode, const RuleSet& rules,
                        std::string_view query, std::span<const corpus::DialogueTurn> history,
                        std::span<const kb::BadCase> cases);

// history lines as rendered into prompts ("user: ..." / "assistant: ...").
std::string render_history(std::span<const corpus::DialogueTurn> history);

// case lines as rendered into prompts ("utterance → label").
std::string render_cases(std::span<const kb::BadCase> cases);

// Strict: the input must be exactly one JSON object with a single `result`
// field. Tolerant: the first syntactically valid JSON object embedded in
// the input is used. The result value is matched case-insensitively
// against {"yes","no"}.
Verdict parse_verdict(std::string_view raw, bool strict);

// Canonical model-side rendering of a verdict; parse_verdict inverts it.
std::string render_verdict(corpus::Label label);

}  // namespace homegate::prompting
