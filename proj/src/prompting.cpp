#include "homegate/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "homegate/text.hpp"

namespace homegate::prompting {
namespace {

constexpr std::string_view kPlaceholders[] = {"{rules}", "{cases}", "{history}", "{query}"};

constexpr std::string_view kTemplateZh =
    "请判断当前用户输入应当被接受还是拒绝。\n"
    "\n"
    "拒绝规则如下：\n"
    "{rules}\n"
    "\n"
    "知识库中与当前输入最相似的家庭习惯用语及其修正标签：\n"
    "{cases}\n"
    "\n"
    "只返回一个 JSON 对象：接受则输出 {\"result\": \"YES\"}，拒绝则输出 {\"result\": \"NO\"}，"
    "不要输出任何其他内容。\n"
    "\n"
    "对话历史：\n"
    "{history}\n"
    "\n"
    "当前输入：{query}\n";

constexpr std::string_view kTemplateEn =
    "Decide whether the current user input should be accepted or rejected.\n"
    "\n"
    "Rejection rules:\n"
    "{rules}\n"
    "\n"
    "Most similar household utterances from the knowledge base, with corrected labels:\n"
    "{cases}\n"
    "\n"
    "Return only a JSON object: {\"result\": \"YES\"} to accept, {\"result\": \"NO\"} to reject. "
    "No extra text.\n"
    "\n"
    "Dialogue history:\n"
    "{history}\n"
    "\n"
    "Current input: {query}\n";

void replace_all(std::string& s, std::string_view token, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = s.find(token, pos)) != std::string::npos) {
    s.replace(pos, token.size(), value);
    pos += value.size();
  }
}

std::vector<std::string> split_paragraphs(std::string_view t) {
  std::vector<std::string> paragraphs;
  std::string current;
  std::size_t start = 0;
  while (start <= t.size()) {
    const std::size_t nl = t.find('\n', start);
    const std::string_view line =
        nl == std::string_view::npos ? t.substr(start) : t.substr(start, nl - start);
    if (text::trim(line).empty()) {
      if (!current.empty()) {
        paragraphs.push_back(std::move(current));
        current.clear();
      }
    } else {
      if (!current.empty()) {
        current.push_back('\n');
      }
      current.append(line);
    }
    if (nl == std::string_view::npos) {
      break;
    }
    start = nl + 1;
  }
  if (!current.empty()) {
    paragraphs.push_back(std::move(current));
  }
  return paragraphs;
}

// Matching close brace for the opener at `open`, or npos.
std::size_t find_balanced_close(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) {
        return i;
      }
    }
  }
  return std::string_view::npos;
}

Verdict verdict_from_result(const nlohmann::json& obj, std::string_view raw) {
  const auto& value = obj.at("result");
  if (value.is_string()) {
    const std::string lower = text::lower_ascii(value.get<std::string>());
    if (lower == "yes") {
      return Verdict{corpus::Label::Accept, std::string{raw}};
    }
    if (lower == "no") {
      return Verdict{corpus::Label::Reject, std::string{raw}};
    }
  }
  throw VerdictError("unrecognized verdict: " + value.dump());
}

}  // namespace

std::string to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::Generic:
      return "generic";
    case PromptMode::WithHistory:
      return "with_history";
    case PromptMode::WithHistoryAndCases:
      return "with_history_and_cases";
  }
  return "generic";
}

std::optional<PromptMode> prompt_mode_from_string(std::string_view s) {
  const std::string lower = text::lower_ascii(text::trim(s));
  if (lower == "generic") {
    return PromptMode::Generic;
  }
  if (lower == "with_history") {
    return PromptMode::WithHistory;
  }
  if (lower == "with_history_and_cases") {
    return PromptMode::WithHistoryAndCases;
  }
  return std::nullopt;
}

std::string to_string(Locale locale) {
  return locale == Locale::Zh ? "zh" : "en";
}

std::optional<Locale> locale_from_string(std::string_view s) {
  const std::string lower = text::lower_ascii(text::trim(s));
  if (lower == "zh") {
    return Locale::Zh;
  }
  if (lower == "en") {
    return Locale::En;
  }
  return std::nullopt;
}

PromptTemplate PromptTemplate::builtin(Locale locale) {
  return PromptTemplate{std::string{locale == Locale::Zh ? kTemplateZh : kTemplateEn}};
}

PromptTemplate PromptTemplate::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PromptError("cannot read template file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string body = buf.str();
  body.erase(std::remove(body.begin(), body.end(), '\r'), body.end());
  for (const auto placeholder : kPlaceholders) {
    if (body.find(placeholder) == std::string::npos) {
      throw PromptError("template " + path + " is missing placeholder " +
                        std::string{placeholder});
    }
  }
  return PromptTemplate{std::move(body)};
}

RuleSet render_rules(const std::vector<corpus::UtteranceType>& taxonomy, Locale locale) {
  if (taxonomy.size() != corpus::kTypeCount) {
    throw PromptError("taxonomy must contain all " + std::to_string(corpus::kTypeCount) +
                      " types, got " + std::to_string(taxonomy.size()));
  }
  std::vector<const corpus::UtteranceType*> ordered(corpus::kTypeCount, nullptr);
  for (const auto& t : taxonomy) {
    if (t.type_id < 0 || t.type_id >= corpus::kTypeCount || ordered[t.type_id] != nullptr) {
      throw PromptError("taxonomy has a missing or duplicated type_id");
    }
    ordered[t.type_id] = &t;
  }
  std::string out;
  int clause = 0;
  for (const auto* t : ordered) {
    if (t->expected_label != corpus::Label::Reject) {
      continue;
    }
    ++clause;
    out += std::to_string(clause);
    out += ". ";
    out += locale == Locale::Zh ? t->description_zh : t->description_en;
    out += '\n';
  }
  if (!out.empty() && out.back() == '\n') {
    out.pop_back();
  }
  return RuleSet{std::move(out)};
}

std::string render_history(std::span<const corpus::DialogueTurn> history) {
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i > 0) {
      out.push_back('\n');
    }
    out += corpus::to_string(history[i].speaker);
    out += ": ";
    out += history[i].text;
  }
  return out;
}

std::string render_cases(std::span<const kb::BadCase> cases) {
  std::string out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (i > 0) {
      out.push_back('\n');
    }
    out += cases[i].utterance;
    out += " → ";
    out += corpus::to_string(cases[i].corrected_label);
  }
  return out;
}

PromptText build_prompt(const PromptTemplate& tmpl, PromptMode mode, const RuleSet& rules,
                        std::string_view query, std::span<const corpus::DialogueTurn> history,
                        std::span<const kb::BadCase> cases) {
  if (rules.rules_text.empty()) {
    throw PromptError("rules text is empty");
  }
  const std::string trimmed_query{text::trim(query)};
  if (trimmed_query.empty()) {
    throw PromptError("query is empty");
  }
  if (mode != PromptMode::WithHistoryAndCases && !cases.empty()) {
    throw PromptError("cases supplied in " + to_string(mode) + " mode");
  }
  if (mode == PromptMode::Generic && !history.empty()) {
    throw PromptError("history supplied in generic mode");
  }
  if (cases.size() > 3) {
    throw PromptError("at most 3 knowledge-base cases go into a prompt");
  }

  const bool want_cases = mode == PromptMode::WithHistoryAndCases && !cases.empty();
  const bool want_history = mode != PromptMode::Generic && !history.empty();

  std::vector<std::string> kept;
  for (auto& paragraph : split_paragraphs(tmpl.text)) {
    const bool has_cases = paragraph.find("{cases}") != std::string::npos;
    const bool has_history = paragraph.find("{history}") != std::string::npos;
    if (has_cases && !want_cases) {
      continue;
    }
    if (has_history && !want_history) {
      continue;
    }
    replace_all(paragraph, "{rules}", rules.rules_text);
    replace_all(paragraph, "{query}", trimmed_query);
    if (has_cases) {
      replace_all(paragraph, "{cases}", render_cases(cases));
    }
    if (has_history) {
      replace_all(paragraph, "{history}", render_history(history));
    }
    kept.push_back(std::move(paragraph));
  }

  PromptText prompt;
  prompt.mode = mode;
  prompt.case_count = want_cases ? cases.size() : 0;
  prompt.history_turns = want_history ? history.size() : 0;
  prompt.query = trimmed_query;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) {
      prompt.text += "\n\n";
    }
    prompt.text += kept[i];
  }
  prompt.text.push_back('\n');
  return prompt;
}

Verdict parse_verdict(std::string_view raw, bool strict) {
  if (strict) {
    const std::string_view trimmed = text::trim(raw);
    if (trimmed.empty()) {
      throw VerdictError("no JSON object found in empty response");
    }
    const nlohmann::json j = nlohmann::json::parse(trimmed, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw VerdictError("strict mode requires exactly one JSON object, got: " +
                         std::string{raw.substr(0, 80)});
    }
    if (j.size() != 1 || !j.contains("result")) {
      throw VerdictError("strict mode requires a single result field");
    }
    return verdict_from_result(j, raw);
  }

  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') {
      continue;
    }
    const std::size_t close = find_balanced_close(raw, i);
    if (close == std::string_view::npos) {
      continue;
    }
    const nlohmann::json j = nlohmann::json::parse(raw.substr(i, close - i + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      continue;
    }
    if (!j.contains("result")) {
      throw VerdictError("result field missing from JSON object");
    }
    return verdict_from_result(j, raw);
  }
  throw VerdictError("no JSON object found in response");
}

std::string render_verdict(corpus::Label label) {
  return label == corpus::Label::Accept ? R"({"result":"YES"})" : R"({"result":"NO"})";
}

}  // namespace homegate::prompting
