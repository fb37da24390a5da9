#include "homegate/corpus.hpp"

#include <fstream>
#include <sstream>

#include "homegate/text.hpp"

namespace homegate::corpus {
namespace {

constexpr std::string_view kLegacySeparator = "~~~~~";

const char* speaker_key = "speaker";

nlohmann::json turn_to_json(const DialogueTurn& turn) {
  nlohmann::json j{{speaker_key, to_string(turn.speaker)}, {"text", turn.text}};
  if (turn.timestamp) {
    j["ts"] = *turn.timestamp;
  }
  return j;
}

DialogueTurn turn_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains(speaker_key) || !j.contains("text")) {
    throw CorpusError("history turn must be an object with speaker and text");
  }
  DialogueTurn turn;
  const auto speaker = speaker_from_string(j.at(speaker_key).get<std::string>());
  if (!speaker) {
    throw CorpusError("unknown speaker \"" + j.at(speaker_key).get<std::string>() + "\"");
  }
  turn.speaker = *speaker;
  if (!j.at("text").is_string()) {
    throw CorpusError("history turn text must be a string");
  }
  turn.text = j.at("text").get<std::string>();
  if (text::trim(turn.text).empty()) {
    throw CorpusError("history turn text is empty");
  }
  if (j.contains("ts")) {
    if (!j.at("ts").is_number_integer()) {
      throw CorpusError("history turn ts must be an integer");
    }
    turn.timestamp = j.at("ts").get<std::int64_t>();
  }
  return turn;
}

void check_history_order(const std::vector<DialogueTurn>& history) {
  std::optional<std::int64_t> last;
  for (const auto& turn : history) {
    if (!turn.timestamp) {
      continue;
    }
    if (last && *turn.timestamp < *last) {
      throw CorpusError("history turns are not in chronological order");
    }
    last = turn.timestamp;
  }
}

}  // namespace

std::string to_string(Label label) {
  return label == Label::Accept ? "accept" : "reject";
}

std::optional<Label> label_from_string(std::string_view s) {
  const std::string lower = text::lower_ascii(text::trim(s));
  if (lower == "accept") {
    return Label::Accept;
  }
  if (lower == "reject") {
    return Label::Reject;
  }
  return std::nullopt;
}

std::string to_string(Speaker speaker) {
  return speaker == Speaker::User ? "user" : "assistant";
}

std::optional<Speaker> speaker_from_string(std::string_view s) {
  const std::string lower = text::lower_ascii(text::trim(s));
  if (lower == "user") {
    return Speaker::User;
  }
  if (lower == "assistant") {
    return Speaker::Assistant;
  }
  return std::nullopt;
}

const std::vector<UtteranceType>& taxonomy() {
  static const std::vector<UtteranceType> kTypes = {
      {0, "wake_word", Label::Accept, "唤醒词或对助手的称呼，用于发起对话。",
       "A wake word or assistant name used to start a conversation."},
      {1, "illegal_language", Label::Reject, "包含辱骂、淫秽、暴力或其他违法违规内容的语句。",
       "Content that is abusive, obscene, violent, or otherwise unlawful."},
      {2, "non_human_sound", Label::Reject, "非真人发出的声音，例如电视播放、合成语音或环境噪声。",
       "Audio not produced by a live person, such as TV playback, synthetic speech, or ambient noise."},
      {3, "garbled_or_meaningless", Label::Reject, "识别乱码、口误或没有交互价值的无意义短语。",
       "Garbled recognition output, slips of the tongue, or meaningless short fragments."},
      {4, "not_directed_at_assistant", Label::Reject, "用户之间交谈或自言自语，并非对助手说话。",
       "Speech between people or self-talk that is not addressed to the assistant."},
      {5, "unreasonable_command", Label::Reject, "带有指令语气但明显不合理、无法执行的请求（无历史）。",
       "Command-like phrasing whose request is clearly unreasonable or infeasible (no history)."},
      {6, "ambiguous_chat_no_history", Label::Reject, "面向助手的含混闲聊，无历史可依且回复不确定。",
       "Ambiguous small talk addressed to the assistant, with no history and no reliable reply."},
      {7, "ambiguous_chat_history_no_command", Label::Reject,
       "面向助手的含混闲聊，有历史但其中没有有效指令。",
       "Ambiguous chat whose history contains no valid command."},
      {8, "answerable_chat", Label::Accept, "面向助手的闲聊，助手可以给出回答。",
       "Chat addressed to the assistant that it can answer."},
      {9, "supported_command", Label::Accept, "面向助手的指令，当前设备体系支持执行。",
       "A command the assistant's device ecosystem supports."},
      {10, "unsupported_clear_command", Label::Accept,
       "指令意图明确但当前尚不支持，其他品牌可能支持。",
       "A clear command not supported yet, though other brands may support it."},
      {11, "ambiguous_chat_history_with_command", Label::Accept,
       "有历史且历史中含有效指令，当前语句可能是补充或新指令。",
       "Ambiguous follow-up whose history contains a valid command; the utterance may extend it."},
  };
  return kTypes;
}

Label expected_label(int type_id) {
  if (type_id < 0 || type_id >= kTypeCount) {
    throw CorpusError("unknown type_id " + std::to_string(type_id));
  }
  return taxonomy()[static_cast<std::size_t>(type_id)].expected_label;
}

std::vector<DialogueTurn> split_legacy_history(std::string_view s) {
  std::vector<DialogueTurn> turns;
  std::size_t start = 0;
  std::size_t index = 0;
  while (true) {
    const std::size_t pos = s.find(kLegacySeparator, start);
    const std::string_view segment =
        pos == std::string_view::npos ? s.substr(start) : s.substr(start, pos - start);
    if (text::trim(segment).empty()) {
      throw CorpusError("legacy history has an empty turn segment");
    }
    DialogueTurn turn;
    turn.speaker = (index % 2 == 0) ? Speaker::User : Speaker::Assistant;
    turn.text = std::string{segment};
    turns.push_back(std::move(turn));
    if (pos == std::string_view::npos) {
      break;
    }
    start = pos + kLegacySeparator.size();
    ++index;
  }
  return turns;
}

std::string join_legacy_history(const std::vector<DialogueTurn>& turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) {
      out += kLegacySeparator;
    }
    out += turns[i].text;
  }
  return out;
}

Sample parse_sample(std::string_view line, LoadMode mode) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string{"invalid JSON: "} + e.what());
  }
  if (!j.is_object()) {
    throw CorpusError("record is not a JSON object");
  }

  Sample sample;
  if (!j.contains("id") || !j.at("id").is_string()) {
    throw CorpusError("missing or non-string id");
  }
  sample.id = j.at("id").get<std::string>();

  if (!j.contains("type_id") || !j.at("type_id").is_number_integer()) {
    throw CorpusError("record " + sample.id + ": missing or non-integer type_id");
  }
  sample.type_id = j.at("type_id").get<int>();
  if (sample.type_id < 0 || sample.type_id >= kTypeCount) {
    throw CorpusError("record " + sample.id + ": unknown type " + std::to_string(sample.type_id));
  }

  if (!j.contains("text") || !j.at("text").is_string()) {
    throw CorpusError("record " + sample.id + ": missing or non-string text");
  }
  sample.text = j.at("text").get<std::string>();
  if (text::trim(sample.text).empty()) {
    throw CorpusError("record " + sample.id + ": empty text");
  }

  if (!j.contains("label") || !j.at("label").is_string()) {
    throw CorpusError("record " + sample.id + ": missing or non-string label");
  }
  const auto label = label_from_string(j.at("label").get<std::string>());
  if (!label) {
    throw CorpusError("record " + sample.id + ": unknown label \"" +
                      j.at("label").get<std::string>() + "\"");
  }
  sample.label = *label;
  if (mode == LoadMode::Benchmark && sample.label != expected_label(sample.type_id)) {
    throw CorpusError("record " + sample.id + ": label " + to_string(sample.label) +
                      " disagrees with type " + std::to_string(sample.type_id) + " (expects " +
                      to_string(expected_label(sample.type_id)) + ")");
  }

  if (j.contains("history") && !j.at("history").is_null()) {
    const auto& h = j.at("history");
    try {
      if (h.is_string()) {
        if (!h.get<std::string>().empty()) {
          sample.history = split_legacy_history(h.get<std::string>());
        }
      } else if (h.is_array()) {
        for (const auto& t : h) {
          sample.history.push_back(turn_from_json(t));
        }
      } else {
        throw CorpusError("history must be an array of turns or a legacy string");
      }
      check_history_order(sample.history);
    } catch (const CorpusError& e) {
      throw CorpusError("record " + sample.id + ": " + e.what());
    }
  }

  if (j.contains("household_id") && !j.at("household_id").is_null()) {
    if (!j.at("household_id").is_string()) {
      throw CorpusError("record " + sample.id + ": household_id must be a string");
    }
    sample.household_id = j.at("household_id").get<std::string>();
  }
  if (j.contains("audio_ref") && !j.at("audio_ref").is_null()) {
    if (!j.at("audio_ref").is_string()) {
      throw CorpusError("record " + sample.id + ": audio_ref must be a string");
    }
    sample.audio_ref = j.at("audio_ref").get<std::string>();
  }

  static const std::vector<std::string> kKnown = {"id",      "type_id",      "text",     "label",
                                                  "history", "household_id", "audio_ref"};
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& k : kKnown) {
      if (k == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      sample.extra[key] = value;
    }
  }
  return sample;
}

std::string serialize_sample(const Sample& sample) {
  nlohmann::json j = sample.extra.is_object() ? sample.extra : nlohmann::json::object();
  j["id"] = sample.id;
  j["type_id"] = sample.type_id;
  j["text"] = sample.text;
  j["label"] = to_string(sample.label);
  if (!sample.history.empty()) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& turn : sample.history) {
      turns.push_back(turn_to_json(turn));
    }
    j["history"] = std::move(turns);
  }
  if (sample.household_id) {
    j["household_id"] = *sample.household_id;
  }
  if (sample.audio_ref) {
    j["audio_ref"] = *sample.audio_ref;
  }
  return j.dump();
}

LoadResult parse_corpus(std::istream& in, LoadMode mode) {
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    std::string record_id;
    try {
      Sample sample = parse_sample(line, mode);
      record_id = sample.id;
      if (mode == LoadMode::RawLog && sample.label != expected_label(sample.type_id)) {
        result.warnings.push_back(
            {line_no, sample.id,
             "label " + to_string(sample.label) + " disagrees with type " +
                 std::to_string(sample.type_id)});
      }
      result.samples.push_back(std::move(sample));
    } catch (const CorpusError& e) {
      result.errors.push_back({line_no, record_id, e.what()});
    }
  }
  return result;
}

LoadResult load_corpus(const std::string& path, LoadMode mode) {
  std::ifstream in(path);
  if (!in) {
    throw CorpusError("cannot read corpus file: " + path);
  }
  return parse_corpus(in, mode);
}

CorpusStats corpus_stats(const std::vector<Sample>& samples) {
  CorpusStats stats;
  for (const auto& sample : samples) {
    ++stats.per_type_count[sample.type_id];
  }
  stats.total = samples.size();
  return stats;
}

}  // namespace homegate::corpus
