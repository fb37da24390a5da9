#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace homegate::corpus {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label { Accept, Reject };

// Canonical lowercase on write, case-insensitive on read.
std::string to_string(Label label);
std::optional<Label> label_from_string(std::string_view s);

enum class Speaker { User, Assistant };

std::string to_string(Speaker speaker);
std::optional<Speaker> speaker_from_string(std::string_view s);

struct DialogueTurn {
  Speaker speaker = Speaker::User;
  std::string text;
  std::optional<std::int64_t> timestamp;  // seconds since epoch, UTC
};

struct UtteranceType {
  int type_id = 0;
  std::string name;
  Label expected_label = Label::Reject;
  std::string description_zh;
  std::string description_en;
};

// The fixed 12-type utterance taxonomy, ordered by type_id.
const std::vector<UtteranceType>& taxonomy();

// Number of taxonomy types (type ids 0..11).
inline constexpr int kTypeCount = 12;

// The fixed type -> gold label mapping; throws CorpusError outside [0,11].
Label expected_label(int type_id);

struct Sample {
  std::string id;
  int type_id = 0;
  std::string text;
  Label label = Label::Reject;
  std::vector<DialogueTurn> history;
  std::optional<std::string> household_id;
  std::optional<std::string> audio_ref;
  // Unknown top-level fields, preserved verbatim on round trip.
  nlohmann::json extra = nlohmann::json::object();
};

struct CorpusStats {
  std::map<int, std::size_t> per_type_count;
  std::size_t total = 0;
};

enum class LoadMode { Benchmark, RawLog };

// Splits the legacy inline "user~~~~~assistant~~~~~..." history notation
// into alternating turns starting with the user. Throws on a segment that
// is empty after trimming.
std::vector<DialogueTurn> split_legacy_history(std::string_view s);

// Inverse of split_legacy_history; byte-exact on round trip.
std::string join_legacy_history(const std::vector<DialogueTurn>& turns);

// Parses one corpus line (one JSON object). In Benchmark mode a label that
// disagrees with the type's expected label is an error; RawLog accepts it.
Sample parse_sample(std::string_view line, LoadMode mode = LoadMode::Benchmark);

std::string serialize_sample(const Sample& sample);

struct RecordError {
  std::size_t line_no = 0;  // 1-based
  std::string id;           // record id when one could be extracted
  std::string message;
};

struct LoadResult {
  std::vector<Sample> samples;
  std::vector<RecordError> errors;
  std::vector<RecordError> warnings;  // RawLog label mismatches
};

// Reads a line-delimited corpus file; never aborts mid-file. Throws
// CorpusError only when the file itself cannot be read.
LoadResult load_corpus(const std::string& path, LoadMode mode = LoadMode::Benchmark);
LoadResult parse_corpus(std::istream& in, LoadMode mode = LoadMode::Benchmark);

CorpusStats corpus_stats(const std::vector<Sample>& samples);

}  // namespace homegate::corpus
