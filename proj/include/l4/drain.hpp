#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "l4/log_model.hpp"

namespace l4 {

inline constexpr std::string_view kWildcard = "<*>";

using EventId = std::uint32_t;

// One masking rule. `pattern` is either an ECMAScript regex or one of the
// built-in scanners "@path", "@ipv4", "@hex", "@number".
struct MaskRule {
  std::string pattern;
  std::string placeholder{kWildcard};
};

// Applies mask rules in order. The built-in scanners treat a span as a
// variable only when it is not glued to letters or digits, so `rank_3`
// becomes `rank_<*>` while `fp16` is kept.
class Masker {
 public:
  Masker();  // default rules: @path, @ipv4, @hex, @number
  explicit Masker(std::vector<MaskRule> rules);

  // One rule per line: "<pattern>" or "<pattern><TAB><placeholder>".
  // Blank lines and lines starting with '#' are ignored.
  static Masker from_file(const std::filesystem::path& path);

  std::string apply(std::string_view message) const;
  const std::vector<MaskRule>& rules() const noexcept { return rules_; }

 private:
  enum class Builtin { kNone, kPath, kIpv4, kHex, kNumber };
  struct Compiled {
    Builtin builtin = Builtin::kNone;
    std::shared_ptr<const std::regex> regex;
    std::string placeholder;
  };
  std::vector<MaskRule> rules_;
  std::vector<Compiled> compiled_;
};

std::vector<MaskRule> default_masks();

// Masks `message` and splits the result on whitespace.
std::vector<std::string> preprocess(std::string_view message, const Masker& masker);

// Fraction of positions where the tokens agree; a wildcard in the template
// matches anything. Throws Error(kLengthMismatch) for unequal lengths.
double similarity(const std::vector<std::string>& tokens,
                  const std::vector<std::string>& template_tokens);

struct LogTemplate {
  EventId event_id = 0;
  std::vector<std::string> tokens;
  std::size_t occurrence_count = 0;

  // Tokens joined by single spaces; stable across parser instances.
  std::string signature() const;
  std::size_t wildcard_count() const;
};

struct DrainConfig {
  std::size_t depth = 4;  // includes the root and the token-count layer
  double similarity_threshold = 0.4;
  std::size_t max_children = 100;

  void validate() const;
};

struct ParseResult {
  EventId event_id = 0;
  std::vector<std::string> parameters;
};

// Fixed-depth prefix tree over token count and leading tokens. Single
// writer: one instance per stream being parsed.
class ParseTree {
 public:
  explicit ParseTree(DrainConfig config = {}, Masker masker = {});
  ~ParseTree();
  ParseTree(ParseTree&&) noexcept;
  ParseTree& operator=(ParseTree&&) noexcept;

  // Messages that mask to zero tokens are the caller's responsibility.
  ParseResult parse_line(std::string_view message);
  ParseResult parse_tokens(const std::vector<std::string>& tokens);

  const std::vector<LogTemplate>& templates() const noexcept { return templates_; }
  const DrainConfig& config() const noexcept { return config_; }
  const Masker& masker() const noexcept { return masker_; }

  // Maximum number of internal levels visited below the root for any message.
  std::size_t max_search_depth() const;

 private:
  struct Node;
  Node& leaf_for(const std::vector<std::string>& tokens);

  DrainConfig config_;
  Masker masker_;
  std::unordered_map<std::size_t, std::unique_ptr<Node>> by_length_;
  std::vector<LogTemplate> templates_;
};

// Parameters are the tokens at the template's wildcard slots.
std::vector<std::string> extract_parameters(const std::vector<std::string>& tokens,
                                            const std::vector<std::string>& template_tokens);

struct ParsedRecord : RawLogRecord {
  EventId event_id = 0;
  std::vector<std::string> parameters;
};

struct ParsedBundle {
  std::string job_id;
  std::map<std::string, std::string> metadata;
  std::vector<LogTemplate> templates;    // indexed by event id
  std::vector<std::string> signatures;   // indexed by event id
  std::map<std::string, std::vector<ParsedRecord>> nodes;

  const std::string& signature(EventId id) const { return signatures.at(id); }
  std::size_t record_count() const;
};

// Parses every node of a job with a single parser so event ids are
// consistent across nodes. Parameters are extracted against the final
// templates, so they always line up with the templates' wildcard slots.
// Records whose message masks to nothing are dropped.
ParsedBundle parse_bundle(const JobBundle& bundle, const DrainConfig& config = {},
                          const Masker& masker = {});

// One JSON object per line: {node, ts, level, event_id, template, params}.
void write_json_lines(const ParsedBundle& bundle, std::ostream& out);

// Points at one record of a parsed bundle.
struct RecordRef {
  std::string node_id;
  std::size_t record_index = 0;  // position in the node's parsed stream
  std::size_t source_line = 0;
  TimestampMs timestamp = 0;

  friend bool operator==(const RecordRef&, const RecordRef&) = default;
};

inline RecordRef make_ref(const std::string& node_id, const std::vector<ParsedRecord>& records,
                          std::size_t index) {
  return {node_id, index, records[index].source_line, records[index].timestamp};
}

}  // namespace l4
