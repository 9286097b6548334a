#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace l4 {

// Milliseconds since the Unix epoch, UTC.
using TimestampMs = std::int64_t;

enum class Level { kDebug, kInfo, kWarning, kError, kUnknown };

std::string_view to_string(Level level);
// Recognizes the usual spellings (WARN, ERR, FATAL, ...). Anything else maps
// to kUnknown.
Level parse_level(std::string_view token);

struct RawLogRecord {
  std::string node_id;
  TimestampMs timestamp = 0;
  Level level = Level::kUnknown;
  std::string message;
  std::size_t source_line = 0;  // 1-based, within its file
};

struct JobBundle {
  std::string job_id;
  std::map<std::string, std::vector<RawLogRecord>> nodes;
  std::map<std::string, std::string> metadata;

  std::size_t record_count() const;
};

enum class Layout { kAuto, kFilePerNode, kDirPerNode };

Layout parse_layout(std::string_view name);

struct LayoutSpec {
  Layout layout = Layout::kAuto;
  std::string extension = ".log";
};

// Header grammar used to split a line into (timestamp, level, message).
class HeaderFormat {
 public:
  enum class Kind { kIsoFirst, kBracketed, kFrameworkPrefixed, kRegex };

  // "iso" (default), "bracketed", "framework", or a regex containing the
  // named groups (?<ts>...), (?<msg>...) and optionally (?<level>...).
  static HeaderFormat from_name(std::string_view name_or_regex);

  HeaderFormat() = default;
  Kind kind() const noexcept { return kind_; }

  struct Fields {
    TimestampMs timestamp = 0;
    Level level = Level::kUnknown;
    std::string message;
  };

  // Throws Error(kHeaderMismatch) when the line does not fit the grammar.
  Fields parse(std::string_view line) const;

 private:
  Kind kind_ = Kind::kIsoFirst;
  std::regex regex_;
  int ts_group_ = -1;
  int level_group_ = -1;
  int msg_group_ = -1;
};

// Parses "YYYY-MM-DD[T ]HH:MM:SS[.,fff][Z|+HH:MM]" from the start of `text`.
// Returns the instant and the number of characters consumed.
std::optional<std::pair<TimestampMs, std::size_t>> parse_timestamp(
    std::string_view text);

std::string format_timestamp(TimestampMs ts);

HeaderFormat::Fields parse_record_header(std::string_view line,
                                         const HeaderFormat& format);

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

// Reads one node's log text. Lines that fail header parsing keep their own
// record with level kUnknown and the preceding record's timestamp (epoch when
// first). Blank lines are skipped. The result is sorted by timestamp with
// file order preserved among equal timestamps.
std::vector<RawLogRecord> read_node_stream(std::string_view node_id,
                                           std::string_view text,
                                           const HeaderFormat& format);

JobBundle read_job_bundle(const std::filesystem::path& root,
                          const LayoutSpec& layout = {},
                          const HeaderFormat& format = {},
                          std::size_t jobs = 1);

}  // namespace l4
