#include "l4/log_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "l4/error.hpp"
#include "l4/parallel.hpp"

namespace l4 {

namespace fs = std::filesystem;

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kDebug: return "DEBUG";
    case Level::kInfo: return "INFO";
    case Level::kWarning: return "WARNING";
    case Level::kError: return "ERROR";
    case Level::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

Level parse_level(std::string_view token) {
  std::string upper(token);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "DEBUG") return Level::kDebug;
  if (upper == "INFO") return Level::kInfo;
  if (upper == "WARNING" || upper == "WARN") return Level::kWarning;
  if (upper == "ERROR" || upper == "ERR" || upper == "FATAL" || upper == "CRITICAL")
    return Level::kError;
  return Level::kUnknown;
}

std::size_t JobBundle::record_count() const {
  std::size_t n = 0;
  for (const auto& [_, records] : nodes) n += records.size();
  return n;
}

Layout parse_layout(std::string_view name) {
  if (name == "auto") return Layout::kAuto;
  if (name == "file-per-node") return Layout::kFilePerNode;
  if (name == "dir-per-node") return Layout::kDirPerNode;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown layout '{}'", name));
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

std::string_view trim_left(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::string_view trim(std::string_view s) {
  s = trim_left(s);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits the first whitespace-delimited token off `s`.
std::pair<std::string_view, std::string_view> split_token(std::string_view s) {
  s = trim_left(s);
  std::size_t end = 0;
  while (end < s.size() && s[end] != ' ' && s[end] != '\t') ++end;
  return {s.substr(0, end), trim_left(s.substr(end))};
}

// "LEVEL rest" -> level + rest; an unrecognized token stays in the message.
HeaderFormat::Fields level_and_message(TimestampMs ts, std::string_view rest) {
  HeaderFormat::Fields f;
  f.timestamp = ts;
  rest = trim_left(rest);
  auto [token, tail] = split_token(rest);
  std::string_view stripped = token;
  if (stripped.size() >= 2 && stripped.front() == '[' && stripped.back() == ']') {
    stripped = stripped.substr(1, stripped.size() - 2);
  }
  if (!stripped.empty() && stripped.back() == ':') stripped.remove_suffix(1);
  f.level = parse_level(stripped);
  f.message = std::string(f.level == Level::kUnknown ? rest : tail);
  return f;
}

std::string strip_named_groups(std::string_view pattern, int& ts, int& level, int& msg) {
  std::string out;
  int group = 0;
  bool escaped = false;
  bool in_class = false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (escaped) {
      out += c;
      escaped = false;
      continue;
    }
    if (c == '\\') {
      out += c;
      escaped = true;
      continue;
    }
    if (in_class) {
      if (c == ']') in_class = false;
      out += c;
      continue;
    }
    if (c == '[') {
      in_class = true;
      out += c;
      continue;
    }
    if (c == '(') {
      if (i + 2 < pattern.size() && pattern[i + 1] == '?' && pattern[i + 2] == '<' &&
          i + 3 < pattern.size() && pattern[i + 3] != '=' && pattern[i + 3] != '!') {
        const std::size_t close = pattern.find('>', i + 3);
        if (close == std::string_view::npos) {
          throw Error(ErrorCode::kInvalidArgument, "unterminated named group in header regex");
        }
        const std::string_view name = pattern.substr(i + 3, close - i - 3);
        ++group;
        if (name == "ts") ts = group;
        else if (name == "level") level = group;
        else if (name == "msg") msg = group;
        else throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown header group '{}'", name));
        out += '(';
        i = close;
        continue;
      }
      if (i + 1 >= pattern.size() || pattern[i + 1] != '?') ++group;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::optional<std::pair<TimestampMs, std::size_t>> parse_timestamp(std::string_view s) {
  int year, month, day, hour, minute, second;
  if (!read_digits(s, 0, 4, year) || s.size() < 19 || s[4] != '-' ||
      !read_digits(s, 5, 2, month) || s[7] != '-' || !read_digits(s, 8, 2, day) ||
      (s[10] != 'T' && s[10] != ' ') || !read_digits(s, 11, 2, hour) || s[13] != ':' ||
      !read_digits(s, 14, 2, minute) || s[16] != ':' || !read_digits(s, 17, 2, second)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int d = digits; d < 3; ++d) millis *= 10;
  }
  std::int64_t offset_minutes = 0;
  if (pos < s.size() && s[pos] == 'Z') {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh, om;
    if (read_digits(s, pos + 1, 2, oh) && pos + 3 < s.size() && s[pos + 3] == ':' &&
        read_digits(s, pos + 4, 2, om)) {
      offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
      pos += 6;
    }
  }
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                            static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second -
                            offset_minutes * 60;
  return std::pair{secs * 1000 + millis, pos};
}

std::string format_timestamp(TimestampMs ts) {
  std::int64_t days = ts / 86400000;
  std::int64_t rem = ts % 86400000;
  if (rem < 0) {
    rem += 86400000;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  const std::int64_t secs = rem / 1000;
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}", y, m, d,
                     secs / 3600, (secs / 60) % 60, secs % 60, rem % 1000);
}

HeaderFormat HeaderFormat::from_name(std::string_view name) {
  HeaderFormat f;
  if (name.empty() || name == "iso") {
    f.kind_ = Kind::kIsoFirst;
  } else if (name == "bracketed") {
    f.kind_ = Kind::kBracketed;
  } else if (name == "framework") {
    f.kind_ = Kind::kFrameworkPrefixed;
  } else {
    f.kind_ = Kind::kRegex;
    const std::string stripped =
        strip_named_groups(name, f.ts_group_, f.level_group_, f.msg_group_);
    if (f.ts_group_ < 0 || f.msg_group_ < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "header regex needs named groups (?<ts>...) and (?<msg>...)");
    }
    try {
      f.regex_ = std::regex(stripped, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("bad header regex: {}", e.what()));
    }
  }
  return f;
}

HeaderFormat::Fields HeaderFormat::parse(std::string_view line) const {
  auto mismatch = [&] {
    return Error(ErrorCode::kHeaderMismatch,
                 fmt::format("cannot parse header of '{}'", line.substr(0, 80)));
  };
  switch (kind_) {
    case Kind::kIsoFirst: {
      const auto ts = parse_timestamp(line);
      if (!ts) throw mismatch();
      return level_and_message(ts->first, line.substr(ts->second));
    }
    case Kind::kBracketed: {
      // [ts] [LEVEL] message
      if (line.empty() || line.front() != '[') throw mismatch();
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw mismatch();
      const auto ts = parse_timestamp(line.substr(1, close - 1));
      if (!ts || ts->second != close - 1) throw mismatch();
      return level_and_message(ts->first, line.substr(close + 1));
    }
    case Kind::kFrameworkPrefixed: {
      // [component] ts LEVEL message
      if (line.empty() || line.front() != '[') throw mismatch();
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw mismatch();
      const std::string_view rest = trim_left(line.substr(close + 1));
      const auto ts = parse_timestamp(rest);
      if (!ts) throw mismatch();
      return level_and_message(ts->first, rest.substr(ts->second));
    }
    case Kind::kRegex: {
      std::match_results<std::string_view::const_iterator> m;
      if (!std::regex_search(line.begin(), line.end(), m, regex_)) throw mismatch();
      const auto ts = parse_timestamp(trim(std::string_view(
          &*m[ts_group_].first, static_cast<std::size_t>(m[ts_group_].length()))));
      if (m[ts_group_].length() == 0 || !ts) throw mismatch();
      Fields f;
      f.timestamp = ts->first;
      f.message = m[msg_group_].str();
      if (level_group_ > 0 && m[level_group_].matched) {
        f.level = parse_level(m[level_group_].str());
      }
      return f;
    }
  }
  throw mismatch();
}

HeaderFormat::Fields parse_record_header(std::string_view line, const HeaderFormat& format) {
  return format.parse(line);
}

std::string sanitize_utf8(std::string_view in) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    const auto c = static_cast<unsigned char>(in[i]);
    std::size_t len = 0;
    std::uint32_t min_cp = 0;
    if (c < 0x80) {
      out += static_cast<char>(c);
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      min_cp = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      min_cp = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      min_cp = 0x10000;
    }
    bool valid = len != 0 && i + len <= in.size();
    std::uint32_t cp = valid ? (c & (0xFF >> (len + 1))) : 0;
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(in[i + k]);
      if ((cc & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (valid && (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) valid = false;
    if (valid) {
      out.append(in.substr(i, len));
      i += len;
    } else {
      out += kReplacement;
      ++i;
    }
  }
  return out;
}

std::vector<RawLogRecord> read_node_stream(std::string_view node_id, std::string_view text,
                                           const HeaderFormat& format) {
  std::vector<RawLogRecord> records;
  const std::string clean = sanitize_utf8(text);
  std::string_view rest = clean;
  std::size_t line_no = 0;
  TimestampMs last_ts = 0;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    RawLogRecord rec;
    rec.node_id = std::string(node_id);
    rec.source_line = line_no;
    try {
      auto fields = format.parse(line);
      rec.timestamp = fields.timestamp;
      rec.level = fields.level;
      rec.message = std::move(fields.message);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kHeaderMismatch) throw;
      rec.timestamp = last_ts;
      rec.level = Level::kUnknown;
      rec.message = std::string(trim(line));
    }
    last_ts = rec.timestamp;
    records.push_back(std::move(rec));
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const RawLogRecord& a, const RawLogRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return records;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoError, fmt::format("cannot read {}", path.string()));
  return std::move(ss).str();
}

std::vector<fs::path> log_files_in(const fs::path& dir, const std::string& extension) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct NodeSource {
  std::string node_id;
  std::vector<fs::path> files;
};

}  // namespace

JobBundle read_job_bundle(const fs::path& root, const LayoutSpec& layout,
                          const HeaderFormat& format, std::size_t jobs) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::kIoError, fmt::format("{} is not a readable directory", root.string()));
  }
  std::vector<NodeSource> sources;
  Layout mode = layout.layout;
  if (mode == Layout::kAuto) {
    mode = log_files_in(root, layout.extension).empty() ? Layout::kDirPerNode
                                                         : Layout::kFilePerNode;
  }
  if (mode == Layout::kFilePerNode) {
    for (auto& file : log_files_in(root, layout.extension)) {
      sources.push_back({file.stem().string(), {file}});
    }
  } else {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (auto& dir : dirs) {
      auto files = log_files_in(dir, layout.extension);
      if (!files.empty()) sources.push_back({dir.filename().string(), std::move(files)});
    }
  }
  if (sources.empty()) {
    throw Error(ErrorCode::kEmptyBundle, fmt::format("no log files under {}", root.string()));
  }

  std::vector<std::vector<RawLogRecord>> streams(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) {
    auto& out = streams[i];
    for (const auto& file : sources[i].files) {
      auto part = read_node_stream(sources[i].node_id, read_file(file), format);
      out.insert(out.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
    }
    if (sources[i].files.size() > 1) {
      std::stable_sort(out.begin(), out.end(), [](const RawLogRecord& a, const RawLogRecord& b) {
        return a.timestamp < b.timestamp;
      });
    }
  });

  JobBundle bundle;
  bundle.job_id = fs::absolute(root).lexically_normal().filename().string();
  if (bundle.job_id.empty()) bundle.job_id = fs::absolute(root).parent_path().filename().string();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto [it, inserted] = bundle.nodes.emplace(sources[i].node_id, std::move(streams[i]));
    if (!inserted) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("duplicate node id '{}' in {}", sources[i].node_id, root.string()));
    }
  }
  bundle.metadata["node_count"] = std::to_string(bundle.nodes.size());
  return bundle;
}

}  // namespace l4
