#include "l4/drain.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "l4/error.hpp"

namespace l4 {

namespace {

bool is_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::size_t scan_number(std::string_view s, std::size_t i) {
  if (i > 0 && is_alnum(s[i - 1])) return 0;
  std::size_t j = i;
  if ((s[j] == '-' || s[j] == '+') && j + 1 < s.size() && is_digit(s[j + 1])) ++j;
  if (!is_digit(s[j])) return 0;
  while (j < s.size() && is_digit(s[j])) ++j;
  while (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
    ++j;
    while (j < s.size() && is_digit(s[j])) ++j;
  }
  if (j + 1 < s.size() && (s[j] == 'e' || s[j] == 'E')) {
    std::size_t k = j + 1;
    if (k < s.size() && (s[k] == '-' || s[k] == '+')) ++k;
    if (k < s.size() && is_digit(s[k])) {
      while (k < s.size() && is_digit(s[k])) ++k;
      j = k;
    }
  }
  if (j < s.size() && is_alnum(s[j])) return 0;
  return j - i;
}

std::size_t scan_hex(std::string_view s, std::size_t i) {
  if (i > 0 && is_alnum(s[i - 1])) return 0;
  if (i + 2 >= s.size() || s[i] != '0' || (s[i + 1] != 'x' && s[i + 1] != 'X') ||
      !is_hex(s[i + 2])) {
    return 0;
  }
  std::size_t j = i + 2;
  while (j < s.size() && is_hex(s[j])) ++j;
  if (j < s.size() && is_alnum(s[j])) return 0;
  return j - i;
}

std::size_t scan_ipv4(std::string_view s, std::size_t i) {
  if (i > 0 && (is_alnum(s[i - 1]) || s[i - 1] == '.')) return 0;
  std::size_t j = i;
  for (int part = 0; part < 4; ++part) {
    if (part > 0) {
      if (j >= s.size() || s[j] != '.') return 0;
      ++j;
    }
    std::size_t digits = 0;
    while (j < s.size() && is_digit(s[j]) && digits < 3) {
      ++j;
      ++digits;
    }
    if (digits == 0) return 0;
  }
  if (j + 1 < s.size() && s[j] == ':' && is_digit(s[j + 1])) {
    ++j;
    while (j < s.size() && is_digit(s[j])) ++j;
  }
  if (j < s.size() && (is_alnum(s[j]) || (s[j] == '.' && j + 1 < s.size() && is_digit(s[j + 1])))) {
    return 0;
  }
  return j - i;
}

std::size_t scan_path(std::string_view s, std::size_t i) {
  if (s[i] != '/' || i + 1 >= s.size()) return 0;
  if (i > 0) {
    const char p = s[i - 1];
    if (!(is_space(p) || p == '=' || p == ':' || p == '\'' || p == '"' || p == '(' ||
          p == ',' || p == '[')) {
      return 0;
    }
  }
  const char first = s[i + 1];
  if (!(is_alnum(first) || first == '_' || first == '.' || first == '-')) return 0;
  std::size_t j = i + 1;
  while (j < s.size() && !is_space(s[j]) && s[j] != '\'' && s[j] != '"' && s[j] != ',' &&
         s[j] != ';' && s[j] != ')' && s[j] != ']') {
    ++j;
  }
  while (j > i + 1 && (s[j - 1] == '.' || s[j - 1] == ':')) --j;
  return j - i;
}

template <typename Scanner>
std::string scan_replace(std::string_view s, const std::string& placeholder, Scanner scan) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t len = scan(s, i);
    if (len > 0) {
      out += placeholder;
      i += len;
    } else {
      out += s[i];
      ++i;
    }
  }
  return out;
}

}  // namespace

std::vector<MaskRule> default_masks() {
  return {{"@path", std::string(kWildcard)},
          {"@ipv4", std::string(kWildcard)},
          {"@hex", std::string(kWildcard)},
          {"@number", std::string(kWildcard)}};
}

Masker::Masker() : Masker(default_masks()) {}

Masker::Masker(std::vector<MaskRule> rules) : rules_(std::move(rules)) {
  for (const auto& rule : rules_) {
    Compiled c;
    c.placeholder = rule.placeholder;
    if (rule.pattern == "@path") c.builtin = Builtin::kPath;
    else if (rule.pattern == "@ipv4") c.builtin = Builtin::kIpv4;
    else if (rule.pattern == "@hex") c.builtin = Builtin::kHex;
    else if (rule.pattern == "@number") c.builtin = Builtin::kNumber;
    else {
      try {
        c.regex = std::make_shared<const std::regex>(rule.pattern, std::regex::ECMAScript |
                                                                       std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("bad mask pattern '{}': {}", rule.pattern, e.what()));
      }
    }
    compiled_.push_back(std::move(c));
  }
}

Masker Masker::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open mask file {}", path.string()));
  std::vector<MaskRule> rules;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      rules.push_back({line, std::string(kWildcard)});
    } else {
      rules.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
  }
  return Masker(std::move(rules));
}

std::string Masker::apply(std::string_view message) const {
  std::string current(message);
  for (const auto& c : compiled_) {
    switch (c.builtin) {
      case Builtin::kPath: current = scan_replace(current, c.placeholder, scan_path); break;
      case Builtin::kIpv4: current = scan_replace(current, c.placeholder, scan_ipv4); break;
      case Builtin::kHex: current = scan_replace(current, c.placeholder, scan_hex); break;
      case Builtin::kNumber: current = scan_replace(current, c.placeholder, scan_number); break;
      case Builtin::kNone: current = std::regex_replace(current, *c.regex, c.placeholder); break;
    }
  }
  return current;
}

std::vector<std::string> preprocess(std::string_view message, const Masker& masker) {
  const std::string masked = masker.apply(message);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < masked.size()) {
    while (i < masked.size() && is_space(masked[i])) ++i;
    const std::size_t start = i;
    while (i < masked.size() && !is_space(masked[i])) ++i;
    if (i > start) tokens.emplace_back(masked, start, i - start);
  }
  return tokens;
}

double similarity(const std::vector<std::string>& tokens,
                  const std::vector<std::string>& template_tokens) {
  if (tokens.size() != template_tokens.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} tokens vs {} template tokens", tokens.size(),
                            template_tokens.size()));
  }
  if (tokens.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (template_tokens[i] == kWildcard || template_tokens[i] == tokens[i]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(tokens.size());
}

std::string LogTemplate::signature() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::size_t LogTemplate::wildcard_count() const {
  return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), kWildcard));
}

void DrainConfig::validate() const {
  if (depth < 2) throw Error(ErrorCode::kInvalidArgument, "drain depth must be >= 2");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "drain similarity threshold must be in (0,1]");
  }
  if (max_children < 2) throw Error(ErrorCode::kInvalidArgument, "max_children must be >= 2");
}

struct ParseTree::Node {
  std::unordered_map<std::string, std::unique_ptr<Node>> children;
  std::vector<EventId> leaf;
};

ParseTree::ParseTree(DrainConfig config, Masker masker)
    : config_(config), masker_(std::move(masker)) {
  config_.validate();
}
ParseTree::~ParseTree() = default;
ParseTree::ParseTree(ParseTree&&) noexcept = default;
ParseTree& ParseTree::operator=(ParseTree&&) noexcept = default;

std::size_t ParseTree::max_search_depth() const {
  std::size_t deepest = 0;
  auto walk = [&](auto&& self, const Node& node, std::size_t level) -> void {
    deepest = std::max(deepest, level);
    for (const auto& [_, child] : node.children) self(self, *child, level + 1);
  };
  for (const auto& [_, node] : by_length_) walk(walk, *node, 1);
  return deepest;
}

ParseTree::Node& ParseTree::leaf_for(const std::vector<std::string>& tokens) {
  auto& slot = by_length_[tokens.size()];
  if (!slot) slot = std::make_unique<Node>();
  Node* node = slot.get();
  const std::size_t layers = std::min(config_.depth - 2, tokens.size());
  const std::string wildcard(kWildcard);
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string& token = tokens[i];
    const bool variable = std::any_of(token.begin(), token.end(), is_digit);
    const std::string& key = variable ? wildcard : token;
    auto it = node->children.find(key);
    if (it == node->children.end()) {
      const std::string& route =
          node->children.size() + 1 < config_.max_children ? key : wildcard;
      auto& child = node->children[route];
      if (!child) child = std::make_unique<Node>();
      node = child.get();
    } else {
      node = it->second.get();
    }
  }
  return *node;
}

std::vector<std::string> extract_parameters(const std::vector<std::string>& tokens,
                                            const std::vector<std::string>& template_tokens) {
  std::vector<std::string> params;
  for (std::size_t i = 0; i < template_tokens.size() && i < tokens.size(); ++i) {
    if (template_tokens[i] == kWildcard) params.push_back(tokens[i]);
  }
  return params;
}

ParseResult ParseTree::parse_line(std::string_view message) {
  return parse_tokens(preprocess(message, masker_));
}

ParseResult ParseTree::parse_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot parse an empty message");
  Node& leaf = leaf_for(tokens);
  EventId best = 0;
  double best_sim = -1.0;
  for (EventId id : leaf.leaf) {
    const double sim = similarity(tokens, templates_[id].tokens);
    if (sim > best_sim) {
      best_sim = sim;
      best = id;
    }
  }
  if (best_sim >= config_.similarity_threshold) {
    auto& tmpl = templates_[best];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tmpl.tokens[i] != tokens[i]) tmpl.tokens[i] = std::string(kWildcard);
    }
    ++tmpl.occurrence_count;
    return {best, extract_parameters(tokens, tmpl.tokens)};
  }
  const auto id = static_cast<EventId>(templates_.size());
  templates_.push_back({id, tokens, 1});
  leaf.leaf.push_back(id);
  return {id, extract_parameters(tokens, tokens)};
}

std::size_t ParsedBundle::record_count() const {
  std::size_t n = 0;
  for (const auto& [_, records] : nodes) n += records.size();
  return n;
}

ParsedBundle parse_bundle(const JobBundle& bundle, const DrainConfig& config,
                          const Masker& masker) {
  ParseTree tree(config, masker);
  ParsedBundle out;
  out.job_id = bundle.job_id;
  out.metadata = bundle.metadata;
  std::vector<std::vector<std::string>> token_cache;
  token_cache.reserve(bundle.record_count());
  for (const auto& [node_id, records] : bundle.nodes) {
    auto& parsed = out.nodes[node_id];
    parsed.reserve(records.size());
    for (const auto& rec : records) {
      auto tokens = preprocess(rec.message, tree.masker());
      if (tokens.empty()) continue;
      ParsedRecord p;
      static_cast<RawLogRecord&>(p) = rec;
      p.event_id = tree.parse_tokens(tokens).event_id;
      parsed.push_back(std::move(p));
      token_cache.push_back(std::move(tokens));
    }
  }
  out.templates = tree.templates();
  out.signatures.reserve(out.templates.size());
  for (const auto& t : out.templates) out.signatures.push_back(t.signature());
  std::size_t k = 0;
  for (auto& [_, records] : out.nodes) {
    for (auto& rec : records) {
      rec.parameters = extract_parameters(token_cache[k++], out.templates[rec.event_id].tokens);
    }
  }
  return out;
}

void write_json_lines(const ParsedBundle& bundle, std::ostream& out) {
  for (const auto& [node_id, records] : bundle.nodes) {
    for (const auto& rec : records) {
      nlohmann::json j = {{"node", node_id},
                          {"ts", format_timestamp(rec.timestamp)},
                          {"level", to_string(rec.level)},
                          {"event_id", rec.event_id},
                          {"template", bundle.signature(rec.event_id)},
                          {"params", rec.parameters}};
      out << j.dump() << '\n';
    }
  }
}

}  // namespace l4
