#include "l4/fault_library.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "l4/error.hpp"

namespace l4 {

namespace {

constexpr FaultCategory kCategories[] = {
    FaultCategory::kNetwork,    FaultCategory::kAccelerator,     FaultCategory::kNode,
    FaultCategory::kStorage,    FaultCategory::kConfig,          FaultCategory::kProgramBug,
    FaultCategory::kIncompatibility, FaultCategory::kMisoperation, FaultCategory::kFramework,
    FaultCategory::kPlatform,
};

}  // namespace

std::string_view to_string(FaultCategory category) {
  switch (category) {
    case FaultCategory::kNetwork: return "NETWORK";
    case FaultCategory::kAccelerator: return "ACCELERATOR";
    case FaultCategory::kNode: return "NODE";
    case FaultCategory::kStorage: return "STORAGE";
    case FaultCategory::kConfig: return "CONFIG";
    case FaultCategory::kProgramBug: return "PROGRAM_BUG";
    case FaultCategory::kIncompatibility: return "INCOMPATIBILITY";
    case FaultCategory::kMisoperation: return "MISOPERATION";
    case FaultCategory::kFramework: return "FRAMEWORK";
    case FaultCategory::kPlatform: return "PLATFORM";
  }
  return "NETWORK";
}

FaultCategory parse_fault_category(std::string_view name) {
  for (auto c : kCategories) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::kValidationError, fmt::format("unknown fault category '{}'", name));
}

std::string_view to_string(MatchMode mode) { return mode == MatchMode::kAll ? "ALL" : "ANY"; }

MatchMode parse_match_mode(std::string_view name) {
  if (name == "ALL") return MatchMode::kAll;
  if (name == "ANY") return MatchMode::kAny;
  throw Error(ErrorCode::kValidationError, fmt::format("unknown match mode '{}'", name));
}

void FaultPattern::validate() const {
  if (pattern_id.empty()) throw Error(ErrorCode::kValidationError, "pattern_id is empty");
  if (signature_events.empty()) {
    throw Error(ErrorCode::kValidationError,
                fmt::format("pattern '{}' has no signature events", pattern_id));
  }
}

void FaultLibrary::add(FaultPattern pattern) {
  pattern.validate();
  const bool taken = std::any_of(patterns_.begin(), patterns_.end(), [&](const FaultPattern& p) {
    return p.pattern_id == pattern.pattern_id;
  });
  if (taken) {
    throw Error(ErrorCode::kDuplicateId,
                fmt::format("pattern id '{}' already in library", pattern.pattern_id));
  }
  patterns_.push_back(std::move(pattern));
}

std::string FaultLibrary::to_yaml() const {
  YAML::Emitter out;
  for (const auto& p : patterns_) {
    out << YAML::BeginDoc << YAML::BeginMap;
    out << YAML::Key << "pattern_id" << YAML::Value << p.pattern_id;
    out << YAML::Key << "name" << YAML::Value << p.name;
    out << YAML::Key << "category" << YAML::Value << std::string(to_string(p.category));
    out << YAML::Key << "match_mode" << YAML::Value << std::string(to_string(p.match_mode));
    out << YAML::Key << "signature_events" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : p.signature_events) out << s.source();
    out << YAML::EndSeq;
    out << YAML::Key << "root_cause" << YAML::Value << p.root_cause;
    out << YAML::Key << "remediation" << YAML::Value << p.remediation;
    out << YAML::EndMap;
  }
  std::string text = out.c_str();
  if (!text.empty() && text.back() != '\n') text += '\n';
  return text;
}

FaultLibrary FaultLibrary::from_yaml(std::string_view text) {
  FaultLibrary lib;
  std::vector<YAML::Node> docs;
  try {
    docs = YAML::LoadAll(std::string(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kValidationError, fmt::format("malformed fault library: {}", e.what()));
  }
  for (const auto& doc : docs) {
    if (doc.IsNull()) continue;
    try {
      FaultPattern p;
      p.pattern_id = doc["pattern_id"].as<std::string>();
      p.name = doc["name"] ? doc["name"].as<std::string>() : std::string{};
      p.category = parse_fault_category(doc["category"].as<std::string>());
      p.match_mode = doc["match_mode"] ? parse_match_mode(doc["match_mode"].as<std::string>())
                                       : MatchMode::kAny;
      if (doc["signature_events"]) {
        for (const auto& s : doc["signature_events"]) {
          p.signature_events.emplace_back(s.as<std::string>());
        }
      }
      p.root_cause = doc["root_cause"] ? doc["root_cause"].as<std::string>() : std::string{};
      p.remediation = doc["remediation"] ? doc["remediation"].as<std::string>() : std::string{};
      lib.add(std::move(p));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kValidationError, fmt::format("malformed fault pattern: {}", e.what()));
    }
  }
  return lib;
}

FaultLibrary FaultLibrary::load(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_yaml(ss.str());
}

void FaultLibrary::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", tmp.string()));
    out << to_yaml();
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot move {} into place: {}", tmp.string(), ec.message()));
  }
}

FaultLibrary add_pattern(const std::filesystem::path& path, FaultPattern pattern) {
  auto lib = FaultLibrary::load(path);
  lib.add(std::move(pattern));
  lib.save(path);
  return lib;
}

std::vector<MatchResult> match(const ParsedBundle& bundle, const FaultLibrary& library) {
  std::vector<bool> present(bundle.signatures.size(), false);
  for (const auto& [_, records] : bundle.nodes) {
    for (const auto& rec : records) present[rec.event_id] = true;
  }
  std::vector<MatchResult> results;
  for (const auto& pattern : library.patterns()) {
    MatchResult r;
    r.pattern_id = pattern.pattern_id;
    std::size_t hit_patterns = 0;
    for (const auto& sig : pattern.signature_events) {
      std::vector<bool> fires(bundle.signatures.size(), false);
      bool any = false;
      for (std::size_t id = 0; id < bundle.signatures.size(); ++id) {
        if (!present[id] || !sig.matches(bundle.signatures[id])) continue;
        fires[id] = true;
        any = true;
        const auto& s = bundle.signatures[id];
        if (std::find(r.matched_signatures.begin(), r.matched_signatures.end(), s) ==
            r.matched_signatures.end()) {
          r.matched_signatures.push_back(s);
        }
      }
      if (!any) continue;
      ++hit_patterns;
      for (const auto& [node_id, records] : bundle.nodes) {
        for (std::size_t i = 0; i < records.size(); ++i) {
          if (fires[records[i].event_id]) {
            r.matched_events.push_back(make_ref(node_id, records, i));
            break;
          }
        }
      }
    }
    if (hit_patterns == 0) continue;
    if (pattern.match_mode == MatchMode::kAll && hit_patterns != pattern.signature_events.size()) {
      continue;
    }
    r.confidence = static_cast<double>(hit_patterns) /
                   static_cast<double>(pattern.signature_events.size());
    results.push_back(std::move(r));
  }
  std::sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.pattern_id < b.pattern_id;
  });
  return results;
}

}  // namespace l4
