#include "l4/cross_job_filter.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "l4/error.hpp"

namespace l4 {

double NormalEventPool::presence(const std::string& signature) const {
  if (total_jobs == 0) return 0.0;
  const auto it = signatures.find(signature);
  if (it == signatures.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_jobs);
}

bool NormalEventPool::is_frequent(const std::string& signature, double presence_fraction) const {
  const auto it = signatures.find(signature);
  if (it == signatures.end() || total_jobs == 0) return false;
  // count / total >= fraction, evaluated without dividing.
  return static_cast<double>(it->second) >=
         presence_fraction * static_cast<double>(total_jobs) - 1e-12;
}

void NormalEventPool::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["total_jobs"] = total_jobs;
  j["signatures"] = signatures;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

NormalEventPool NormalEventPool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  NormalEventPool pool;
  try {
    const auto j = nlohmann::json::parse(in);
    pool.total_jobs = j.at("total_jobs").get<std::size_t>();
    pool.signatures = j.at("signatures").get<std::map<std::string, std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidationError,
                fmt::format("malformed pool file {}: {}", path.string(), e.what()));
  }
  if (pool.total_jobs == 0) {
    throw Error(ErrorCode::kValidationError, "pool file has total_jobs = 0");
  }
  for (const auto& [sig, count] : pool.signatures) {
    if (count < 1 || count > pool.total_jobs) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("presence count {} of '{}' outside [1, {}]", count, sig,
                              pool.total_jobs));
    }
  }
  return pool;
}

NormalEventPool build_pool(const std::vector<ParsedBundle>& successful) {
  if (successful.empty()) {
    throw Error(ErrorCode::kEmptyHistory, "no successful jobs to build the normal pool from");
  }
  NormalEventPool pool;
  pool.total_jobs = successful.size();
  for (const auto& job : successful) {
    std::set<std::string> seen;
    for (const auto& [_, records] : job.nodes) {
      for (const auto& rec : records) seen.insert(job.signature(rec.event_id));
    }
    for (const auto& sig : seen) ++pool.signatures[sig];
  }
  return pool;
}

ParsedBundle filter(const ParsedBundle& failed, const NormalEventPool& pool,
                    double presence_fraction, FilterStats* stats) {
  if (!(presence_fraction > 0.0 && presence_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "presence fraction must be in (0,1]");
  }
  std::vector<bool> drop(failed.templates.size(), false);
  for (std::size_t id = 0; id < failed.signatures.size(); ++id) {
    drop[id] = pool.is_frequent(failed.signatures[id], presence_fraction);
  }
  ParsedBundle out;
  out.job_id = failed.job_id;
  out.metadata = failed.metadata;
  out.templates = failed.templates;
  out.signatures = failed.signatures;
  for (const auto& [node_id, records] : failed.nodes) {
    auto& kept = out.nodes[node_id];
    for (const auto& rec : records) {
      if (!drop[rec.event_id]) kept.push_back(rec);
    }
  }
  if (stats) {
    stats->records_in = failed.record_count();
    stats->records_out = out.record_count();
    stats->applied = true;
  }
  return out;
}

}  // namespace l4
