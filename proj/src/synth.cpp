#include "l4/synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "l4/drain.hpp"
#include "l4/error.hpp"

namespace l4::synth {

namespace fs = std::filesystem;

std::string_view to_string(FaultType type) {
  switch (type) {
    case FaultType::kNetwork: return "NETWORK";
    case FaultType::kAccelerator: return "ACCELERATOR";
    case FaultType::kNodeCrash: return "NODE_CRASH";
    case FaultType::kStorage: return "STORAGE";
    case FaultType::kConfig: return "CONFIG";
    case FaultType::kHang: return "HANG";
  }
  return "NETWORK";
}

FaultType parse_fault_type(std::string_view name) {
  for (auto t : {FaultType::kNetwork, FaultType::kAccelerator, FaultType::kNodeCrash,
                 FaultType::kStorage, FaultType::kConfig, FaultType::kHang}) {
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorCode::kInvalidSpec, fmt::format("unknown fault type '{}'", name));
}

bool is_hardware(FaultType type) {
  return type == FaultType::kNetwork || type == FaultType::kAccelerator ||
         type == FaultType::kNodeCrash || type == FaultType::kStorage;
}

void WorkloadSpec::validate() const {
  if (node_count < 4) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("node_count {} < 4", node_count));
  }
  if (iterations < 25) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("iterations {} < 25", iterations));
  }
  if (events_per_iteration < 7) {
    throw Error(ErrorCode::kInvalidSpec, "events_per_iteration must be at least 7");
  }
  if (noise.rare_event_probability < 0.0 || noise.rare_event_probability > 1.0 ||
      noise.index_error_probability < 0.0 || noise.index_error_probability > 1.0) {
    throw Error(ErrorCode::kInvalidSpec, "noise probabilities must lie in [0,1]");
  }
  if (stage_plan.data_shards == 0) throw Error(ErrorCode::kInvalidSpec, "data_shards must be >= 1");
}

void FaultInjection::validate(const WorkloadSpec& spec) const {
  if (target_nodes.empty()) throw Error(ErrorCode::kInvalidSpec, "fault has no target nodes");
  for (auto t : target_nodes) {
    if (t >= spec.node_count) {
      throw Error(ErrorCode::kInvalidSpec,
                  fmt::format("target node {} outside [0, {})", t, spec.node_count));
    }
  }
  if (onset_iteration >= spec.iterations) {
    throw Error(ErrorCode::kInvalidSpec,
                fmt::format("onset {} >= iterations {}", onset_iteration, spec.iterations));
  }
  if (type == FaultType::kNetwork && neighbor_count + target_nodes.size() >= spec.node_count) {
    throw Error(ErrorCode::kInvalidSpec, "network fault would touch every node");
  }
}

std::string node_name(std::size_t index, std::size_t node_count) {
  std::size_t width = 2;
  for (std::size_t n = node_count > 0 ? node_count - 1 : 0; n >= 100; n /= 10) ++width;
  return fmt::format("rank_{:0{}d}", index, width);
}

std::string expected_signature(std::string_view message) {
  static const Masker masker;
  const auto tokens = preprocess(message, masker);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

constexpr TimestampMs kJobStart = 1709287200000;  // 2024-03-01T10:00:00Z
constexpr TimestampMs kTrainStartOffset = 90'000;
constexpr TimestampMs kIterationPeriod = 2'500;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Healthy-run vocabulary. Benign ERROR lines are deliberate: they appear in
// successful runs too, so log level alone says little about a failure.
namespace msg {
std::string init_env(std::size_t n, std::size_t r) {
  return fmt::format("Initializing distributed environment, world_size={} rank={}", n, r);
}
std::string device(std::size_t r) {
  return fmt::format("Using device npu:{} on host node-{}", r % 8, r / 8);
}
std::string hccl_version(int mb) { return fmt::format("HCCL version 7.3.0 loaded, buffer size {} MB", mb); }
constexpr std::string_view kApexMissing =
    "Failed to import optional module apex_C, falling back to native kernels";
std::string numa(std::size_t r) { return fmt::format("NUMA binding not configured for device {}", r % 8); }
constexpr std::string_view kDeprecatedEnv =
    "env HCCL_WHITELIST_DISABLE is deprecated and will be ignored";
std::string rendezvous(int a, int b, int ms) {
  return fmt::format("Rendezvous with master 10.0.{}.{}:29500 completed in {} ms", a, b, ms);
}
std::string load_dataset(std::string_view name) {
  return fmt::format("Start loading dataset from /data/corpus/{}", name);
}
std::string shard_loaded(std::size_t s, int n) {
  return fmt::format("Loaded shard {} with {} samples into buffer", s, n);
}
std::string index_missing(std::size_t s) {
  return fmt::format("Index file for shard {} missing, rebuilding index", s);
}
std::string dataset_ready(long tokens, int len) {
  return fmt::format("Dataset ready: {} tokens, sequence length {}", tokens, len);
}
std::string build_model(int tp) {
  return fmt::format("Start building model gpt-13b with 40 layers, tensor parallel {}", tp);
}
std::string load_ckpt(int iter) { return fmt::format("Loading checkpoint from /mnt/ckpt/iter_{:07d}", iter); }
std::string ckpt_restored(int ms) { return fmt::format("Checkpoint state restored in {} ms", ms); }
constexpr std::string_view kModelParams = "Model parameters: 13.2 B, optimizer AdamW, zero stage 1";
std::string fusion_disabled(int n) {
  return fmt::format("Gradient accumulation fusion disabled for {} layers", n);
}
std::string start_loop(std::size_t iters) {
  return fmt::format("Start training loop, total iterations {}", iters);
}
std::string iteration_begin(std::size_t k, int batch) {
  return fmt::format("iteration {} begin, global batch size {}", k, batch);
}
std::string first_compile(int ms) {
  return fmt::format("First iteration triggers graph compilation, took {} ms", ms);
}
std::string fetched(int ms) { return fmt::format("Fetched micro batch from data loader in {} ms", ms); }
std::string forward(int ms) { return fmt::format("Forward pass finished in {} ms", ms); }
std::string loss(double lm, double aux) {
  return fmt::format("Loss computed: lm loss {:.4f}, aux loss {:.3f}", lm, aux);
}
std::string backward(int ms) { return fmt::format("Backward pass finished in {} ms", ms); }
std::string profiler_drop(int n) {
  return fmt::format("[profiler] failed to flush trace buffer, dropped {} events", n);
}
std::string allreduce(int mb, int ms) {
  return fmt::format("HCCL allreduce of {} MB gradients done in {} ms", mb, ms);
}
std::string pipeline_send(int ms) {
  return fmt::format("Pipeline send of activations to next stage done in {} ms", ms);
}
std::string optimizer(double lr, double norm) {
  return fmt::format("Optimizer update applied, learning rate {:.6f}, grad norm {:.3f}", lr, norm);
}
std::string throughput(double tps, double mfu) {
  return fmt::format("Throughput: {:.1f} tokens/s per device, MFU {:.2f}", tps, mfu);
}
std::string save_final(int iter) {
  return fmt::format("Saving final checkpoint to /mnt/ckpt/iter_{:07d}", iter);
}
std::string ckpt_saved(int ms) { return fmt::format("Checkpoint saved in {} ms", ms); }
constexpr std::string_view kFinished = "Training finished, shutting down workers";
constexpr std::string_view kDestroyed = "Process group destroyed, exit code 0";

// Fault vocabulary.
constexpr std::string_view kLinkDown = "NIC port link down";
constexpr std::string_view kCqe = "ROCE(,hccp_service.bin):error cqe status.";
std::string link_unstable(std::size_t rank, int n) {
  return fmt::format("HCCL link to rank_{} unstable, retransmit count {}", rank, n);
}
constexpr std::string_view kEcc = "double bit ecc error";
std::string aicore(int dev, int stream, int task) {
  return fmt::format("Aicore kernel execute failed, device_id={}, stream_id={}, task_id={}", dev,
                     stream, task);
}
std::string execute_timeout(std::size_t rank) {
  return fmt::format("HCCL execute timeout waiting for rank_{}, op allreduce", rank);
}
std::string connection_lost(std::size_t rank) {
  return fmt::format("Connection to rank_{} lost: peer closed socket", rank);
}
std::string shard_read_failed(int iter, std::size_t rank) {
  return fmt::format("Read checkpoint shard /mnt/ckpt/iter_{:07d}/mp_rank_{:02d}.pt failed: "
                     "Input/output error",
                     iter, rank);
}
constexpr std::string_view kLoadCkptFailed = "Failed to load checkpoint";
std::string barrier_exceeded(int s) { return fmt::format("Barrier wait for all ranks exceeded {} s", s); }
std::string ranktable_invalid(std::size_t rank) {
  return fmt::format("The ranktable or rank is invalid,Reason:[rank {} not found in ranktable].",
                     rank);
}
constexpr std::string_view kStreamMode = "Stream mode cannot be set in current driver version";
std::string notify_timeout(std::size_t rank) {
  return fmt::format("notify wait from rank_{} timeout", rank);
}
}  // namespace msg

// One-off benign events. A job draws most of them, each on one or two nodes,
// so within a job they are rare while across jobs they are routine.
constexpr std::size_t kRareVocabulary = 16;

std::string rare_event(std::size_t which, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(2, 90);
  switch (which) {
    case 0: return fmt::format("Detected stale lock file /tmp/hccl_{}.lock, removing it", small(rng));
    case 1: return "Kernel cache miss for operator MatMulV2, compiling from source";
    case 2: return fmt::format("Host clock drift of {} ms corrected by NTP", small(rng));
    case 3: return "Retrying DNS resolution for master address";
    case 4: return "CPU frequency governor switched to performance";
    case 5: return fmt::format("Slow read detected on /data/corpus/part-{:05d} took {} ms", small(rng), small(rng) * 40);
    case 6: return fmt::format("Plugin registry refreshed with {} entries", small(rng));
    case 7: return "Environment variable ASCEND_GLOBAL_LOG_LEVEL overridden by user";
    case 8: return fmt::format("Swap usage at {} percent on host", small(rng));
    case 9: return "Tokenizer vocabulary file cached locally";
    case 10: return fmt::format("Memory pool expanded by {} MB", small(rng) * 64);
    case 11: return "Deterministic algorithms disabled by configuration";
    case 12: return fmt::format("Watchdog heartbeat delayed by {} ms", small(rng) * 10);
    case 13: return "Falling back to gloo for CPU tensors";
    case 14: return fmt::format("Prefetch queue depth adjusted to {}", small(rng));
    default: return "Overlapping gradient reduction with backward enabled";
  }
}

struct Line {
  TimestampMs ts;
  Level level;
  std::string text;
};

class NodeLog {
 public:
  NodeLog(TimestampMs start, std::uint64_t seed) : clock_(start), rng_(seed) {}

  void emit(Level level, std::string text, int min_gap = 1, int max_gap = 40) {
    std::uniform_int_distribution<int> gap(min_gap, max_gap);
    clock_ += gap(rng_);
    lines_.push_back({clock_, level, std::move(text)});
  }
  void emit(Level level, std::string_view text, int min_gap = 1, int max_gap = 40) {
    emit(level, std::string(text), min_gap, max_gap);
  }
  void jump_to(TimestampMs t) { clock_ = std::max(clock_, t); }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  std::string text() const {
    std::string out;
    for (const auto& l : lines_) {
      out += format_timestamp(l.ts);
      out += ' ';
      out += to_string(l.level);
      out += ' ';
      out += l.text;
      out += '\n';
    }
    return out;
  }

 private:
  TimestampMs clock_;
  std::mt19937_64 rng_;
  std::vector<Line> lines_;
};

enum class Role { kHealthy, kTarget, kNeighbor };

struct JobPlan {
  std::vector<TimestampMs> node_offset;
  std::vector<std::size_t> benign_per_iteration;
  std::vector<bool> index_error;
  std::vector<std::size_t> index_error_shard;
  // Per node: (stage slot 0..2, rare vocabulary entry).
  std::vector<std::vector<std::pair<int, std::size_t>>> rare;
  std::string dataset;
  int checkpoint_iter = 0;
  int tensor_parallel = 8;
};

JobPlan plan_job(const WorkloadSpec& spec) {
  std::mt19937_64 rng(mix(spec.seed, 0xA11CE));
  JobPlan plan;
  const std::size_t n = spec.node_count;
  std::uniform_int_distribution<TimestampMs> offset(0, 400);
  std::uniform_int_distribution<std::size_t> benign(0, spec.noise.max_benign_errors_per_iteration);
  std::bernoulli_distribution index_err(spec.noise.index_error_probability);
  std::uniform_int_distribution<std::size_t> shard(0, spec.stage_plan.data_shards - 1);
  for (std::size_t r = 0; r < n; ++r) {
    plan.node_offset.push_back(offset(rng));
    plan.benign_per_iteration.push_back(benign(rng));
    plan.index_error.push_back(index_err(rng));
    plan.index_error_shard.push_back(shard(rng));
  }
  plan.rare.resize(n);
  std::bernoulli_distribution rare(spec.noise.rare_event_probability);
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  std::uniform_int_distribution<int> slot(0, 2);
  std::uniform_int_distribution<int> copies(1, 2);
  for (std::size_t v = 0; v < kRareVocabulary; ++v) {
    if (!rare(rng)) continue;
    const int s = slot(rng);
    for (int c = copies(rng); c > 0; --c) plan.rare[node(rng)].emplace_back(s, v);
  }
  plan.dataset = fmt::format("pile_dedup_{}", std::uniform_int_distribution<int>(1, 9)(rng));
  plan.checkpoint_iter = 400;
  plan.tensor_parallel = 8;
  return plan;
}

class JobRenderer {
 public:
  JobRenderer(const WorkloadSpec& spec, const std::optional<FaultInjection>& fault)
      : spec_(spec), fault_(fault), plan_(plan_job(spec)) {
    if (fault_) compute_roles();
  }

  RenderedJob render() {
    RenderedJob job;
    for (std::size_t r = 0; r < spec_.node_count; ++r) {
      job.files[node_name(r, spec_.node_count)] = render_node(r);
    }
    job.truth = truth();
    return job;
  }

 private:
  void compute_roles() {
    roles_.assign(spec_.node_count, Role::kHealthy);
    for (auto t : fault_->target_nodes) roles_[t] = Role::kTarget;
    if (fault_->type != FaultType::kNetwork) return;
    // Neighbors: ranks on the same 8-rank host group first, then the next
    // ranks in ring order.
    const std::size_t t = fault_->target_nodes.front();
    std::vector<std::size_t> order;
    const std::size_t group = t / 8;
    for (std::size_t r = group * 8; r < std::min(spec_.node_count, group * 8 + 8); ++r) {
      order.push_back(r);
    }
    for (std::size_t k = 1; k < spec_.node_count; ++k) order.push_back((t + k) % spec_.node_count);
    std::size_t added = 0;
    for (auto r : order) {
      if (added >= fault_->neighbor_count) break;
      if (roles_[r] != Role::kHealthy) continue;
      roles_[r] = Role::kNeighbor;
      ++added;
    }
  }

  std::size_t primary_target() const { return fault_->target_nodes.front(); }

  void emit_rare(NodeLog& log, std::size_t r, int slot) {
    for (const auto& [s, v] : plan_.rare[r]) {
      if (s == slot) log.emit(Level::kInfo, rare_event(v, log.rng()));
    }
  }

  // Returns false when the node stops logging inside this stage.
  bool env_init(NodeLog& log, std::size_t r) {
    log.emit(Level::kInfo, msg::init_env(spec_.node_count, r));
    log.emit(Level::kInfo, msg::device(r));
    log.emit(Level::kInfo, msg::hccl_version(log.uniform(100, 400)));
    log.emit(Level::kError, msg::kApexMissing);
    log.emit(Level::kWarning, msg::numa(r));
    log.emit(Level::kError, msg::kDeprecatedEnv);
    log.emit(Level::kInfo, msg::rendezvous(1, 2, log.uniform(20, 900)), 100, 2000);
    emit_rare(log, r, 0);
    if (fault_ && fault_->type == FaultType::kConfig) {
      if (roles_[r] == Role::kTarget) {
        log.emit(Level::kError, fault_->variant % 2 == 0 ? msg::ranktable_invalid(r)
                                                         : std::string(msg::kStreamMode));
      } else {
        log.emit(Level::kWarning, msg::barrier_exceeded(600), 5000, 9000);
      }
      return false;
    }
    return true;
  }

  bool data_load(NodeLog& log, std::size_t r) {
    log.emit(Level::kInfo, msg::load_dataset(plan_.dataset), 50, 300);
    for (std::size_t s = 0; s < spec_.stage_plan.data_shards; ++s) {
      log.emit(Level::kInfo, msg::shard_loaded(s, log.uniform(100000, 400000)), 200, 1500);
      if (plan_.index_error[r] && plan_.index_error_shard[r] == s) {
        log.emit(Level::kError, msg::index_missing(s));
      }
    }
    emit_rare(log, r, 1);
    log.emit(Level::kInfo, msg::dataset_ready(log.uniform(100000, 900000) * 1000L, 4096));
    return true;
  }

  bool model_init(NodeLog& log, std::size_t r) {
    log.emit(Level::kInfo, msg::build_model(plan_.tensor_parallel), 50, 300);
    log.emit(Level::kInfo, std::string(msg::kModelParams), 500, 3000);
    log.emit(Level::kWarning, msg::fusion_disabled(log.uniform(2, 12)));
    if (spec_.stage_plan.resume_from_checkpoint) {
      log.emit(Level::kInfo, msg::load_ckpt(plan_.checkpoint_iter));
      if (fault_ && fault_->type == FaultType::kStorage) {
        if (roles_[r] == Role::kTarget) {
          log.emit(Level::kError, msg::shard_read_failed(plan_.checkpoint_iter, r), 500, 3000);
          log.emit(Level::kError, msg::kLoadCkptFailed);
        } else {
          log.emit(Level::kWarning, msg::barrier_exceeded(600), 5000, 9000);
        }
        return false;
      }
      log.emit(Level::kInfo, msg::ckpt_restored(log.uniform(2000, 9000)), 2000, 9000);
    }
    emit_rare(log, r, 2);
    return true;
  }

  // Emits one iteration; returns false when the node stops inside it.
  bool iteration(NodeLog& log, std::size_t r, std::size_t k) {
    const bool onset = fault_ && fault_->onset_iteration == k &&
                       fault_->type != FaultType::kStorage && fault_->type != FaultType::kConfig;
    const Role role = fault_ ? roles_[r] : Role::kHealthy;
    const FaultType type = fault_ ? fault_->type : FaultType::kNetwork;
    const TimestampMs start = kJobStart + kTrainStartOffset +
                              static_cast<TimestampMs>(k) * kIterationPeriod +
                              plan_.node_offset[r] / 10;
    log.jump_to(start);
    log.emit(Level::kInfo, msg::iteration_begin(k, 512), 1, 5);
    if (k == 0) log.emit(Level::kInfo, msg::first_compile(log.uniform(8000, 15000)), 5, 20);
    log.emit(Level::kInfo, msg::fetched(log.uniform(2, 30)), 5, 30);
    if (onset && type == FaultType::kAccelerator && role == Role::kTarget) {
      log.emit(Level::kError, msg::kEcc, 50, 200);
      log.emit(Level::kError, msg::aicore(static_cast<int>(r % 8), log.uniform(1, 64), log.uniform(1, 9999)));
      return false;
    }
    log.emit(Level::kInfo, msg::forward(log.uniform(380, 460)), 380, 460);
    if (onset && type == FaultType::kNodeCrash && role == Role::kTarget) return false;
    log.emit(Level::kInfo, msg::loss(log.uniform(1.8, 2.6), log.uniform(0.005, 0.02)), 2, 10);
    log.emit(Level::kInfo, msg::backward(log.uniform(750, 850)), 750, 850);
    for (std::size_t e = 0; e < plan_.benign_per_iteration[r]; ++e) {
      log.emit(Level::kError, msg::profiler_drop(log.uniform(1, 500)), 1, 5);
    }
    if (onset) {
      const std::size_t t = primary_target();
      switch (type) {
        case FaultType::kNetwork:
          if (role == Role::kTarget) {
            log.emit(Level::kError, msg::kLinkDown, 20, 80);
            for (int i = 0; i < 3; ++i) log.emit(Level::kError, msg::kCqe, 100, 300);
          } else if (role == Role::kNeighbor) {
            for (int i = 0; i < 2; ++i) {
              log.emit(Level::kWarning, msg::link_unstable(t, log.uniform(3, 16)), 100, 300);
            }
            log.emit(Level::kError, msg::kCqe, 100, 300);
          }
          return false;
        case FaultType::kAccelerator:
          for (int i = 0; i < 2; ++i) log.emit(Level::kError, msg::execute_timeout(t), 300, 900);
          return false;
        case FaultType::kNodeCrash:
          log.emit(Level::kError, msg::connection_lost(t), 100, 400);
          return false;
        case FaultType::kHang:
          if (role != Role::kTarget) log.emit(Level::kError, msg::notify_timeout(t), 300, 900);
          return false;
        default:
          break;
      }
    }
    log.emit(Level::kInfo, msg::allreduce(512, log.uniform(100, 170)), 100, 170);
    for (std::size_t e = 7; e < spec_.events_per_iteration; ++e) {
      log.emit(Level::kInfo, msg::pipeline_send(log.uniform(5, 40)), 5, 40);
    }
    log.emit(Level::kInfo, msg::optimizer(1e-4, log.uniform(0.8, 1.6)), 5, 20);
    if (k % 5 == 4) {
      log.emit(Level::kInfo, msg::throughput(log.uniform(2900.0, 3300.0), log.uniform(0.40, 0.46)), 1, 5);
    }
    return true;
  }

  std::string render_node(std::size_t r) {
    NodeLog log(kJobStart + plan_.node_offset[r], mix(spec_.seed, r + 1));
    const bool done = [&] {
      if (!env_init(log, r)) return false;
      if (!data_load(log, r)) return false;
      if (!model_init(log, r)) return false;
      log.jump_to(kJobStart + kTrainStartOffset - 1000);
      log.emit(Level::kInfo, msg::start_loop(spec_.iterations), 1, 200);
      for (std::size_t k = 0; k < spec_.iterations; ++k) {
        if (!iteration(log, r, k)) return false;
      }
      return true;
    }();
    if (done && !fault_) {
      if (spec_.stage_plan.final_checkpoint) {
        log.emit(Level::kInfo, msg::save_final(plan_.checkpoint_iter + static_cast<int>(spec_.iterations)), 100, 400);
        log.emit(Level::kInfo, msg::ckpt_saved(log.uniform(4000, 9000)), 4000, 9000);
      }
      log.emit(Level::kInfo, msg::kFinished, 10, 100);
      log.emit(Level::kInfo, msg::kDestroyed, 10, 100);
    }
    return log.text();
  }

  GroundTruth truth() const {
    GroundTruth t;
    if (!fault_) return t;
    const std::size_t n = spec_.node_count;
    const std::size_t target = primary_target();
    t.fault_type = std::string(to_string(fault_->type));
    for (auto tn : fault_->target_nodes) t.faulty_nodes.push_back(node_name(tn, n));
    std::sort(t.faulty_nodes.begin(), t.faulty_nodes.end());
    std::set<std::string> sigs;
    std::set<std::string> affected;
    const auto all_but_targets = [&] {
      for (std::size_t r = 0; r < n; ++r) {
        if (roles_[r] != Role::kTarget) affected.insert(node_name(r, n));
      }
    };
    switch (fault_->type) {
      case FaultType::kNetwork:
        sigs.insert(expected_signature(msg::kLinkDown));
        sigs.insert(expected_signature(msg::kCqe));
        sigs.insert(expected_signature(msg::link_unstable(target, 3)));
        for (std::size_t r = 0; r < n; ++r) {
          if (roles_[r] != Role::kHealthy) affected.insert(node_name(r, n));
        }
        t.failing_stage = Stage::kIterTrain;
        t.faulty_iteration = fault_->onset_iteration;
        break;
      case FaultType::kAccelerator:
        sigs.insert(expected_signature(msg::kEcc));
        sigs.insert(expected_signature(msg::aicore(1, 2, 3)));
        sigs.insert(expected_signature(msg::execute_timeout(target)));
        for (auto tn : fault_->target_nodes) affected.insert(node_name(tn, n));
        all_but_targets();
        t.failing_stage = Stage::kIterTrain;
        t.faulty_iteration = fault_->onset_iteration;
        break;
      case FaultType::kNodeCrash:
        sigs.insert(expected_signature(msg::connection_lost(target)));
        all_but_targets();
        t.failing_stage = Stage::kIterTrain;
        t.faulty_iteration = fault_->onset_iteration;
        break;
      case FaultType::kStorage:
        sigs.insert(expected_signature(msg::shard_read_failed(plan_.checkpoint_iter, target)));
        sigs.insert(expected_signature(msg::kLoadCkptFailed));
        sigs.insert(expected_signature(msg::barrier_exceeded(600)));
        for (std::size_t r = 0; r < n; ++r) affected.insert(node_name(r, n));
        t.failing_stage = Stage::kModelInit;
        break;
      case FaultType::kConfig:
        sigs.insert(expected_signature(fault_->variant % 2 == 0 ? msg::ranktable_invalid(target)
                                                                : std::string(msg::kStreamMode)));
        sigs.insert(expected_signature(msg::barrier_exceeded(600)));
        for (std::size_t r = 0; r < n; ++r) affected.insert(node_name(r, n));
        t.failing_stage = Stage::kEnvInit;
        break;
      case FaultType::kHang:
        sigs.insert(expected_signature(msg::notify_timeout(target)));
        all_but_targets();
        t.failing_stage = Stage::kIterTrain;
        t.faulty_iteration = fault_->onset_iteration;
        break;
    }
    t.failure_indicating_signatures.assign(sigs.begin(), sigs.end());
    t.affected_nodes.assign(affected.begin(), affected.end());
    return t;
  }

  const WorkloadSpec& spec_;
  const std::optional<FaultInjection>& fault_;
  JobPlan plan_;
  std::vector<Role> roles_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
}

void write_logs(const RenderedJob& job, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  }
  for (const auto& [node, text] : job.files) write_text(out_dir / (node + ".log"), text);
}

}  // namespace

RenderedJob render_job(const WorkloadSpec& spec, const std::optional<FaultInjection>& injection) {
  spec.validate();
  if (injection) injection->validate(spec);
  return JobRenderer(spec, injection).render();
}

GroundTruth generate(const WorkloadSpec& spec, const FaultInjection& injection,
                     const fs::path& out_dir) {
  const auto job = render_job(spec, injection);
  write_logs(job, out_dir);
  write_text(out_dir / "truth.json", job.truth.to_json());
  return job.truth;
}

void generate_success(const WorkloadSpec& spec, const fs::path& out_dir) {
  write_logs(render_job(spec, std::nullopt), out_dir);
}

std::string GroundTruth::to_json() const {
  nlohmann::json j;
  j["fault_type"] = fault_type;
  j["faulty_nodes"] = faulty_nodes;
  j["failure_indicating_signatures"] = failure_indicating_signatures;
  j["faulty_iteration"] = faulty_iteration ? nlohmann::json(*faulty_iteration) : nlohmann::json();
  j["failing_stage"] =
      failing_stage ? nlohmann::json(std::string(to_string(*failing_stage))) : nlohmann::json();
  j["affected_nodes"] = affected_nodes;
  return j.dump(2) + "\n";
}

GroundTruth GroundTruth::from_json(std::string_view text) {
  GroundTruth t;
  try {
    const auto j = nlohmann::json::parse(text);
    t.fault_type = j.at("fault_type").get<std::string>();
    t.faulty_nodes = j.at("faulty_nodes").get<std::vector<std::string>>();
    t.failure_indicating_signatures =
        j.at("failure_indicating_signatures").get<std::vector<std::string>>();
    if (!j.at("faulty_iteration").is_null()) {
      t.faulty_iteration = j.at("faulty_iteration").get<std::size_t>();
    }
    if (!j.at("failing_stage").is_null()) {
      t.failing_stage = parse_stage(j.at("failing_stage").get<std::string>());
    }
    if (j.contains("affected_nodes")) {
      t.affected_nodes = j.at("affected_nodes").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidationError, fmt::format("malformed truth.json: {}", e.what()));
  }
  return t;
}

GroundTruth GroundTruth::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

YAML::Node load_yaml(const fs::path& path) {
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("{}: {}", path.string(), e.what()));
  }
}

template <typename T>
void read_opt(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) out = node[key].as<T>();
}

}  // namespace

WorkloadSpec load_workload_spec(const fs::path& path) {
  const auto y = load_yaml(path);
  WorkloadSpec s;
  try {
    read_opt(y, "node_count", s.node_count);
    read_opt(y, "iterations", s.iterations);
    read_opt(y, "events_per_iteration", s.events_per_iteration);
    read_opt(y, "seed", s.seed);
    if (const auto p = y["stage_plan"]) {
      read_opt(p, "data_shards", s.stage_plan.data_shards);
      read_opt(p, "resume_from_checkpoint", s.stage_plan.resume_from_checkpoint);
      read_opt(p, "final_checkpoint", s.stage_plan.final_checkpoint);
    }
    if (const auto n = y["noise"]) {
      read_opt(n, "rare_event_probability", s.noise.rare_event_probability);
      read_opt(n, "max_benign_errors_per_iteration", s.noise.max_benign_errors_per_iteration);
      read_opt(n, "index_error_probability", s.noise.index_error_probability);
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("{}: {}", path.string(), e.what()));
  }
  s.validate();
  return s;
}

FaultInjection load_fault_injection(const fs::path& path) {
  const auto y = load_yaml(path);
  FaultInjection f;
  try {
    f.type = parse_fault_type(y["fault_type"].as<std::string>());
    f.target_nodes = y["target_nodes"].as<std::vector<std::size_t>>();
    read_opt(y, "onset_iteration", f.onset_iteration);
    read_opt(y, "neighbor_count", f.neighbor_count);
    read_opt(y, "variant", f.variant);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidSpec, fmt::format("{}: {}", path.string(), e.what()));
  }
  return f;
}

std::string to_yaml(const WorkloadSpec& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "node_count" << YAML::Value << s.node_count;
  out << YAML::Key << "iterations" << YAML::Value << s.iterations;
  out << YAML::Key << "events_per_iteration" << YAML::Value << s.events_per_iteration;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "stage_plan" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "data_shards" << YAML::Value << s.stage_plan.data_shards;
  out << YAML::Key << "resume_from_checkpoint" << YAML::Value << s.stage_plan.resume_from_checkpoint;
  out << YAML::Key << "final_checkpoint" << YAML::Value << s.stage_plan.final_checkpoint;
  out << YAML::EndMap;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rare_event_probability" << YAML::Value << s.noise.rare_event_probability;
  out << YAML::Key << "max_benign_errors_per_iteration" << YAML::Value
      << s.noise.max_benign_errors_per_iteration;
  out << YAML::Key << "index_error_probability" << YAML::Value << s.noise.index_error_probability;
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string to_yaml(const FaultInjection& f) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "fault_type" << YAML::Value << std::string(to_string(f.type));
  out << YAML::Key << "target_nodes" << YAML::Value << YAML::Flow << f.target_nodes;
  out << YAML::Key << "onset_iteration" << YAML::Value << f.onset_iteration;
  out << YAML::Key << "neighbor_count" << YAML::Value << f.neighbor_count;
  out << YAML::Key << "variant" << YAML::Value << f.variant;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::string> dialect_samples() {
  std::mt19937_64 rng(7);
  std::vector<std::string> out = {
      msg::init_env(16, 3), msg::device(11), msg::hccl_version(200),
      std::string(msg::kApexMissing), msg::numa(3), std::string(msg::kDeprecatedEnv),
      msg::rendezvous(1, 2, 40), msg::load_dataset("pile_dedup_3"), msg::shard_loaded(1, 123456),
      msg::index_missing(2), msg::dataset_ready(123456000L, 4096), msg::build_model(8),
      msg::load_ckpt(400), msg::ckpt_restored(4000), std::string(msg::kModelParams),
      msg::fusion_disabled(4), msg::start_loop(40), msg::iteration_begin(3, 512),
      msg::first_compile(9000), msg::fetched(12), msg::forward(410), msg::loss(2.1, 0.01),
      msg::backward(800), msg::profiler_drop(23), msg::allreduce(512, 133),
      msg::pipeline_send(12), msg::optimizer(1e-4, 1.2), msg::throughput(3100.5, 0.43),
      msg::save_final(440), msg::ckpt_saved(5000), std::string(msg::kFinished),
      std::string(msg::kDestroyed), std::string(msg::kLinkDown), std::string(msg::kCqe),
      msg::link_unstable(5, 7), std::string(msg::kEcc), msg::aicore(3, 12, 77),
      msg::execute_timeout(5), msg::connection_lost(5), msg::shard_read_failed(400, 3),
      std::string(msg::kLoadCkptFailed), msg::barrier_exceeded(600), msg::ranktable_invalid(17),
      std::string(msg::kStreamMode), msg::notify_timeout(5),
  };
  for (std::size_t v = 0; v < kRareVocabulary; ++v) out.push_back(rare_event(v, rng));
  return out;
}

CorpusCase make_case(std::uint64_t seed, std::size_t history_jobs) {
  static constexpr FaultType kTypes[] = {FaultType::kNetwork, FaultType::kAccelerator,
                                         FaultType::kNodeCrash, FaultType::kStorage,
                                         FaultType::kConfig, FaultType::kHang};
  static constexpr std::size_t kNodeCounts[] = {16, 24, 32, 48, 64};
  std::mt19937_64 rng(mix(seed, 0xC0FFEE));
  CorpusCase c;
  c.name = fmt::format("case_{:03d}", seed);
  c.spec.seed = seed;
  c.spec.node_count = kNodeCounts[std::uniform_int_distribution<std::size_t>(0, 4)(rng)];
  c.spec.iterations = std::uniform_int_distribution<std::size_t>(40, 60)(rng);
  c.injection.type = kTypes[seed % 6];
  c.injection.onset_iteration =
      std::uniform_int_distribution<std::size_t>(25, c.spec.iterations - 3)(rng);
  std::uniform_int_distribution<std::size_t> node(0, c.spec.node_count - 1);
  c.injection.target_nodes = {node(rng)};
  if (c.injection.type == FaultType::kStorage && std::bernoulli_distribution(0.3)(rng)) {
    std::size_t second = node(rng);
    while (second == c.injection.target_nodes.front()) second = node(rng);
    c.injection.target_nodes.push_back(second);
  }
  c.injection.variant = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  for (std::size_t h = 0; h < history_jobs; ++h) {
    WorkloadSpec hs = c.spec;
    hs.seed = mix(seed, 1000 + h);
    c.history.push_back(hs);
  }
  return c;
}

void write_case(const CorpusCase& c, const fs::path& root) {
  const fs::path dir = root / c.name;
  generate(c.spec, c.injection, dir / "failed");
  for (std::size_t h = 0; h < c.history.size(); ++h) {
    generate_success(c.history[h], dir / fmt::format("history_{}", h));
  }
}

}  // namespace l4::synth
