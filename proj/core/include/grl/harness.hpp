#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grl/checkpoint.hpp"
#include "grl/evolution.hpp"
#include "grl/ppo.hpp"
#include "grl/terrain.hpp"

namespace grl {

/// Synthetic fitness oracle: replaces lifetime RL with a fixed bonus for
/// agents whose inherited gene has the designated form, plus a small
/// deterministic jitter. Exercises the full evolution loop without training.
struct FitnessOracle {
  bool enabled = false;
  std::string form = "a:01";  // designated form, to_string format
  double bonus = 1000.0;
  double jitter = 1.0;
};

struct RunConfig {
  EvolutionConfig evolution;
  PPOConfig ppo;
  EnvParams env;
  int hidden_width = 16;
  InitMethod init_method = InitMethod::kOrthogonal;
  double terrain_scale = 1.0;
  int workers = 0;  // 0 = hardware concurrency
  int checkpoint_every = 1;
  std::string output_dir = "runs/out";
  FitnessOracle oracle;
};

/// Desk-scale defaults (n_p=12, lt=20, hidden 16, t_end=500, 40 generations).
RunConfig default_run_config();

/// Full-scale profile (n_p=50, lt=50, hidden 48, t_end=3000); provided for
/// completeness, not exercised by the test suite.
RunConfig full_scale_run_config();

/// Range-checks every field. Throws std::invalid_argument.
void validate(const RunConfig& config);

/// Hash over everything that determines results: excludes generations,
/// workers, output_dir, and checkpoint_every so runs can be extended,
/// re-parallelized, or re-homed without invalidating their checkpoints.
std::uint64_t config_hash(const RunConfig& config);

std::string to_json_string(const RunConfig& config);
RunConfig run_config_from_json_string(const std::string& text);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

/// Raised when any agent's update produced a non-finite loss; the harness
/// writes a diagnostic checkpoint before throwing.
class NanAbortError : public std::runtime_error {
 public:
  NanAbortError(int generation, std::vector<int> agents, const std::string& msg)
      : std::runtime_error(msg), generation_(generation), agents_(std::move(agents)) {}

  int generation() const { return generation_; }
  const std::vector<int>& agents() const { return agents_; }

 private:
  int generation_;
  std::vector<int> agents_;
};

struct RunResult {
  int last_generation = -1;  // -1 when generations == 0
  std::string final_checkpoint;  // empty when generations == 0
};

/// The generation loop: initialize -> parallel lifetimes -> fitness ->
/// tournaments -> extract/replace + ancestor updates -> decay -> checkpoint.
/// Deterministic per (config, master_seed) regardless of worker count.
/// With resume=true, continues from the newest checkpoint in output_dir
/// (config hashes must match) after truncating logs past that generation.
RunResult run_evolution(const RunConfig& config, bool resume = false);

/// Newest checkpoint path in run_dir/checkpoints, or empty string.
std::string latest_checkpoint(const std::string& run_dir);
std::string checkpoint_path(const std::string& run_dir, int generation);

/// Every checkpoint of a run as (generation, path), sorted by generation.
std::vector<std::pair<int, std::string>> list_checkpoints(const std::string& run_dir);

struct ReplayReport {
  bool pass = true;
  int checkpoints_checked = 0;
  std::vector<std::string> failures;  // one line per offending gene/file
};

/// Recomputes every pool score from the event log (birth scores, ancestor
/// increments, decay) using the same arithmetic as the live run and compares
/// against each checkpoint within 1e-9.
ReplayReport replay_verify(const std::string& run_dir, int generation = -1);

/// Writes run_dir/export: rewards.csv, fitness.csv, pool_scores.csv,
/// form_trace.csv, events.jsonl. Deterministic and idempotent; missing
/// inputs produce headers-only files.
void export_metrics(const std::string& run_dir);

}  // namespace grl
