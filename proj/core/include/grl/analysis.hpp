#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "grl/checkpoint.hpp"
#include "grl/event_log.hpp"
#include "grl/evolution.hpp"
#include "grl/ppo.hpp"
#include "grl/terrain.hpp"

namespace grl {

/// (r_ji - w_i) / (r_ii - w_i): how much training on j helps on i, anchored
/// between "untrained midpoint" (0) and "trained on i itself" (1).
/// Throws when r_ii == w_i.
double knowledge_transfer_rate(double r_ji, double r_ii, double w_i);

struct TransferMatrix {
  std::vector<ObstacleKind> kinds;  // row/column order
  Eigen::MatrixXd rates;            // rows: trained on, cols: evaluated on
  Eigen::VectorXd anchors_w;        // w_i per evaluated-on kind
  Eigen::VectorXd anchors_r;        // R_ii per kind
};

struct TransferConfig {
  int seeds = 5;          // agents trained per source obstacle
  int episodes = 20;      // training episodes per agent
  int eval_episodes = 5;  // mean-action evaluations per target obstacle
  PPOConfig ppo;
  EnvParams env;
  int hidden_width = 16;
  InitMethod init_method = InitMethod::kOrthogonal;
  double terrain_scale = 1.0;
  std::uint64_t master_seed = 1;
};

/// Trains fresh agents on every obstacle and cross-evaluates them on every
/// obstacle. w_i is the mean training reward at the midpoint episode of the
/// agents trained on i; R entries are mean rewards over eval_episodes
/// procedurally distinct instances. Diagonal entries are exactly 1 whenever
/// defined (NaN when R_ii == w_i).
TransferMatrix compute_transfer_matrix(const TransferConfig& config);

void write_transfer_csv(const TransferMatrix& matrix, std::ostream& out);

struct InstinctReport {
  std::vector<std::pair<int, double>> trajectory;  // (step, x), every k steps
  double forward_distance = 0.0;
  double control_cost = 0.0;
  int steps = 0;
};

/// Mean-action rollout with zero parameter updates; the genome is untouched.
/// Runs until the environment reports done or `steps` steps elapse,
/// sampling position every k steps (step 0 included). Requires steps >= k.
InstinctReport instinct_probe(const AgentGenome& genome, TerrainEnv& env,
                              int steps, int k);

struct ConvergenceTrace {
  std::vector<int> generations;
  std::vector<LearngeneForm> forms;
  std::vector<std::vector<double>> probability;  // [generation][form]
};

/// Form-probability distribution of each checkpointed pool, in generation
/// order. Throws on an empty checkpoint list.
ConvergenceTrace form_probability_trace(
    const std::vector<CheckpointState>& checkpoints);

void write_trace_csv(const ConvergenceTrace& trace, std::ostream& out);

struct HeatmapRow {
  int generation = 0;
  LearngeneForm form;
  double mean_change = 0.0;  // mean Manhattan parameter change per carrier
  int carriers = 0;
};

/// Per-form per-generation mean Manhattan change between a gene's payload at
/// birth and the same layers inside each carrier's genome at generation end.
/// Pure function of the event log.
std::vector<HeatmapRow> parameter_change_heatmap(const std::vector<Event>& events);

void write_heatmap_csv(const std::vector<HeatmapRow>& rows, std::ostream& out);

struct BootstrapCi {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap over the sample mean. Deterministic per seed;
/// low <= mean <= high always. Throws when fewer than 2 values.
BootstrapCi bootstrap_ci(const std::vector<double>& values, double confidence,
                         int resamples, std::uint64_t seed);

enum class BaselineKind { kScratch, kLearngene, kPretrain };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kScratch;
  ObstacleKind task = ObstacleKind::kStep;
  int episodes = 20;   // training episodes on the target task
  int pretrain_i = 1;  // pretraining lifetimes (kPretrain only)
  int lt = 20;         // episodes per pretraining lifetime
  std::uint64_t seed = 1;
  PPOConfig ppo;
  EnvParams env;
  int hidden_width = 16;
  InitMethod init_method = InitMethod::kOrthogonal;
  double terrain_scale = 1.0;
  int probe_interval = 50;
  const GenePool* pool = nullptr;  // final pool, required for kLearngene
};

struct BaselineResult {
  std::vector<EpisodeRecord> curve;  // target-task training episodes
  InstinctReport newborn;            // probe before any target-task update
  GeneId gene = 0;                   // transplanted gene id (kLearngene)
  bool nan_flag = false;
};

/// Scratch: train a fresh agent. Learngene: transplant a score-sampled gene
/// of the pool's highest-probability form, then train. Pretrain: train
/// pretrain_i * lt episodes on the combined obstacle track first, then train
/// on the target. For a fixed seed all three see the same target terrain,
/// base initialization, and action-noise stream, so curves pair cleanly.
BaselineResult run_baseline(const BaselineConfig& config);

}  // namespace grl
