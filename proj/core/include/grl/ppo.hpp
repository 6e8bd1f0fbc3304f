#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "grl/network.hpp"
#include "grl/rng.hpp"
#include "grl/terrain.hpp"

namespace grl {

/// One step of a rollout. `done` marks true termination (the episode ended in
/// a terminal state); a step-cap truncation leaves done=false and the caller
/// supplies a bootstrap value instead.
struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct PPOConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double lr = 3e-4;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Bookkeeping for one lifetime episode.
struct EpisodeRecord {
  int episode_index = 0;
  double reward = 0.0;           // r_e: sum of step rewards
  double forward_distance = 0.0; // final x, meters
  double control_cost = 0.0;     // sum of per-step action penalties
  int steps = 0;
};

/// r_t = gamma_w * v_target - delta_w * |action|^2.
double step_reward(double v_target, const Eigen::VectorXd& action,
                   double gamma_w, double delta_w);

double episode_reward(const std::vector<double>& step_rewards);

/// Diagonal Gaussian with global log-std.
double gaussian_log_prob(const Eigen::VectorXd& action,
                         const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);
double gaussian_entropy(const Eigen::VectorXd& log_std);

struct GaeResult {
  Eigen::VectorXd advantages_raw;  // before batch normalization
  Eigen::VectorXd advantages;      // zero mean / unit variance over the batch
  Eigen::VectorXd returns;         // advantages_raw + values
};

/// Generalized advantage estimation over one episode. `bootstrap_value` is
/// the critic's estimate of the state after the final transition; it is
/// ignored when that transition is terminal. Throws on an empty trajectory.
GaeResult compute_gae(const std::vector<Transition>& transitions,
                      double bootstrap_value, const PPOConfig& config);

/// Flat parameter vector: actor layers 0..5 (weights row-major, then bias),
/// critic layers likewise, then log_std. Packing and unpacking are exact
/// inverses; Adam state and gradient checks both live in this layout.
long param_count(const AgentGenome& genome);
Eigen::VectorXd pack_params(const AgentGenome& genome);
void unpack_params(const Eigen::VectorXd& flat, AgentGenome& genome);

/// Minibatch view used by the update: observations and actions are columns.
struct UpdateBatch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct LossStats {
  double policy_loss = 0.0;   // -mean(min(ratio*adv, clipped*adv))
  double value_loss = 0.0;    // mean squared value error (unweighted)
  double entropy = 0.0;       // mean policy entropy
  double total = 0.0;         // policy + value_coef*value - entropy_coef*entropy
  double clip_fraction = 0.0;
};

/// Total loss only (used by finite-difference checks).
LossStats surrogate_loss(const AgentGenome& genome, const UpdateBatch& batch,
                         const PPOConfig& config);

/// Total loss plus its analytic gradient in pack_params layout.
LossStats surrogate_gradients(const AgentGenome& genome,
                              const UpdateBatch& batch, const PPOConfig& config,
                              Eigen::VectorXd& grad);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

AdamState make_adam_state(long n);

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const PPOConfig& config);

struct UpdateResult {
  LossStats stats;        // averaged over all minibatch steps taken
  bool nan_flag = false;  // a non-finite loss aborted the update
};

/// One PPO update over one episode rollout: config.epochs passes of shuffled
/// minibatches, Adam steps applied in place. A non-finite minibatch loss
/// aborts the remaining steps without touching the parameters.
UpdateResult ppo_update(AgentGenome& genome, AdamState& adam,
                        const std::vector<Transition>& transitions,
                        double bootstrap_value, const PPOConfig& config,
                        Rng& rng);

struct LifetimeResult {
  std::vector<EpisodeRecord> episodes;
  bool nan_flag = false;
};

/// lt episodes of interaction, one PPO update per episode, Adam moments
/// persisting across episodes. All stochasticity (action sampling, minibatch
/// order) flows from `seed`, so a repeat run reproduces rewards exactly.
/// Once an update is NaN-flagged no further updates are applied.
LifetimeResult train_lifetime(AgentGenome& genome, TerrainEnv& env, int lt,
                              const PPOConfig& config, std::uint64_t seed);

/// One deterministic episode at the policy mean, no learning. Used by
/// evaluation probes.
EpisodeRecord evaluate_episode(const AgentGenome& genome, TerrainEnv& env);

}  // namespace grl
