#include "grl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace grl {

double step_reward(double v_target, const Eigen::VectorXd& action,
                   double gamma_w, double delta_w) {
  return gamma_w * v_target - delta_w * action.squaredNorm();
}

double episode_reward(const std::vector<double>& step_rewards) {
  return std::accumulate(step_rewards.begin(), step_rewards.end(), 0.0);
}

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)
}

double gaussian_log_prob(const Eigen::VectorXd& action,
                         const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  const Eigen::ArrayXd z = (action - mean).array() * (-log_std).array().exp();
  return -0.5 * z.square().sum() - log_std.sum() -
         0.5 * kLogTwoPi * static_cast<double>(action.size());
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() +
         0.5 * (kLogTwoPi + 1.0) * static_cast<double>(log_std.size());
}

GaeResult compute_gae(const std::vector<Transition>& transitions,
                      double bootstrap_value, const PPOConfig& config) {
  if (transitions.empty()) throw std::invalid_argument("compute_gae: empty trajectory");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  GaeResult out;
  out.advantages_raw.resize(n);
  out.returns.resize(n);

  double gae = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Transition& tr = transitions[static_cast<std::size_t>(t)];
    const double not_done = tr.done ? 0.0 : 1.0;
    const double next_value =
        t + 1 < n ? transitions[static_cast<std::size_t>(t + 1)].value
                  : bootstrap_value;
    const double delta =
        tr.reward + config.discount * next_value * not_done - tr.value;
    gae = delta + config.discount * config.gae_lambda * not_done * gae;
    out.advantages_raw[t] = gae;
    out.returns[t] = gae + tr.value;
  }

  const double mean = out.advantages_raw.mean();
  const double var =
      (out.advantages_raw.array() - mean).square().sum() / static_cast<double>(n);
  out.advantages = (out.advantages_raw.array() - mean) / (std::sqrt(var) + 1e-8);
  return out;
}

long param_count(const AgentGenome& genome) {
  long n = 0;
  for (const auto& l : genome.actor.layers) n += l.parameter_count();
  for (const auto& l : genome.critic.layers) n += l.parameter_count();
  return n + genome.log_std.size();
}

namespace {

void pack_layers(const std::vector<LayerParams>& layers, Eigen::VectorXd& flat,
                 long& pos) {
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        flat[pos++] = l.weights(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[pos++] = l.bias[r];
  }
}

void unpack_layers(const Eigen::VectorXd& flat, std::vector<LayerParams>& layers,
                   long& pos) {
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        l.weights(r, c) = flat[pos++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[pos++];
  }
}

}  // namespace

Eigen::VectorXd pack_params(const AgentGenome& genome) {
  Eigen::VectorXd flat(param_count(genome));
  long pos = 0;
  pack_layers(genome.actor.layers, flat, pos);
  pack_layers(genome.critic.layers, flat, pos);
  for (Eigen::Index r = 0; r < genome.log_std.size(); ++r)
    flat[pos++] = genome.log_std[r];
  return flat;
}

void unpack_params(const Eigen::VectorXd& flat, AgentGenome& genome) {
  if (flat.size() != param_count(genome)) {
    throw std::invalid_argument("unpack_params: size mismatch");
  }
  long pos = 0;
  unpack_layers(flat, genome.actor.layers, pos);
  unpack_layers(flat, genome.critic.layers, pos);
  for (Eigen::Index r = 0; r < genome.log_std.size(); ++r)
    genome.log_std[r] = flat[pos++];
}

namespace {

/// Batched forward keeping each layer's input; columns are samples.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // inputs[l] feeds weight layer l
  Eigen::MatrixXd output;
};

ForwardCache forward_cached(const ParameterSet& params,
                            const Eigen::MatrixXd& obs) {
  ForwardCache cache;
  const auto layer_count = params.layers.size();
  cache.inputs.reserve(layer_count);
  Eigen::MatrixXd h = obs;
  for (std::size_t l = 0; l < layer_count; ++l) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z =
        (params.layers[l].weights * h).colwise() + params.layers[l].bias;
    h = l + 1 < layer_count ? z.array().tanh().matrix() : std::move(z);
  }
  cache.output = std::move(h);
  return cache;
}

/// Backprop of dL/d(output) through the net; gradients land in `grads`
/// (same shapes as the parameters).
void backward(const ParameterSet& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_output, std::vector<LayerParams>& grads) {
  const auto layer_count = params.layers.size();
  Eigen::MatrixXd dz = d_output;
  for (std::size_t i = layer_count; i-- > 0;) {
    grads[i].weights = dz * cache.inputs[i].transpose();
    grads[i].bias = dz.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd da = params.layers[i].weights.transpose() * dz;
    // inputs[i] is tanh output of layer i-1, so tanh' = 1 - inputs[i]^2.
    dz = (da.array() * (1.0 - cache.inputs[i].array().square())).matrix();
  }
}

std::vector<LayerParams> zero_like(const std::vector<LayerParams>& layers) {
  std::vector<LayerParams> grads(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    grads[i].weights = Eigen::MatrixXd::Zero(layers[i].weights.rows(),
                                             layers[i].weights.cols());
    grads[i].bias = Eigen::VectorXd::Zero(layers[i].bias.size());
  }
  return grads;
}

struct LossParts {
  LossStats stats;
  // Populated only when gradients were requested.
  std::vector<LayerParams> actor_grads;
  std::vector<LayerParams> critic_grads;
  Eigen::VectorXd log_std_grad;
};

LossParts surrogate_impl(const AgentGenome& genome, const UpdateBatch& batch,
                         const PPOConfig& config, bool want_grads) {
  const auto n = batch.obs.cols();
  if (n == 0) throw std::invalid_argument("surrogate: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto act_dim = genome.log_std.size();

  ForwardCache actor_fwd = forward_cached(genome.actor, batch.obs);
  ForwardCache critic_fwd = forward_cached(genome.critic, batch.obs);
  const Eigen::MatrixXd& mean = actor_fwd.output;          // act_dim x n
  const Eigen::RowVectorXd values = critic_fwd.output.row(0);

  const Eigen::ArrayXd inv_var = (-2.0 * genome.log_std.array()).exp();
  const Eigen::MatrixXd diff = batch.actions - mean;

  // New log-probs per sample.
  Eigen::VectorXd log_probs(n);
  const double log_prob_base =
      -genome.log_std.sum() - 0.5 * kLogTwoPi * static_cast<double>(act_dim);
  for (Eigen::Index t = 0; t < n; ++t) {
    log_probs[t] =
        -0.5 * (diff.col(t).array().square() * inv_var).sum() + log_prob_base;
  }

  LossParts out;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  int clipped = 0;
  Eigen::VectorXd policy_coef = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double ratio = std::exp(log_probs[t] - batch.old_log_probs[t]);
    const double adv = batch.advantages[t];
    const double surr1 = ratio * adv;
    const double surr2 =
        std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv;
    policy_loss -= std::min(surr1, surr2) * inv_n;
    if (surr1 <= surr2) policy_coef[t] = -adv * ratio * inv_n;
    else ++clipped;
    const double verr = values[t] - batch.returns[t];
    value_loss += verr * verr * inv_n;
  }
  const double entropy = gaussian_entropy(genome.log_std);

  out.stats.policy_loss = policy_loss;
  out.stats.value_loss = value_loss;
  out.stats.entropy = entropy;
  out.stats.clip_fraction = static_cast<double>(clipped) * inv_n;
  out.stats.total = policy_loss + config.value_coef * value_loss -
                    config.entropy_coef * entropy;

  if (!want_grads) return out;

  // d total / d mean: policy_coef[t] * dlogp/dmean = coef * diff/var.
  Eigen::MatrixXd d_mean(act_dim, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    d_mean.col(t) = policy_coef[t] * (diff.col(t).array() * inv_var).matrix();
  }
  // d total / d value.
  Eigen::MatrixXd d_value(1, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    d_value(0, t) =
        config.value_coef * 2.0 * (values[t] - batch.returns[t]) * inv_n;
  }
  // d total / d log_std: via log-prob (policy term) plus entropy bonus.
  out.log_std_grad = Eigen::VectorXd::Constant(act_dim, -config.entropy_coef);
  for (Eigen::Index t = 0; t < n; ++t) {
    out.log_std_grad.array() +=
        policy_coef[t] * (diff.col(t).array().square() * inv_var - 1.0);
  }

  out.actor_grads = zero_like(genome.actor.layers);
  out.critic_grads = zero_like(genome.critic.layers);
  backward(genome.actor, actor_fwd, d_mean, out.actor_grads);
  backward(genome.critic, critic_fwd, d_value, out.critic_grads);
  return out;
}

}  // namespace

LossStats surrogate_loss(const AgentGenome& genome, const UpdateBatch& batch,
                         const PPOConfig& config) {
  return surrogate_impl(genome, batch, config, false).stats;
}

LossStats surrogate_gradients(const AgentGenome& genome,
                              const UpdateBatch& batch, const PPOConfig& config,
                              Eigen::VectorXd& grad) {
  LossParts parts = surrogate_impl(genome, batch, config, true);
  grad.resize(param_count(genome));
  long pos = 0;
  pack_layers(parts.actor_grads, grad, pos);
  pack_layers(parts.critic_grads, grad, pos);
  for (Eigen::Index r = 0; r < parts.log_std_grad.size(); ++r)
    grad[pos++] = parts.log_std_grad[r];
  return parts.stats;
}

AdamState make_adam_state(long n) {
  AdamState state;
  state.m = Eigen::VectorXd::Zero(n);
  state.v = Eigen::VectorXd::Zero(n);
  return state;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, const PPOConfig& config) {
  state.step += 1;
  state.m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * grad;
  state.v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  params.array() -= config.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + config.adam_eps);
}

UpdateResult ppo_update(AgentGenome& genome, AdamState& adam,
                        const std::vector<Transition>& transitions,
                        double bootstrap_value, const PPOConfig& config,
                        Rng& rng) {
  const GaeResult gae = compute_gae(transitions, bootstrap_value, config);
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto obs_dim = transitions.front().obs.size();
  const auto act_dim = transitions.front().action.size();

  Eigen::MatrixXd obs(obs_dim, n);
  Eigen::MatrixXd actions(act_dim, n);
  Eigen::VectorXd old_log_probs(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    obs.col(t) = transitions[static_cast<std::size_t>(t)].obs;
    actions.col(t) = transitions[static_cast<std::size_t>(t)].action;
    old_log_probs[t] = transitions[static_cast<std::size_t>(t)].log_prob;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  Eigen::VectorXd params = pack_params(genome);
  Eigen::VectorXd grad;
  UpdateResult result;
  int steps_taken = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += config.minibatch) {
      const Eigen::Index size = std::min<Eigen::Index>(config.minibatch, n - start);
      UpdateBatch batch;
      batch.obs.resize(obs_dim, size);
      batch.actions.resize(act_dim, size);
      batch.old_log_probs.resize(size);
      batch.advantages.resize(size);
      batch.returns.resize(size);
      for (Eigen::Index i = 0; i < size; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
        batch.obs.col(i) = obs.col(src);
        batch.actions.col(i) = actions.col(src);
        batch.old_log_probs[i] = old_log_probs[src];
        batch.advantages[i] = gae.advantages[src];
        batch.returns[i] = gae.returns[src];
      }
      const LossStats stats = surrogate_gradients(genome, batch, config, grad);
      if (!std::isfinite(stats.total) || !grad.allFinite()) {
        result.nan_flag = true;
        return result;
      }
      adam_step(adam, params, grad, config);
      unpack_params(params, genome);

      result.stats.policy_loss += stats.policy_loss;
      result.stats.value_loss += stats.value_loss;
      result.stats.entropy += stats.entropy;
      result.stats.total += stats.total;
      result.stats.clip_fraction += stats.clip_fraction;
      ++steps_taken;
    }
  }
  if (steps_taken > 0) {
    const double inv = 1.0 / steps_taken;
    result.stats.policy_loss *= inv;
    result.stats.value_loss *= inv;
    result.stats.entropy *= inv;
    result.stats.total *= inv;
    result.stats.clip_fraction *= inv;
  }
  return result;
}

LifetimeResult train_lifetime(AgentGenome& genome, TerrainEnv& env, int lt,
                              const PPOConfig& config, std::uint64_t seed) {
  if (lt < 1) throw std::invalid_argument("train_lifetime: lt must be >= 1");
  if (genome.actor_arch.input_dim != env.observation_dim() ||
      genome.actor_arch.output_dim != env.action_dim()) {
    throw std::invalid_argument("train_lifetime: genome does not fit the environment");
  }

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  AdamState adam = make_adam_state(param_count(genome));

  LifetimeResult result;
  result.episodes.reserve(static_cast<std::size_t>(lt));

  for (int e = 0; e < lt; ++e) {
    Eigen::VectorXd obs = env.reset();
    std::vector<Transition> rollout;
    EpisodeRecord record;
    record.episode_index = e;

    bool finished = false;
    while (true) {
      const Eigen::VectorXd mean = forward(genome.actor, obs);
      const Eigen::ArrayXd sigma = genome.log_std.array().exp();
      Eigen::VectorXd action(mean.size());
      for (Eigen::Index i = 0; i < action.size(); ++i) {
        action[i] = mean[i] + sigma[i] * normal(rng);
      }
      const double value = forward(genome.critic, obs)[0];

      Transition tr;
      tr.obs = obs;
      tr.action = action;
      tr.log_prob = gaussian_log_prob(action, mean, genome.log_std);
      tr.value = value;

      const auto step = env.step(Eigen::Vector2d(action[0], action[1]));
      tr.reward = step.reward;
      tr.done = step.finished;
      rollout.push_back(std::move(tr));

      record.reward += step.reward;
      record.control_cost += step.control_cost;
      record.steps += 1;
      obs = step.observation;
      if (step.done) {
        finished = step.finished;
        break;
      }
    }
    record.forward_distance = env.state().x;
    result.episodes.push_back(record);

    if (!result.nan_flag) {
      const double bootstrap = finished ? 0.0 : forward(genome.critic, obs)[0];
      const UpdateResult update =
          ppo_update(genome, adam, rollout, bootstrap, config, rng);
      if (update.nan_flag) result.nan_flag = true;
    }
  }
  return result;
}

EpisodeRecord evaluate_episode(const AgentGenome& genome, TerrainEnv& env) {
  Eigen::VectorXd obs = env.reset();
  EpisodeRecord record;
  while (true) {
    const Eigen::VectorXd mean = forward(genome.actor, obs);
    const auto step = env.step(Eigen::Vector2d(mean[0], mean[1]));
    record.reward += step.reward;
    record.control_cost += step.control_cost;
    record.steps += 1;
    obs = step.observation;
    if (step.done) break;
  }
  record.forward_distance = env.state().x;
  return record;
}

}  // namespace grl
