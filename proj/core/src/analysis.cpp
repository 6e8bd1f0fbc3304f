#include "grl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "grl/csv.hpp"

namespace grl {

double knowledge_transfer_rate(double r_ji, double r_ii, double w_i) {
  if (r_ii == w_i) {
    throw std::invalid_argument("knowledge_transfer_rate: undefined anchor (r_ii == w_i)");
  }
  return (r_ji - w_i) / (r_ii - w_i);
}

namespace {

Heightfield eval_heightfield(const TransferConfig& config, ObstacleKind kind,
                             int episode) {
  return generate_heightfield(
      kind,
      seed_stream(config.master_seed, static_cast<std::uint64_t>(kind),
                  static_cast<std::uint64_t>(episode), stream::kHeightfield),
      config.terrain_scale);
}

}  // namespace

TransferMatrix compute_transfer_matrix(const TransferConfig& config) {
  if (config.seeds < 1 || config.episodes < 2 || config.eval_episodes < 1) {
    throw std::invalid_argument("compute_transfer_matrix: bad counts");
  }
  TransferMatrix out;
  out.kinds = all_obstacles();
  const auto n = static_cast<Eigen::Index>(out.kinds.size());
  out.rates.setConstant(n, n, std::numeric_limits<double>::quiet_NaN());
  out.anchors_w.resize(n);
  out.anchors_r.resize(n);

  // Train `seeds` fresh agents per source obstacle, remembering genomes and
  // training curves.
  std::vector<std::vector<AgentGenome>> trained(static_cast<std::size_t>(n));
  Eigen::MatrixXd reward(n, n);  // mean eval reward: row source, col target
  const int mid = config.episodes / 2;

  for (Eigen::Index j = 0; j < n; ++j) {
    const ObstacleKind kind = out.kinds[static_cast<std::size_t>(j)];
    double mid_sum = 0.0;
    for (int s = 0; s < config.seeds; ++s) {
      AgentGenome genome = make_genome(
          6, config.hidden_width, 2, config.init_method,
          seed_stream(config.master_seed, static_cast<std::uint64_t>(kind),
                      static_cast<std::uint64_t>(s), stream::kGenomeInit));
      TerrainEnv env(
          generate_heightfield(kind,
                               seed_stream(config.master_seed,
                                           static_cast<std::uint64_t>(kind),
                                           stream::kHeightfield),
                               config.terrain_scale),
          config.env);
      const LifetimeResult life = train_lifetime(
          genome, env, config.episodes, config.ppo,
          seed_stream(config.master_seed, static_cast<std::uint64_t>(kind),
                      static_cast<std::uint64_t>(s), stream::kTraining));
      mid_sum += life.episodes[static_cast<std::size_t>(mid)].reward;
      trained[static_cast<std::size_t>(j)].push_back(std::move(genome));
    }
    out.anchors_w[j] = mid_sum / config.seeds;
  }

  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0.0;
      int count = 0;
      for (const AgentGenome& genome : trained[static_cast<std::size_t>(j)]) {
        for (int e = 0; e < config.eval_episodes; ++e) {
          TerrainEnv env(eval_heightfield(config, out.kinds[static_cast<std::size_t>(i)], e),
                         config.env);
          sum += evaluate_episode(genome, env).reward;
          ++count;
        }
      }
      reward(j, i) = sum / count;
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) out.anchors_r[i] = reward(i, i);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out.anchors_r[i] == out.anchors_w[i]) continue;  // NaN stays
      out.rates(j, i) = j == i ? 1.0
                               : knowledge_transfer_rate(reward(j, i),
                                                         out.anchors_r[i],
                                                         out.anchors_w[i]);
    }
  }
  return out;
}

void write_transfer_csv(const TransferMatrix& matrix, std::ostream& out) {
  CsvWriter csv(out);
  std::string header = "trained_on";
  for (ObstacleKind k : matrix.kinds) header += "," + to_string(k);
  csv.header(header);
  for (Eigen::Index j = 0; j < matrix.rates.rows(); ++j) {
    csv.cell(to_string(matrix.kinds[static_cast<std::size_t>(j)]));
    for (Eigen::Index i = 0; i < matrix.rates.cols(); ++i) {
      csv.cell(matrix.rates(j, i));
    }
    csv.end_row();
  }
}

InstinctReport instinct_probe(const AgentGenome& genome, TerrainEnv& env,
                              int steps, int k) {
  if (k < 1 || steps < k) {
    throw std::invalid_argument("instinct_probe: need steps >= k >= 1");
  }
  InstinctReport report;
  Eigen::VectorXd obs = env.reset();
  report.trajectory.emplace_back(0, env.state().x);
  for (int t = 1; t <= steps; ++t) {
    const Eigen::VectorXd mean = forward(genome.actor, obs);
    const auto step = env.step(Eigen::Vector2d(mean[0], mean[1]));
    report.control_cost += step.control_cost;
    report.steps = t;
    if (t % k == 0) report.trajectory.emplace_back(t, env.state().x);
    obs = step.observation;
    if (step.done) break;
  }
  report.forward_distance = env.state().x;
  return report;
}

ConvergenceTrace form_probability_trace(
    const std::vector<CheckpointState>& checkpoints) {
  if (checkpoints.empty()) {
    throw std::invalid_argument("form_probability_trace: no checkpoints");
  }
  ConvergenceTrace trace;
  trace.forms = checkpoints.front().pool.forms();
  for (const CheckpointState& state : checkpoints) {
    trace.generations.push_back(state.generation);
    trace.probability.push_back(state.pool.form_probabilities());
  }
  return trace;
}

void write_trace_csv(const ConvergenceTrace& trace, std::ostream& out) {
  CsvWriter csv(out);
  csv.header("generation,form,probability");
  for (std::size_t g = 0; g < trace.generations.size(); ++g) {
    for (std::size_t f = 0; f < trace.forms.size(); ++f) {
      csv.cell(trace.generations[g]).cell(to_string(trace.forms[f]));
      csv.cell(trace.probability[g][f]);
      csv.end_row();
    }
  }
}

std::vector<HeatmapRow> parameter_change_heatmap(const std::vector<Event>& events) {
  std::map<GeneId, const LearngenePayload*> birth_payload;
  struct Cell {
    double sum = 0.0;
    int count = 0;
  };
  std::map<std::pair<int, FormKey>, Cell> cells;

  for (const Event& event : events) {
    if (const auto* b = std::get_if<BirthEvent>(&event)) {
      birth_payload[b->gene_id] = &b->payload;
    } else if (const auto* c = std::get_if<CarrierEndEvent>(&event)) {
      auto it = birth_payload.find(c->gene_id);
      if (it == birth_payload.end()) {
        throw std::invalid_argument("parameter_change_heatmap: carrier of unknown gene " +
                                    std::to_string(c->gene_id));
      }
      Cell& cell = cells[{c->generation, form_key(c->payload.form)}];
      cell.sum += manhattan_change(*it->second, c->payload);
      cell.count += 1;
    }
  }

  std::vector<HeatmapRow> rows;
  for (const auto& [key, cell] : cells) {
    rows.push_back(HeatmapRow{key.first, form_from_key(key.second),
                              cell.sum / cell.count, cell.count});
  }
  return rows;
}

void write_heatmap_csv(const std::vector<HeatmapRow>& rows, std::ostream& out) {
  CsvWriter csv(out);
  csv.header("generation,form,mean_change,carriers");
  for (const HeatmapRow& r : rows) {
    csv.cell(r.generation).cell(to_string(r.form)).cell(r.mean_change).cell(r.carriers);
    csv.end_row();
  }
}

BootstrapCi bootstrap_ci(const std::vector<double>& values, double confidence,
                         int resamples, std::uint64_t seed) {
  if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need >= 2 values");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("bootstrap_ci: confidence must be in (0,1)");
  }
  if (resamples < 1) throw std::invalid_argument("bootstrap_ci: resamples must be >= 1");

  BootstrapCi ci;
  for (double v : values) ci.mean += v;
  ci.mean /= static_cast<double>(values.size());

  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    m = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());

  const auto quantile = [&means](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= means.size()) return means.back();
    return means[lo] * (1.0 - frac) + means[lo + 1] * frac;
  };
  const double alpha = 1.0 - confidence;
  ci.low = std::min(quantile(alpha / 2.0), ci.mean);
  ci.high = std::max(quantile(1.0 - alpha / 2.0), ci.mean);
  return ci;
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kScratch: return "scratch";
    case BaselineKind::kLearngene: return "learngene";
    case BaselineKind::kPretrain: return "pretrain";
  }
  return "scratch";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "scratch") return BaselineKind::kScratch;
  if (s == "learngene") return BaselineKind::kLearngene;
  if (s == "pretrain") return BaselineKind::kPretrain;
  throw std::invalid_argument("unknown baseline kind: " + s);
}

BaselineResult run_baseline(const BaselineConfig& config) {
  if (config.episodes < 0) throw std::invalid_argument("run_baseline: episodes < 0");
  if (config.kind == BaselineKind::kLearngene &&
      (config.pool == nullptr || !config.pool->bootstrapped())) {
    throw std::invalid_argument("run_baseline: learngene baseline needs a populated pool");
  }
  if (config.kind == BaselineKind::kPretrain && config.pretrain_i < 1) {
    throw std::invalid_argument("run_baseline: pretrain_i must be >= 1");
  }

  BaselineResult result;
  const Heightfield target = generate_heightfield(
      config.task,
      seed_stream(config.seed, static_cast<std::uint64_t>(config.task),
                  stream::kHeightfield),
      config.terrain_scale);

  AgentGenome genome =
      make_genome(6, config.hidden_width, 2, config.init_method,
                  seed_stream(config.seed, stream::kGenomeInit));

  if (config.kind == BaselineKind::kLearngene) {
    // Highest-probability form, ties toward the canonical order; then a
    // score-proportional draw among that form's residents.
    const GenePool& pool = *config.pool;
    const std::vector<double> p = pool.form_probabilities();
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    const auto& ids = pool.residents(form_key(pool.forms()[best]));
    double total = 0.0;
    for (GeneId id : ids) total += pool.node(id).score;
    Rng rng = make_rng(seed_stream(config.seed, stream::kInheritance));
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double cum = 0.0;
    GeneId chosen = ids.back();
    for (GeneId id : ids) {
      cum += pool.node(id).score;
      if (u < cum) {
        chosen = id;
        break;
      }
    }
    transplant_learngene(pool.node(chosen).payload, genome);
    result.gene = chosen;
  } else if (config.kind == BaselineKind::kPretrain) {
    EnvParams pre_params = config.env;
    pre_params.t_end = config.env.t_end * 3;  // the combined track is ~3x longer
    TerrainEnv pre_env(
        generate_combined_heightfield(
            seed_stream(config.seed, stream::kHeightfield), config.terrain_scale),
        pre_params);
    const LifetimeResult pre = train_lifetime(
        genome, pre_env, config.pretrain_i * config.lt, config.ppo,
        seed_stream(config.seed, 1, stream::kTraining));
    result.nan_flag = result.nan_flag || pre.nan_flag;
  }

  {
    TerrainEnv probe_env(target, config.env);
    result.newborn = instinct_probe(genome, probe_env, config.env.t_end,
                                    config.probe_interval);
  }

  if (config.episodes > 0) {
    TerrainEnv env(target, config.env);
    LifetimeResult life =
        train_lifetime(genome, env, config.episodes, config.ppo,
                       seed_stream(config.seed, 2, stream::kTraining));
    result.curve = std::move(life.episodes);
    result.nan_flag = result.nan_flag || life.nan_flag;
  }
  return result;
}

}  // namespace grl
