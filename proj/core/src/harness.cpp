#include "grl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "grl/csv.hpp"
#include "grl/event_log.hpp"

namespace grl {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig default_run_config() { return RunConfig{}; }

RunConfig full_scale_run_config() {
  RunConfig config;
  config.evolution.n_p = 50;
  config.evolution.lt = 50;
  config.evolution.generations = 100;
  config.hidden_width = 48;
  config.env.t_end = 3000;
  return config;
}

void validate(const RunConfig& config) {
  validate(config.evolution);
  const PPOConfig& p = config.ppo;
  if (!(p.discount > 0.0 && p.discount < 1.0))
    throw std::invalid_argument("discount must be in (0,1)");
  if (!(p.gae_lambda >= 0.0 && p.gae_lambda <= 1.0))
    throw std::invalid_argument("gae_lambda must be in [0,1]");
  if (!(p.clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be > 0");
  if (p.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (p.minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (!(p.lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (!(p.entropy_coef >= 0.0))
    throw std::invalid_argument("entropy_coef must be >= 0");
  if (!(p.value_coef >= 0.0))
    throw std::invalid_argument("value_coef must be >= 0");
  const EnvParams& e = config.env;
  if (!(e.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (!(e.v_max > 0.0)) throw std::invalid_argument("v_max must be > 0");
  if (e.t_end < 1) throw std::invalid_argument("t_end must be >= 1");
  if (config.hidden_width < 1)
    throw std::invalid_argument("hidden_width must be >= 1");
  if (!(config.terrain_scale > 0.0))
    throw std::invalid_argument("terrain_scale must be > 0");
  if (config.workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (config.checkpoint_every < 1)
    throw std::invalid_argument("checkpoint_every must be >= 1");
  if (config.output_dir.empty())
    throw std::invalid_argument("output_dir must not be empty");
  if (config.oracle.enabled) {
    const LearngeneForm f = form_from_string(config.oracle.form);
    if (f.network != config.evolution.network ||
        static_cast<int>(f.layer_indices.size()) != config.evolution.n_l) {
      throw std::invalid_argument(
          "oracle form must belong to the configured form set");
    }
  }
}

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["evolution"] = json{
      {"n_p", c.evolution.n_p},
      {"s", c.evolution.s},
      {"lt", c.evolution.lt},
      {"zeta", c.evolution.zeta},
      {"rho_max", c.evolution.rho_max},
      {"eta", c.evolution.eta},
      {"beta", c.evolution.beta},
      {"m", c.evolution.m},
      {"network", to_string(c.evolution.network)},
      {"n_l", c.evolution.n_l},
      {"generations", c.evolution.generations},
      {"master_seed", c.evolution.master_seed},
  };
  j["ppo"] = json{
      {"discount", c.ppo.discount},
      {"gae_lambda", c.ppo.gae_lambda},
      {"clip_eps", c.ppo.clip_eps},
      {"epochs", c.ppo.epochs},
      {"minibatch", c.ppo.minibatch},
      {"lr", c.ppo.lr},
      {"entropy_coef", c.ppo.entropy_coef},
      {"value_coef", c.ppo.value_coef},
      {"adam_beta1", c.ppo.adam_beta1},
      {"adam_beta2", c.ppo.adam_beta2},
      {"adam_eps", c.ppo.adam_eps},
  };
  j["env"] = json{
      {"dt", c.env.dt},
      {"drive_gain", c.env.drive_gain},
      {"slope_gain", c.env.slope_gain},
      {"friction", c.env.friction},
      {"v_max", c.env.v_max},
      {"gamma_w", c.env.gamma_w},
      {"delta_w", c.env.delta_w},
      {"t_end", c.env.t_end},
  };
  j["hidden_width"] = c.hidden_width;
  j["init_method"] = to_string(c.init_method);
  j["terrain_scale"] = c.terrain_scale;
  j["workers"] = c.workers;
  j["checkpoint_every"] = c.checkpoint_every;
  j["output_dir"] = c.output_dir;
  j["oracle"] = json{
      {"enabled", c.oracle.enabled},
      {"form", c.oracle.form},
      {"bonus", c.oracle.bonus},
      {"jitter", c.oracle.jitter},
  };
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("evolution")) {
    const json& e = j.at("evolution");
    c.evolution.n_p = e.value("n_p", c.evolution.n_p);
    c.evolution.s = e.value("s", c.evolution.s);
    c.evolution.lt = e.value("lt", c.evolution.lt);
    c.evolution.zeta = e.value("zeta", c.evolution.zeta);
    c.evolution.rho_max = e.value("rho_max", c.evolution.rho_max);
    c.evolution.eta = e.value("eta", c.evolution.eta);
    c.evolution.beta = e.value("beta", c.evolution.beta);
    c.evolution.m = e.value("m", c.evolution.m);
    if (e.contains("network"))
      c.evolution.network = network_tag_from_string(e.at("network").get<std::string>());
    c.evolution.n_l = e.value("n_l", c.evolution.n_l);
    c.evolution.generations = e.value("generations", c.evolution.generations);
    c.evolution.master_seed = e.value("master_seed", c.evolution.master_seed);
  }
  if (j.contains("ppo")) {
    const json& p = j.at("ppo");
    c.ppo.discount = p.value("discount", c.ppo.discount);
    c.ppo.gae_lambda = p.value("gae_lambda", c.ppo.gae_lambda);
    c.ppo.clip_eps = p.value("clip_eps", c.ppo.clip_eps);
    c.ppo.epochs = p.value("epochs", c.ppo.epochs);
    c.ppo.minibatch = p.value("minibatch", c.ppo.minibatch);
    c.ppo.lr = p.value("lr", c.ppo.lr);
    c.ppo.entropy_coef = p.value("entropy_coef", c.ppo.entropy_coef);
    c.ppo.value_coef = p.value("value_coef", c.ppo.value_coef);
    c.ppo.adam_beta1 = p.value("adam_beta1", c.ppo.adam_beta1);
    c.ppo.adam_beta2 = p.value("adam_beta2", c.ppo.adam_beta2);
    c.ppo.adam_eps = p.value("adam_eps", c.ppo.adam_eps);
  }
  if (j.contains("env")) {
    const json& e = j.at("env");
    c.env.dt = e.value("dt", c.env.dt);
    c.env.drive_gain = e.value("drive_gain", c.env.drive_gain);
    c.env.slope_gain = e.value("slope_gain", c.env.slope_gain);
    c.env.friction = e.value("friction", c.env.friction);
    c.env.v_max = e.value("v_max", c.env.v_max);
    c.env.gamma_w = e.value("gamma_w", c.env.gamma_w);
    c.env.delta_w = e.value("delta_w", c.env.delta_w);
    c.env.t_end = e.value("t_end", c.env.t_end);
  }
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  if (j.contains("init_method"))
    c.init_method = init_method_from_string(j.at("init_method").get<std::string>());
  c.terrain_scale = j.value("terrain_scale", c.terrain_scale);
  c.workers = j.value("workers", c.workers);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    c.oracle.enabled = o.value("enabled", c.oracle.enabled);
    c.oracle.form = o.value("form", c.oracle.form);
    c.oracle.bonus = o.value("bonus", c.oracle.bonus);
    c.oracle.jitter = o.value("jitter", c.oracle.jitter);
  }
  return c;
}

NetworkArchitecture pool_arch(const RunConfig& c) {
  NetworkArchitecture arch;
  arch.input_dim = 6;
  arch.hidden_width = c.hidden_width;
  arch.hidden_layers = 5;
  arch.output_dim = c.evolution.network == NetworkTag::kActor ? 2 : 1;
  return arch;
}

}  // namespace

std::uint64_t config_hash(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("workers");
  j.erase("checkpoint_every");
  j.erase("output_dir");
  j.at("evolution").erase("generations");
  return fnv1a64(j.dump());
}

std::string to_json_string(const RunConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

RunConfig run_config_from_json_string(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_string(ss.str());
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_json_string(config);
}

std::string checkpoint_path(const std::string& run_dir, int generation) {
  char name[32];
  std::snprintf(name, sizeof(name), "gen_%06d.json", generation);
  return (fs::path(run_dir) / "checkpoints" / name).string();
}

namespace {

/// Parses "gen_000012.json" -> 12; -1 when the name does not match.
int checkpoint_generation(const fs::path& p) {
  const std::string name = p.filename().string();
  if (name.size() != 15 || name.rfind("gen_", 0) != 0 ||
      name.substr(10) != ".json") {
    return -1;
  }
  try {
    return std::stoi(name.substr(4, 6));
  } catch (...) {
    return -1;
  }
}

}  // namespace

std::vector<std::pair<int, std::string>> list_checkpoints(const std::string& run_dir) {
  std::vector<std::pair<int, std::string>> found;
  const fs::path dir = fs::path(run_dir) / "checkpoints";
  if (!fs::is_directory(dir)) return found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const int gen = checkpoint_generation(entry.path());
    if (gen >= 0) found.emplace_back(gen, entry.path().string());
  }
  std::sort(found.begin(), found.end());
  return found;
}

namespace {

void truncate_csv(const fs::path& path, int max_generation) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> kept;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      kept.push_back(line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    const int gen = std::atoi(line.c_str());
    if (gen <= max_generation) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

void truncate_events(const fs::path& path, int max_generation) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<Event> events = read_events_jsonl(in);
  in.close();
  std::vector<Event> kept;
  for (auto& e : events) {
    if (event_generation(e) <= max_generation) kept.push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::trunc);
  write_events_jsonl(kept, out);
}

void append_file(const fs::path& path, const std::string& header,
                 const std::string& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  if (fresh && !header.empty()) out << header << '\n';
  out << rows;
}

constexpr const char* kEpisodesHeader =
    "generation,agent_id,task,episode,reward,forward_distance,control_cost,steps";
constexpr const char* kFitnessHeader =
    "generation,agent_id,task,fitness_raw,fitness_normalized,winner";

}  // namespace

std::string latest_checkpoint(const std::string& run_dir) {
  const auto found = list_checkpoints(run_dir);
  return found.empty() ? std::string() : found.back().second;
}

RunResult run_evolution(const RunConfig& config, bool resume) {
  validate(config);
  const EvolutionConfig& evo = config.evolution;
  const std::uint64_t master = evo.master_seed;
  const std::uint64_t hash = config_hash(config);
  const NetworkArchitecture arch = pool_arch(config);

  const fs::path out_dir(config.output_dir);
  const fs::path ckpt_dir = out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  const fs::path episodes_csv = out_dir / "episodes.csv";
  const fs::path fitness_csv = out_dir / "fitness.csv";
  const fs::path events_path = out_dir / "events.jsonl";

  GenePool pool(evo.network, evo.n_l, evo.rho_max, arch);
  int start_gen = 0;

  const std::string newest = latest_checkpoint(config.output_dir);
  if (resume && !newest.empty()) {
    CheckpointState state = load_checkpoint(newest, hash);
    pool = std::move(state.pool);
    start_gen = state.generation + 1;
    truncate_csv(episodes_csv, state.generation);
    truncate_csv(fitness_csv, state.generation);
    truncate_events(events_path, state.generation);
    for (const auto& [gen, path] : list_checkpoints(config.output_dir)) {
      if (gen > state.generation) {
        fs::remove(path);
        fs::remove(checkpoint_blob_path(path));
      }
    }
  } else {
    for (const fs::path& p : {episodes_csv, fitness_csv, events_path}) {
      fs::remove(p);
    }
    for (const auto& [gen, path] : list_checkpoints(config.output_dir)) {
      fs::remove(path);
      fs::remove(checkpoint_blob_path(path));
    }
    fs::remove(out_dir / "nan_abort.json");
  }
  save_run_config(config, (out_dir / "config.json").string());

  const LearngeneForm oracle_form =
      config.oracle.enabled ? form_from_string(config.oracle.form) : LearngeneForm{};

  RunResult result;
  if (start_gen > 0) {
    result.last_generation = start_gen - 1;
    result.final_checkpoint = newest;
  }

  for (int gen = start_gen; gen < evo.generations; ++gen) {
    EventLog log;
    std::vector<Agent> agents = initialize_generation(
        pool, evo, 6, config.hidden_width, 2, config.init_method, gen, &log);

    struct Outcome {
      std::vector<EpisodeRecord> episodes;
      bool nan = false;
    };
    std::vector<Outcome> outcomes(agents.size());
    std::vector<FitnessRecord> records(agents.size());

    if (config.oracle.enabled) {
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const Agent& a = agents[i];
        bool favored = false;
        if (a.paternal_gene != 0) {
          favored = pool.node(a.paternal_gene).payload.form == oracle_form;
        }
        Rng rng = make_rng(seed_stream(master, static_cast<std::uint64_t>(gen),
                                       static_cast<std::uint64_t>(a.agent_id),
                                       stream::kOracle));
        const double jitter =
            config.oracle.jitter * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        records[i] = FitnessRecord{a.agent_id, a.task,
                                   evo.zeta + (favored ? config.oracle.bonus : 0.0) + jitter,
                                   0.0};
      }
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr worker_error;
      std::mutex error_mutex;
      auto work = [&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= agents.size()) return;
          try {
            Agent& a = agents[i];
            Heightfield hf = generate_heightfield(
                a.task,
                seed_stream(master, static_cast<std::uint64_t>(gen),
                            static_cast<std::uint64_t>(a.task), stream::kHeightfield),
                config.terrain_scale);
            TerrainEnv env(std::move(hf), config.env);
            LifetimeResult r = train_lifetime(
                a.genome, env, evo.lt, config.ppo,
                seed_stream(master, static_cast<std::uint64_t>(gen),
                            static_cast<std::uint64_t>(a.agent_id), stream::kTraining));
            outcomes[i] = Outcome{std::move(r.episodes), r.nan_flag};
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!worker_error) worker_error = std::current_exception();
            return;
          }
        }
      };
      unsigned int n_workers = config.workers > 0
                                   ? static_cast<unsigned int>(config.workers)
                                   : std::max(1u, std::thread::hardware_concurrency());
      n_workers = std::min<unsigned int>(n_workers,
                                         static_cast<unsigned int>(agents.size()));
      std::vector<std::thread> threads;
      for (unsigned int w = 1; w < n_workers; ++w) threads.emplace_back(work);
      work();
      for (auto& t : threads) t.join();
      if (worker_error) std::rethrow_exception(worker_error);

      std::vector<int> flagged;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        if (outcomes[i].nan) flagged.push_back(agents[i].agent_id);
      }
      if (!flagged.empty()) {
        CheckpointState diag;
        diag.generation = gen - 1;
        diag.config_hash = hash;
        diag.master_seed = master;
        diag.pool = pool;
        if (pool.bootstrapped()) {
          save_checkpoint(diag, (ckpt_dir / "diagnostic.json").string());
        }
        json j;
        j["generation"] = gen;
        j["agents"] = flagged;
        std::ofstream marker(out_dir / "nan_abort.json", std::ios::trunc);
        marker << j.dump(2) << '\n';
        throw NanAbortError(gen, flagged,
                            "non-finite loss during generation " + std::to_string(gen));
      }

      for (std::size_t i = 0; i < agents.size(); ++i) {
        records[i] = FitnessRecord{agents[i].agent_id, agents[i].task,
                                   compute_fitness(outcomes[i].episodes, evo.zeta), 0.0};
      }
    }

    normalize_fitness(records);
    const TournamentResult tournament = run_tournaments(
        records, evo.s,
        seed_stream(master, static_cast<std::uint64_t>(gen), stream::kTournament));

    {
      std::ostringstream rows;
      CsvWriter csv(rows);
      for (std::size_t i = 0; i < agents.size(); ++i) {
        for (const EpisodeRecord& e : outcomes[i].episodes) {
          csv.cell(gen).cell(agents[i].agent_id).cell(to_string(agents[i].task));
          csv.cell(e.episode_index).cell(e.reward).cell(e.forward_distance);
          csv.cell(e.control_cost).cell(e.steps);
          csv.end_row();
        }
      }
      append_file(episodes_csv, kEpisodesHeader, rows.str());
    }
    {
      std::ostringstream rows;
      CsvWriter csv(rows);
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const bool winner = std::find(tournament.winners.begin(), tournament.winners.end(),
                                      records[i].agent_id) != tournament.winners.end();
        csv.cell(gen).cell(records[i].agent_id).cell(to_string(records[i].task));
        csv.cell(records[i].raw).cell(records[i].normalized).cell(winner ? 1 : 0);
        csv.end_row();
      }
      append_file(fitness_csv, kFitnessHeader, rows.str());
    }

    std::vector<GenePool::WinnerView> winners;
    for (int id : tournament.winners) {
      const auto& a = agents[static_cast<std::size_t>(id)];
      const auto& r = records[static_cast<std::size_t>(id)];
      winners.push_back(GenePool::WinnerView{id, &a.genome, r.normalized, a.paternal_gene});
    }
    Rng phase_rng = make_rng(
        seed_stream(master, static_cast<std::uint64_t>(gen), stream::kEvolution));
    pool.extract_and_replace(winners, gen, evo.eta, phase_rng, &log);

    for (const Agent& a : agents) {
      if (a.paternal_gene == 0) continue;
      const LearngeneForm& form = pool.node(a.paternal_gene).payload.form;
      log.append(CarrierEndEvent{gen, a.agent_id, a.paternal_gene,
                                 extract_learngene(a.genome, form)});
    }

    pool.apply_decay(evo.beta, gen, &log);

    {
      std::ofstream out(events_path, std::ios::app);
      write_events_jsonl(log.events(), out);
    }

    if ((gen + 1) % config.checkpoint_every == 0 || gen + 1 == evo.generations) {
      CheckpointState state;
      state.generation = gen;
      state.config_hash = hash;
      state.master_seed = master;
      state.pool = pool;
      const std::string path = checkpoint_path(config.output_dir, gen);
      save_checkpoint(state, path);
      result.final_checkpoint = path;
    }
    result.last_generation = gen;
  }
  return result;
}

ReplayReport replay_verify(const std::string& run_dir, int generation) {
  ReplayReport report;
  const fs::path dir(run_dir);

  RunConfig config = load_run_config((dir / "config.json").string());
  const std::uint64_t hash = config_hash(config);
  const std::array<double, 6> elw = layer_elw_table(pool_arch(config));
  const double eta = config.evolution.eta;
  const double beta = config.evolution.beta;

  std::vector<Event> events;
  {
    std::ifstream in(dir / "events.jsonl");
    if (!in) {
      report.pass = false;
      report.failures.push_back("missing events.jsonl");
      return report;
    }
    events = read_events_jsonl(in);
  }

  struct GeneInfo {
    LearngeneForm form;
    GeneId parent = 0;
    double f_tilde = 0.0;
    double score = 0.0;
    bool in_pool = false;
  };
  std::map<GeneId, GeneInfo> genes;
  std::map<FormKey, std::vector<GeneId>> residents;

  auto fail = [&report](const std::string& msg) {
    report.pass = false;
    report.failures.push_back(msg);
  };

  auto apply = [&](const Event& event) {
    if (const auto* b = std::get_if<BirthEvent>(&event)) {
      GeneInfo info;
      info.form = b->payload.form;
      info.parent = b->parent;
      info.f_tilde = b->f_tilde;
      info.score = score_candidate(b->f_tilde, info.form, elw);
      if (std::abs(info.score - b->birth_score) > 1e-9) {
        fail("gene " + std::to_string(b->gene_id) + ": birth score " +
             format_double(b->birth_score) + " != recomputed " +
             format_double(info.score));
      }
      genes[b->gene_id] = info;
    } else if (const auto* a = std::get_if<AdmitEvent>(&event)) {
      auto it = genes.find(a->gene_id);
      if (it == genes.end()) {
        fail("admit of unknown gene " + std::to_string(a->gene_id));
        return;
      }
      const FormKey key = form_key(it->second.form);
      if (a->evicted != 0) {
        auto ev = genes.find(a->evicted);
        if (ev == genes.end() || !ev->second.in_pool) {
          fail("eviction of non-resident gene " + std::to_string(a->evicted));
        } else {
          ev->second.in_pool = false;
          auto& slot = residents[form_key(ev->second.form)];
          slot.erase(std::remove(slot.begin(), slot.end(), a->evicted), slot.end());
        }
      }
      it->second.in_pool = true;
      residents[key].push_back(a->gene_id);
    } else if (const auto* u = std::get_if<ScoreUpdateEvent>(&event)) {
      auto it = genes.find(u->gene_id);
      auto leaf = genes.find(u->leaf_id);
      if (it == genes.end() || leaf == genes.end()) {
        fail("score update for unknown gene " + std::to_string(u->gene_id));
        return;
      }
      if (std::abs(leaf->second.f_tilde - u->f_tilde) > 1e-9) {
        fail("gene " + std::to_string(u->gene_id) +
             ": update fitness disagrees with leaf " + std::to_string(u->leaf_id));
      }
      // Walk leaf -> ancestor to recover the path length and the child node.
      GeneId child = 0;
      GeneId cur = u->leaf_id;
      int l = 0;
      while (cur != u->gene_id) {
        auto node = genes.find(cur);
        if (node == genes.end() || node->second.parent == 0) {
          fail("gene " + std::to_string(u->gene_id) + ": not an ancestor of leaf " +
               std::to_string(u->leaf_id));
          return;
        }
        child = cur;
        cur = node->second.parent;
        ++l;
      }
      if (child == 0) {
        fail("gene " + std::to_string(u->gene_id) + ": self-referential update");
        return;
      }
      if (child != u->child_id) {
        fail("gene " + std::to_string(u->gene_id) + ": logged child " +
             std::to_string(u->child_id) + " != path child " + std::to_string(child));
      }
      const double sim =
          learngene_similarity(it->second.form, genes.at(child).form, elw);
      const double inc = sim * std::pow(eta, static_cast<double>(l + 1)) * u->f_tilde;
      if (std::abs(inc - u->increment) > 1e-9) {
        fail("gene " + std::to_string(u->gene_id) + ": increment " +
             format_double(u->increment) + " != recomputed " + format_double(inc));
      }
      it->second.score += inc;
    } else if (const auto* d = std::get_if<DecayEvent>(&event)) {
      const double factor = 1.0 - beta;
      if (std::abs(factor - d->factor) > 1e-9) {
        fail("generation " + std::to_string(d->generation) + ": decay factor " +
             format_double(d->factor) + " != config " + format_double(factor));
      }
      for (auto& [id, info] : genes) {
        if (info.in_pool) info.score *= factor;
      }
    }
    // inherit / carrier_end events carry no score information.
  };

  auto checkpoints = list_checkpoints(run_dir);
  if (generation >= 0) {
    checkpoints.erase(std::remove_if(checkpoints.begin(), checkpoints.end(),
                                     [generation](const auto& c) {
                                       return c.first > generation;
                                     }),
                      checkpoints.end());
  }
  if (checkpoints.empty()) {
    report.pass = false;
    report.failures.push_back("no checkpoints to verify");
    return report;
  }

  std::size_t cursor = 0;
  for (const auto& [gen, path] : checkpoints) {
    while (cursor < events.size() && event_generation(events[cursor]) <= gen) {
      apply(events[cursor]);
      ++cursor;
    }
    CheckpointState state;
    try {
      state = load_checkpoint(path, hash);
    } catch (const CheckpointError& e) {
      fail(std::string("checkpoint ") + path + ": " + e.what());
      continue;
    }
    ++report.checkpoints_checked;
    for (const auto& form : state.pool.forms()) {
      const FormKey key = form_key(form);
      const auto& actual = state.pool.residents(key);
      const auto& replayed = residents[key];
      if (replayed != actual) {
        fail("generation " + std::to_string(gen) + " form " + to_string(form) +
             ": resident set diverges from the event log");
        continue;
      }
      for (GeneId id : actual) {
        const double want = state.pool.node(id).score;
        const double got = genes.at(id).score;
        if (std::abs(want - got) > 1e-9) {
          fail("generation " + std::to_string(gen) + " gene " + std::to_string(id) +
               ": checkpoint score " + format_double(want) + " != replayed " +
               format_double(got));
        }
      }
    }
  }
  return report;
}

void export_metrics(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path exp = dir / "export";
  fs::create_directories(exp);

  auto copy_or_header = [](const fs::path& src, const fs::path& dst,
                           const std::string& header) {
    std::ofstream out(dst, std::ios::trunc | std::ios::binary);
    if (fs::exists(src)) {
      std::ifstream in(src, std::ios::binary);
      out << in.rdbuf();
    } else if (!header.empty()) {
      out << header << '\n';
    }
  };
  copy_or_header(dir / "episodes.csv", exp / "rewards.csv", kEpisodesHeader);
  copy_or_header(dir / "fitness.csv", exp / "fitness.csv", kFitnessHeader);
  copy_or_header(dir / "events.jsonl", exp / "events.jsonl", "");

  std::ofstream scores(exp / "pool_scores.csv", std::ios::trunc);
  CsvWriter scores_csv(scores);
  scores_csv.header("generation,form,gene_id,score");
  std::ofstream trace(exp / "form_trace.csv", std::ios::trunc);
  CsvWriter trace_csv(trace);
  trace_csv.header("generation,form,probability");

  for (const auto& [gen, path] : list_checkpoints(run_dir)) {
    const CheckpointState state = load_checkpoint(path);
    const std::vector<double> p = state.pool.form_probabilities();
    const auto& forms = state.pool.forms();
    for (std::size_t i = 0; i < forms.size(); ++i) {
      const std::string name = to_string(forms[i]);
      for (GeneId id : state.pool.residents(form_key(forms[i]))) {
        scores_csv.cell(gen).cell(name).cell(static_cast<std::int64_t>(id));
        scores_csv.cell(state.pool.node(id).score);
        scores_csv.end_row();
      }
      trace_csv.cell(gen).cell(name).cell(p[i]);
      trace_csv.end_row();
    }
  }
}

}  // namespace grl
