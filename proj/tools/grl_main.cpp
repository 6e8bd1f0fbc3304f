// Command-line front end for the genetic reinforcement learning engine.
//
// Subcommands: evolve, baseline, instinct, transfer-matrix, trace,
// replay-verify, export.  Exit codes: 0 ok, 1 verification failure,
// 2 config error, 3 NaN abort, 4 checkpoint corruption.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grl/analysis.hpp"
#include "grl/checkpoint.hpp"
#include "grl/csv.hpp"
#include "grl/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
  // evolve
  std::string config_path;
  bool resume = false;
  bool oracle = false;
  int workers = -1;
  int checkpoint_every = -1;
  int generations = -1;
  long long seed = -1;
  std::string output_dir;
  int np = -1;
  int tournament_size = -1;
  int lt = -1;
  double zeta = -1.0;
  int rho_max = -1;
  double eta = -1.0;
  double beta = -1.0;
  int tasks = -1;
  std::string network;
  int n_l = -1;
  int hidden_width = -1;
  std::string init_method;
  double terrain_scale = -1.0;
  double lr = -1.0;
  int t_end = -1;
  std::string oracle_form;
  double oracle_bonus = -1.0;
  double oracle_jitter = -1.0;

  // shared by analysis subcommands
  std::string run_dir;
  std::string out_file;
  std::string task = "step";
  int episodes = 20;
  int eval_episodes = 5;
  int seeds = 5;
  int steps = 500;
  int interval = 50;
  int generation = -1;
  std::string kind = "scratch";
  int pretrain_i = 1;
  bool random_newborn = false;
  std::string newborn_file;
};

grl::RunConfig effective_config(const CLI::App& sub, const CliOptions& opt) {
  grl::RunConfig config;
  std::string path = opt.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("GRL_CONFIG")) path = env;
  }
  if (!path.empty()) {
    config = grl::load_run_config(path);
  } else {
    config = grl::default_run_config();
  }

  const auto passed = [&sub](const std::string& flag) {
    return sub.count(flag) > 0;
  };
  if (passed("--workers")) config.workers = opt.workers;
  if (passed("--checkpoint-every")) config.checkpoint_every = opt.checkpoint_every;
  if (passed("--generations")) config.evolution.generations = opt.generations;
  if (passed("--seed")) config.evolution.master_seed = static_cast<std::uint64_t>(opt.seed);
  if (passed("--output")) config.output_dir = opt.output_dir;
  if (passed("--np")) config.evolution.n_p = opt.np;
  if (passed("--tournament-size")) config.evolution.s = opt.tournament_size;
  if (passed("--lt")) config.evolution.lt = opt.lt;
  if (passed("--zeta")) config.evolution.zeta = opt.zeta;
  if (passed("--rho-max")) config.evolution.rho_max = opt.rho_max;
  if (passed("--eta")) config.evolution.eta = opt.eta;
  if (passed("--beta")) config.evolution.beta = opt.beta;
  if (passed("--tasks")) config.evolution.m = opt.tasks;
  if (passed("--network")) config.evolution.network = grl::network_tag_from_string(opt.network);
  if (passed("--layers-per-gene")) config.evolution.n_l = opt.n_l;
  if (passed("--hidden-width")) config.hidden_width = opt.hidden_width;
  if (passed("--init-method")) config.init_method = grl::init_method_from_string(opt.init_method);
  if (passed("--terrain-scale")) config.terrain_scale = opt.terrain_scale;
  if (passed("--lr")) config.ppo.lr = opt.lr;
  if (passed("--t-end")) config.env.t_end = opt.t_end;
  if (passed("--oracle")) config.oracle.enabled = opt.oracle;
  if (passed("--oracle-form")) {
    config.oracle.form = opt.oracle_form;
    config.oracle.enabled = true;
  }
  if (passed("--oracle-bonus")) config.oracle.bonus = opt.oracle_bonus;
  if (passed("--oracle-jitter")) config.oracle.jitter = opt.oracle_jitter;
  return config;
}

std::ofstream open_output(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  return out;
}

grl::CheckpointState load_final_state(const std::string& run_dir) {
  const std::string path = grl::latest_checkpoint(run_dir);
  if (path.empty()) {
    throw std::invalid_argument("no checkpoints under: " + run_dir);
  }
  return grl::load_checkpoint(path);
}

int cmd_evolve(const CLI::App& sub, const CliOptions& opt) {
  const grl::RunConfig config = effective_config(sub, opt);
  grl::validate(config);
  const grl::RunResult result = grl::run_evolution(config, opt.resume);
  if (result.last_generation < 0) {
    std::cout << "no generations requested; config written to "
              << config.output_dir << "/config.json\n";
  } else {
    std::cout << "completed generation " << result.last_generation
              << "; final checkpoint " << result.final_checkpoint << "\n";
  }
  return 0;
}

int cmd_baseline(const CliOptions& opt) {
  grl::BaselineConfig config;
  config.kind = grl::baseline_kind_from_string(opt.kind);
  config.task = grl::obstacle_from_string(opt.task);
  config.episodes = opt.episodes;
  config.pretrain_i = opt.pretrain_i;
  config.probe_interval = opt.interval;

  grl::CheckpointState state;
  grl::RunConfig run_config = grl::default_run_config();
  if (!opt.run_dir.empty()) {
    run_config = grl::load_run_config(
        (fs::path(opt.run_dir) / "config.json").string());
    state = load_final_state(opt.run_dir);
    config.pool = &state.pool;
  } else if (config.kind == grl::BaselineKind::kLearngene) {
    throw std::invalid_argument("baseline --kind learngene needs --run");
  }
  config.lt = run_config.evolution.lt;
  config.ppo = run_config.ppo;
  config.env = run_config.env;
  config.hidden_width = run_config.hidden_width;
  config.init_method = run_config.init_method;
  config.terrain_scale = run_config.terrain_scale;

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!opt.out_file.empty()) {
    file = open_output(opt.out_file);
    out = &file;
  }
  grl::CsvWriter csv(*out);
  csv.header("kind,task,seed,episode,reward,forward_distance,control_cost,steps");

  std::ofstream newborn_file;
  if (!opt.newborn_file.empty()) {
    newborn_file = open_output(opt.newborn_file);
    newborn_file << "kind,task,seed,forward_distance,control_cost,steps\n";
  }

  const std::uint64_t base_seed = opt.seed >= 0 ? static_cast<std::uint64_t>(opt.seed) : 1;
  for (int s = 0; s < opt.seeds; ++s) {
    config.seed = base_seed + static_cast<std::uint64_t>(s);
    const grl::BaselineResult result = grl::run_baseline(config);
    for (const grl::EpisodeRecord& e : result.curve) {
      csv.cell(opt.kind).cell(opt.task).cell(s).cell(e.episode_index);
      csv.cell(e.reward).cell(e.forward_distance).cell(e.control_cost).cell(e.steps);
      csv.end_row();
    }
    if (newborn_file.is_open()) {
      newborn_file << opt.kind << ',' << opt.task << ',' << s << ','
                   << grl::format_double(result.newborn.forward_distance) << ','
                   << grl::format_double(result.newborn.control_cost) << ','
                   << result.newborn.steps << '\n';
    }
  }
  return 0;
}

int cmd_instinct(const CliOptions& opt) {
  grl::BaselineConfig config;
  config.kind = opt.random_newborn ? grl::BaselineKind::kScratch
                                   : grl::BaselineKind::kLearngene;
  config.task = grl::obstacle_from_string(opt.task);
  config.episodes = 0;  // probe only, no training
  config.probe_interval = opt.interval;
  config.seed = opt.seed >= 0 ? static_cast<std::uint64_t>(opt.seed) : 1;

  grl::CheckpointState state;
  grl::RunConfig run_config = grl::default_run_config();
  if (!opt.run_dir.empty()) {
    run_config = grl::load_run_config(
        (fs::path(opt.run_dir) / "config.json").string());
    state = load_final_state(opt.run_dir);
    config.pool = &state.pool;
  } else if (!opt.random_newborn) {
    throw std::invalid_argument("instinct needs --run (or --random)");
  }
  config.ppo = run_config.ppo;
  config.env = run_config.env;
  config.env.t_end = opt.steps;
  config.hidden_width = run_config.hidden_width;
  config.init_method = run_config.init_method;
  config.terrain_scale = run_config.terrain_scale;

  const grl::BaselineResult result = grl::run_baseline(config);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!opt.out_file.empty()) {
    file = open_output(opt.out_file);
    out = &file;
  }
  grl::CsvWriter csv(*out);
  csv.header("step,x");
  for (const auto& [step, x] : result.newborn.trajectory) {
    csv.cell(step).cell(x).end_row();
  }
  std::cerr << "forward_distance=" << grl::format_double(result.newborn.forward_distance)
            << " control_cost=" << grl::format_double(result.newborn.control_cost)
            << " steps=" << result.newborn.steps;
  if (result.gene != 0) std::cerr << " gene=" << result.gene;
  std::cerr << "\n";
  return 0;
}

int cmd_transfer_matrix(const CliOptions& opt) {
  grl::TransferConfig config;
  config.seeds = opt.seeds;
  config.episodes = opt.episodes;
  config.eval_episodes = opt.eval_episodes;
  if (opt.seed >= 0) config.master_seed = static_cast<std::uint64_t>(opt.seed);
  if (!opt.config_path.empty()) {
    const grl::RunConfig base = grl::load_run_config(opt.config_path);
    config.ppo = base.ppo;
    config.env = base.env;
    config.hidden_width = base.hidden_width;
    config.init_method = base.init_method;
    config.terrain_scale = base.terrain_scale;
  }
  const grl::TransferMatrix matrix = grl::compute_transfer_matrix(config);
  if (opt.out_file.empty()) {
    grl::write_transfer_csv(matrix, std::cout);
  } else {
    std::ofstream out = open_output(opt.out_file);
    grl::write_transfer_csv(matrix, out);
  }
  return 0;
}

int cmd_trace(const CliOptions& opt) {
  const auto checkpoints = grl::list_checkpoints(opt.run_dir);
  if (checkpoints.empty()) {
    throw std::invalid_argument("no checkpoints under: " + opt.run_dir);
  }
  std::vector<grl::CheckpointState> states;
  states.reserve(checkpoints.size());
  for (const auto& [gen, path] : checkpoints) {
    states.push_back(grl::load_checkpoint(path));
  }
  const fs::path out_dir =
      opt.out_file.empty() ? fs::path(opt.run_dir) / "export" : fs::path(opt.out_file);
  fs::create_directories(out_dir);

  {
    std::ofstream out((out_dir / "form_trace.csv").string(), std::ios::binary);
    grl::write_trace_csv(grl::form_probability_trace(states), out);
  }
  {
    const fs::path events_path = fs::path(opt.run_dir) / "events.jsonl";
    std::vector<grl::Event> events;
    if (fs::exists(events_path)) {
      std::ifstream in(events_path);
      events = grl::read_events_jsonl(in);
    }
    std::ofstream out((out_dir / "parameter_change.csv").string(), std::ios::binary);
    grl::write_heatmap_csv(grl::parameter_change_heatmap(events), out);
  }
  std::cout << "wrote " << (out_dir / "form_trace.csv").string() << " and "
            << (out_dir / "parameter_change.csv").string() << "\n";
  return 0;
}

int cmd_replay_verify(const CliOptions& opt) {
  const grl::ReplayReport report = grl::replay_verify(opt.run_dir, opt.generation);
  std::cout << "checked " << report.checkpoints_checked << " checkpoint(s): "
            << (report.pass ? "pass" : "FAIL") << "\n";
  for (const std::string& line : report.failures) std::cout << "  " << line << "\n";
  return report.pass ? 0 : 1;
}

int cmd_export(const CliOptions& opt) {
  grl::export_metrics(opt.run_dir);
  std::cout << "wrote " << (fs::path(opt.run_dir) / "export").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"genetic reinforcement learning over procedural 1-D terrain"};
  app.require_subcommand(1);
  CliOptions opt;

  CLI::App* evolve = app.add_subcommand("evolve", "run the generation loop");
  evolve->add_option("--config", opt.config_path,
                     "run config JSON (default: $GRL_CONFIG or built-in profile)");
  evolve->add_flag("--resume", opt.resume, "continue from the newest checkpoint");
  evolve->add_option("--workers", opt.workers, "worker threads (0 = hardware)");
  evolve->add_option("--checkpoint-every", opt.checkpoint_every, "generations per checkpoint");
  evolve->add_option("--generations", opt.generations, "generations to run");
  evolve->add_option("--seed", opt.seed, "master seed");
  evolve->add_option("--output", opt.output_dir, "run output directory");
  evolve->add_option("--np", opt.np, "population size");
  evolve->add_option("--tournament-size", opt.tournament_size, "agents per tournament");
  evolve->add_option("--lt", opt.lt, "episodes per lifetime");
  evolve->add_option("--zeta", opt.zeta, "fitness offset");
  evolve->add_option("--rho-max", opt.rho_max, "pool residents per form");
  evolve->add_option("--eta", opt.eta, "ancestor update decay");
  evolve->add_option("--beta", opt.beta, "per-generation score decay");
  evolve->add_option("--tasks", opt.tasks, "training obstacle count (<= 4)");
  evolve->add_option("--network", opt.network, "learngene network: actor|critic");
  evolve->add_option("--layers-per-gene", opt.n_l, "layers per learngene form");
  evolve->add_option("--hidden-width", opt.hidden_width, "hidden layer width");
  evolve->add_option("--init-method", opt.init_method,
                     "orthogonal|xavier_uniform|xavier_normal|kaiming_uniform|kaiming_normal");
  evolve->add_option("--terrain-scale", opt.terrain_scale, "obstacle height multiplier");
  evolve->add_option("--lr", opt.lr, "Adam learning rate");
  evolve->add_option("--t-end", opt.t_end, "episode step cap");
  evolve->add_flag("--oracle", opt.oracle, "use the synthetic fitness oracle");
  evolve->add_option("--oracle-form", opt.oracle_form, "oracle's designated form (implies --oracle)");
  evolve->add_option("--oracle-bonus", opt.oracle_bonus, "oracle fitness bonus");
  evolve->add_option("--oracle-jitter", opt.oracle_jitter, "oracle fitness jitter");

  CLI::App* baseline = app.add_subcommand(
      "baseline", "scratch / learngene / pretrain learning curves");
  baseline->add_option("--kind", opt.kind, "scratch|learngene|pretrain")->required();
  baseline->add_option("--task", opt.task, "target obstacle");
  baseline->add_option("--run", opt.run_dir, "run directory providing pool and config");
  baseline->add_option("--episodes", opt.episodes, "training episodes on the target");
  baseline->add_option("--pretrain-i", opt.pretrain_i, "pretraining lifetimes");
  baseline->add_option("--seeds", opt.seeds, "number of seeds");
  baseline->add_option("--seed", opt.seed, "first seed");
  baseline->add_option("--interval", opt.interval, "probe sampling interval");
  baseline->add_option("--output", opt.out_file, "curve CSV path (default stdout)");
  baseline->add_option("--newborn-output", opt.newborn_file, "newborn probe CSV path");

  CLI::App* instinct = app.add_subcommand(
      "instinct", "probe a newborn agent without any training");
  instinct->add_option("--run", opt.run_dir, "run directory providing pool and config");
  instinct->add_flag("--random", opt.random_newborn, "probe a randomly initialized newborn");
  instinct->add_option("--task", opt.task, "obstacle to probe on");
  instinct->add_option("--seed", opt.seed, "seed");
  instinct->add_option("--steps", opt.steps, "probe step cap");
  instinct->add_option("--interval", opt.interval, "trajectory sampling interval");
  instinct->add_option("--output", opt.out_file, "trajectory CSV path (default stdout)");

  CLI::App* transfer = app.add_subcommand(
      "transfer-matrix", "cross-obstacle knowledge transfer rates");
  transfer->add_option("--config", opt.config_path, "run config JSON for env/ppo settings");
  transfer->add_option("--seeds", opt.seeds, "agents per source obstacle");
  transfer->add_option("--episodes", opt.episodes, "training episodes per agent");
  transfer->add_option("--eval-episodes", opt.eval_episodes, "evaluations per target");
  transfer->add_option("--seed", opt.seed, "master seed");
  transfer->add_option("--output", opt.out_file, "matrix CSV path (default stdout)");

  CLI::App* trace = app.add_subcommand(
      "trace", "form-probability trace and parameter-change table from a run");
  trace->add_option("--run", opt.run_dir, "run directory")->required();
  trace->add_option("--output", opt.out_file, "output directory (default <run>/export)");

  CLI::App* verify = app.add_subcommand(
      "replay-verify", "recompute pool scores from the event log");
  verify->add_option("--run", opt.run_dir, "run directory")->required();
  verify->add_option("--generation", opt.generation, "only check this generation");

  CLI::App* exp = app.add_subcommand("export", "write CSV exports for a run");
  exp->add_option("--run", opt.run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(evolve)) return cmd_evolve(*evolve, opt);
    if (app.got_subcommand(baseline)) return cmd_baseline(opt);
    if (app.got_subcommand(instinct)) return cmd_instinct(opt);
    if (app.got_subcommand(transfer)) return cmd_transfer_matrix(opt);
    if (app.got_subcommand(trace)) return cmd_trace(opt);
    if (app.got_subcommand(verify)) return cmd_replay_verify(opt);
    if (app.got_subcommand(exp)) return cmd_export(opt);
  } catch (const grl::NanAbortError& e) {
    std::cerr << "NaN abort: " << e.what() << "\n";
    return 3;
  } catch (const grl::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return e.kind() == grl::CheckpointError::Kind::kConfigHash ? 2 : 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
