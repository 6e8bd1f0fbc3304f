#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grl/event_log.hpp"
#include "grl/harness.hpp"

using namespace grl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("grl_harness_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

/// Small but complete run: 6 agents, 1 generation, short lifetimes.
RunConfig tiny_config(const fs::path& out) {
  RunConfig c = default_run_config();
  c.evolution.n_p = 6;
  c.evolution.lt = 2;
  c.evolution.generations = 1;
  c.evolution.rho_max = 2;
  c.evolution.master_seed = 901;
  c.env.t_end = 40;
  c.workers = 1;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("run config serializes through json and keeps defaults") {
  const RunConfig original = default_run_config();
  const std::string text = to_json_string(original);
  const RunConfig back = run_config_from_json_string(text);
  CHECK(back.evolution.n_p == original.evolution.n_p);
  CHECK(back.evolution.zeta == original.evolution.zeta);
  CHECK(back.evolution.eta == original.evolution.eta);
  CHECK(back.ppo.lr == original.ppo.lr);
  CHECK(back.env.t_end == original.env.t_end);
  CHECK(back.hidden_width == original.hidden_width);
  CHECK(back.output_dir == original.output_dir);
  CHECK(config_hash(back) == config_hash(original));

  // Partial JSON falls back to defaults for missing fields.
  const RunConfig sparse = run_config_from_json_string(
      R"({"evolution": {"n_p": 8}, "ppo": {"lr": 0.001}})");
  CHECK(sparse.evolution.n_p == 8);
  CHECK(sparse.ppo.lr == 0.001);
  CHECK(sparse.evolution.lt == default_run_config().evolution.lt);
  CHECK(sparse.hidden_width == default_run_config().hidden_width);

  CHECK_THROWS(run_config_from_json_string("{nope"));
}

TEST_CASE("config hash ignores run bookkeeping but tracks science knobs") {
  const RunConfig base = default_run_config();
  RunConfig c = base;
  c.workers = 17;
  c.checkpoint_every = 5;
  c.output_dir = "somewhere/else";
  c.evolution.generations = 999;
  CHECK(config_hash(c) == config_hash(base));

  c = base;
  c.ppo.lr = 1e-3;
  CHECK(config_hash(c) != config_hash(base));
  c = base;
  c.evolution.master_seed += 1;
  CHECK(config_hash(c) != config_hash(base));
  c = base;
  c.evolution.eta = 0.2;
  CHECK(config_hash(c) != config_hash(base));
  c = base;
  c.hidden_width = 8;
  CHECK(config_hash(c) != config_hash(base));
  c = base;
  c.oracle.enabled = true;
  CHECK(config_hash(c) != config_hash(base));
}

TEST_CASE("run config validation rejects bad values") {
  RunConfig c = default_run_config();
  CHECK_NOTHROW(validate(c));
  c.hidden_width = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = default_run_config();
  c.checkpoint_every = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = default_run_config();
  c.workers = -1;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = default_run_config();
  c.terrain_scale = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = default_run_config();
  c.oracle.enabled = true;
  c.oracle.form = "a:012";  // three layers in a two-layer run
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("zero generations writes only the config") {
  TempDir tmp;
  RunConfig c = tiny_config(tmp.path / "run");
  c.evolution.generations = 0;
  const RunResult r = run_evolution(c);
  CHECK(r.last_generation == -1);
  CHECK(r.final_checkpoint.empty());
  CHECK(fs::exists(tmp.path / "run" / "config.json"));
  CHECK(latest_checkpoint((tmp.path / "run").string()).empty());
  CHECK(list_checkpoints((tmp.path / "run").string()).empty());
}

TEST_CASE("a one-generation run produces the full artifact set") {
  TempDir tmp;
  const RunConfig c = tiny_config(tmp.path / "run");
  const RunResult r = run_evolution(c);
  CHECK(r.last_generation == 0);

  const std::string run_dir = c.output_dir;
  REQUIRE(fs::exists(r.final_checkpoint));
  CHECK(latest_checkpoint(run_dir) == r.final_checkpoint);
  CHECK(checkpoint_path(run_dir, 0) == r.final_checkpoint);
  const auto all = list_checkpoints(run_dir);
  REQUIRE(all.size() == 1);
  CHECK(all[0].first == 0);

  const CheckpointState state = load_checkpoint(r.final_checkpoint, config_hash(c));
  CHECK(state.generation == 0);
  CHECK(state.pool.bootstrapped());
  // 6 agents in groups of 3 -> 2 winners; generation 0 only bootstraps.
  CHECK(state.pool.node_count() ==
        state.pool.forms().size() * static_cast<std::size_t>(c.evolution.rho_max));

  // episodes.csv: header + n_p * lt rows.
  const std::string episodes = read_file(fs::path(run_dir) / "episodes.csv");
  CHECK(count_lines(episodes) == 1 + 6 * 2);
  // fitness.csv: header + n_p rows, winner column filled.
  const std::string fitness = read_file(fs::path(run_dir) / "fitness.csv");
  CHECK(count_lines(fitness) == 1 + 6);

  // Event log covers the bootstrap.
  std::ifstream ev(fs::path(run_dir) / "events.jsonl");
  const auto events = read_events_jsonl(ev);
  int births = 0;
  int admits = 0;
  int decays = 0;
  for (const Event& e : events) {
    if (std::holds_alternative<BirthEvent>(e)) ++births;
    if (std::holds_alternative<AdmitEvent>(e)) ++admits;
    if (std::holds_alternative<DecayEvent>(e)) ++decays;
  }
  CHECK(births == static_cast<int>(state.pool.node_count()));
  CHECK(admits == births);
  CHECK(decays == 1);
}

TEST_CASE("the loop is a pure function of config and seed") {
  TempDir tmp;
  RunConfig a = tiny_config(tmp.path / "a");
  RunConfig b = tiny_config(tmp.path / "b");
  a.evolution.generations = 2;
  b.evolution.generations = 2;
  b.workers = 3;  // different parallelism must not matter
  run_evolution(a);
  run_evolution(b);

  for (int gen = 0; gen < 2; ++gen) {
    const std::string pa = checkpoint_path(a.output_dir, gen);
    const std::string pb = checkpoint_path(b.output_dir, gen);
    CHECK(read_file(pa) == read_file(pb));
    CHECK(read_file(checkpoint_blob_path(pa)) == read_file(checkpoint_blob_path(pb)));
  }
  CHECK(read_file(fs::path(a.output_dir) / "events.jsonl") ==
        read_file(fs::path(b.output_dir) / "events.jsonl"));
  CHECK(read_file(fs::path(a.output_dir) / "episodes.csv") ==
        read_file(fs::path(b.output_dir) / "episodes.csv"));
}

TEST_CASE("resume reproduces an uninterrupted run byte for byte") {
  TempDir tmp;
  RunConfig straight = tiny_config(tmp.path / "straight");
  straight.evolution.generations = 3;
  run_evolution(straight);

  RunConfig split = tiny_config(tmp.path / "split");
  split.evolution.generations = 2;
  run_evolution(split);
  split.evolution.generations = 3;
  run_evolution(split, /*resume=*/true);

  const std::string pa = checkpoint_path(straight.output_dir, 2);
  const std::string pb = checkpoint_path(split.output_dir, 2);
  CHECK(read_file(pa) == read_file(pb));
  CHECK(read_file(checkpoint_blob_path(pa)) == read_file(checkpoint_blob_path(pb)));
  CHECK(read_file(fs::path(straight.output_dir) / "events.jsonl") ==
        read_file(fs::path(split.output_dir) / "events.jsonl"));
}

TEST_CASE("resume refuses a directory built from a different config") {
  TempDir tmp;
  RunConfig c = tiny_config(tmp.path / "run");
  run_evolution(c);
  c.ppo.lr = 1e-3;  // changes the config hash
  c.evolution.generations = 2;
  try {
    run_evolution(c, /*resume=*/true);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::kConfigHash);
  }
}

TEST_CASE("replay verification passes for honest logs and catches tampering") {
  TempDir tmp;
  RunConfig c = tiny_config(tmp.path / "run");
  c.evolution.generations = 2;
  run_evolution(c);

  const ReplayReport ok = replay_verify(c.output_dir);
  CHECK(ok.pass);
  CHECK(ok.checkpoints_checked == 2);
  CHECK(ok.failures.empty());

  // Tamper with one score increment in the log; replay must notice.
  const fs::path log_path = fs::path(c.output_dir) / "events.jsonl";
  std::ifstream in(log_path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  in.close();
  bool touched = false;
  for (std::string& line : lines) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.at("type") == "decay") {
      j["factor"] = 0.5;
      line = j.dump();
      touched = true;
      break;
    }
  }
  REQUIRE(touched);
  std::ofstream out(log_path, std::ios::trunc);
  for (const std::string& line : lines) out << line << '\n';
  out.close();

  const ReplayReport bad = replay_verify(c.output_dir);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.failures.empty());
}

TEST_CASE("export writes derived tables and is idempotent") {
  TempDir tmp;
  RunConfig c = tiny_config(tmp.path / "run");
  run_evolution(c);
  export_metrics(c.output_dir);

  const fs::path ex = fs::path(c.output_dir) / "export";
  for (const char* name :
       {"rewards.csv", "fitness.csv", "pool_scores.csv", "form_trace.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(ex / name));
    CHECK(count_lines(read_file(ex / name)) >= 1);
  }

  const std::string before = read_file(ex / "pool_scores.csv");
  export_metrics(c.output_dir);
  CHECK(read_file(ex / "pool_scores.csv") == before);
}

TEST_CASE("export on an empty run directory yields headers only") {
  TempDir tmp;
  fs::create_directories(tmp.path / "bare");
  export_metrics((tmp.path / "bare").string());
  const fs::path ex = tmp.path / "bare" / "export";
  REQUIRE(fs::exists(ex / "rewards.csv"));
  CHECK(count_lines(read_file(ex / "rewards.csv")) == 1);
  CHECK(count_lines(read_file(ex / "form_trace.csv")) == 1);
}

TEST_CASE("the fitness oracle runs the loop without training") {
  TempDir tmp;
  RunConfig c = tiny_config(tmp.path / "run");
  c.evolution.generations = 4;
  c.oracle.enabled = true;
  c.oracle.form = "a:01";
  c.oracle.bonus = 1000.0;
  c.oracle.jitter = 1.0;
  const RunResult r = run_evolution(c);
  CHECK(r.last_generation == 3);
  const CheckpointState state = load_checkpoint(r.final_checkpoint, config_hash(c));
  CHECK(state.pool.bootstrapped());
  const ReplayReport rep = replay_verify(c.output_dir);
  CHECK(rep.pass);
  CHECK(rep.checkpoints_checked == 4);
}
