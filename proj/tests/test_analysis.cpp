#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "grl/analysis.hpp"
#include "grl/harness.hpp"
#include "oracles.hpp"

using namespace grl;

namespace {

Heightfield flat_track() {
  Heightfield hf;
  hf.kind = ObstacleKind::kStep;
  hf.track_length = 60.0;
  hf.span_start = 10.0;
  hf.span_end = 45.0;
  hf.seed = 0;
  hf.samples.assign(1201, 0.0);
  return hf;
}

AgentGenome zeroed_genome() {
  AgentGenome g = make_genome(6, 16, 2, InitMethod::kOrthogonal, 3);
  for (auto& lp : g.actor.layers) {
    lp.weights.setZero();
    lp.bias.setZero();
  }
  for (auto& lp : g.critic.layers) {
    lp.weights.setZero();
    lp.bias.setZero();
  }
  return g;
}

/// Minimal two-resident pool with all probability mass on one form.
GenePool crafted_pool(double score_a, double score_b) {
  const NetworkArchitecture arch{6, 16, 5, 2};
  const AgentGenome donor = make_genome(6, 16, 2, InitMethod::kOrthogonal, 9);
  const auto forms = enumerate_forms(NetworkTag::kActor, 2);
  std::vector<GeneNode> nodes;
  std::map<FormKey, std::vector<GeneId>> residents;
  GeneNode a;
  a.id = 1;
  a.score = score_a;
  a.payload = extract_learngene(donor, forms[0]);
  GeneNode b;
  b.id = 2;
  b.score = score_b;
  b.payload = extract_learngene(donor, forms[0]);
  residents[form_key(forms[0])] = {1, 2};
  nodes.push_back(std::move(a));
  nodes.push_back(std::move(b));
  return GenePool::from_parts(NetworkTag::kActor, 2, 7, arch, std::move(nodes),
                              std::move(residents));
}

}  // namespace

TEST_CASE("knowledge transfer rate anchors at 0, 1, and the worked value") {
  CHECK(knowledge_transfer_rate(1000.0, 1000.0, 500.0) == 1.0);
  CHECK(knowledge_transfer_rate(500.0, 1000.0, 500.0) == 0.0);
  CHECK(knowledge_transfer_rate(800.0, 1000.0, 500.0) ==
        doctest::Approx(0.6).epsilon(1e-12));
  CHECK(knowledge_transfer_rate(800.0, 1000.0, 500.0) ==
        doctest::Approx(oracle::transfer_rate(800.0, 1000.0, 500.0)).epsilon(1e-12));
  // Negative transfer is representable.
  CHECK(knowledge_transfer_rate(300.0, 1000.0, 500.0) < 0.0);
  CHECK_THROWS_AS(knowledge_transfer_rate(800.0, 500.0, 500.0),
                  std::invalid_argument);
}

TEST_CASE("instinct probe: flat rollout of a zeroed genome goes nowhere") {
  const AgentGenome g = zeroed_genome();
  const AgentGenome before = g;
  TerrainEnv env(flat_track(), EnvParams{});
  const InstinctReport r = instinct_probe(g, env, 200, 50);
  CHECK(r.forward_distance == 0.0);
  CHECK(r.control_cost == 0.0);  // zero action has zero cost
  CHECK(r.steps == 200);
  REQUIRE(r.trajectory.size() == 5);  // steps 0, 50, 100, 150, 200
  CHECK(r.trajectory.front().first == 0);
  CHECK(r.trajectory.back().first == 200);
  for (const auto& [step, x] : r.trajectory) CHECK(x == 0.0);
  // The genome is untouched.
  CHECK(pack_params(g) == pack_params(before));
}

TEST_CASE("instinct probe is deterministic and validates its arguments") {
  const AgentGenome g = make_genome(6, 16, 2, InitMethod::kOrthogonal, 17);
  TerrainEnv env1(generate_heightfield(ObstacleKind::kBumpy, 5), EnvParams{});
  TerrainEnv env2(generate_heightfield(ObstacleKind::kBumpy, 5), EnvParams{});
  const InstinctReport a = instinct_probe(g, env1, 300, 25);
  const InstinctReport b = instinct_probe(g, env2, 300, 25);
  CHECK(a.forward_distance == b.forward_distance);
  CHECK(a.control_cost == b.control_cost);
  CHECK(a.trajectory == b.trajectory);

  TerrainEnv env3(flat_track(), EnvParams{});
  CHECK_THROWS_AS(instinct_probe(g, env3, 10, 20), std::invalid_argument);
  CHECK_THROWS_AS(instinct_probe(g, env3, 10, 0), std::invalid_argument);
}

TEST_CASE("form probability trace mirrors the pool distribution") {
  CheckpointState state;
  state.generation = 7;
  state.pool = crafted_pool(30.0, 10.0);
  const ConvergenceTrace trace = form_probability_trace({state});
  REQUIRE(trace.generations.size() == 1);
  CHECK(trace.generations[0] == 7);
  REQUIRE(trace.forms.size() == 15);
  REQUIRE(trace.probability.size() == 1);
  CHECK(trace.probability[0][0] == doctest::Approx(1.0).epsilon(1e-12));
  double sum = 0.0;
  for (double p : trace.probability[0]) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(form_probability_trace({}), std::invalid_argument);

  std::ostringstream out;
  write_trace_csv(trace, out);
  const std::string text = out.str();
  CHECK(text.find("generation") == 0);
  CHECK(text.find("a:01") != std::string::npos);
}

TEST_CASE("parameter change heatmap averages manhattan drift per form") {
  const AgentGenome donor = make_genome(6, 16, 2, InitMethod::kOrthogonal, 23);
  const auto forms = enumerate_forms(NetworkTag::kActor, 2);
  const LearngeneForm form = forms[0];
  const LearngenePayload birth_payload = extract_learngene(donor, form);

  LearngenePayload drifted = birth_payload;
  for (auto& lp : drifted.layer_params) {
    lp.weights.array() += 0.1;
    lp.bias.array() += 0.1;
  }
  LearngenePayload same = birth_payload;

  std::vector<Event> events;
  BirthEvent birth;
  birth.generation = 0;
  birth.gene_id = 1;
  birth.payload = birth_payload;
  events.push_back(birth);
  events.push_back(InheritEvent{1, 0, 1});
  events.push_back(InheritEvent{1, 1, 1});
  CarrierEndEvent e0;
  e0.generation = 1;
  e0.agent_id = 0;
  e0.gene_id = 1;
  e0.payload = drifted;
  events.push_back(e0);
  CarrierEndEvent e1;
  e1.generation = 1;
  e1.agent_id = 1;
  e1.gene_id = 1;
  e1.payload = same;
  events.push_back(e1);

  const auto rows = parameter_change_heatmap(events);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].generation == 1);
  CHECK(rows[0].form == form);
  CHECK(rows[0].carriers == 2);
  // One carrier drifted uniformly by 0.1, the other not at all.
  CHECK(rows[0].mean_change == doctest::Approx(0.05).epsilon(1e-12));

  // A carrier of an unrecorded gene is an error.
  CarrierEndEvent orphan;
  orphan.generation = 1;
  orphan.gene_id = 99;
  orphan.payload = same;
  std::vector<Event> bad = {orphan};
  CHECK_THROWS(parameter_change_heatmap(bad));

  std::ostringstream out;
  write_heatmap_csv(rows, out);
  CHECK(out.str().find("generation,form,mean_change,carriers") == 0);
}

TEST_CASE("bootstrap confidence intervals behave statistically") {
  SUBCASE("constant data collapses the interval") {
    const BootstrapCi ci = bootstrap_ci({2.5, 2.5, 2.5, 2.5}, 0.95, 500, 1);
    CHECK(ci.mean == 2.5);
    CHECK(ci.low == 2.5);
    CHECK(ci.high == 2.5);
  }

  SUBCASE("interval brackets the mean and is seed-deterministic") {
    std::vector<double> values;
    std::mt19937_64 gen(7);
    std::normal_distribution<double> dist(10.0, 2.0);
    for (int i = 0; i < 50; ++i) values.push_back(dist(gen));
    const BootstrapCi a = bootstrap_ci(values, 0.95, 2000, 42);
    const BootstrapCi b = bootstrap_ci(values, 0.95, 2000, 42);
    CHECK(a.low == b.low);
    CHECK(a.high == b.high);
    CHECK(a.low <= a.mean);
    CHECK(a.mean <= a.high);
    CHECK(a.low < a.high);
  }

  SUBCASE("width approximates the CLT prediction for a standard normal") {
    std::vector<double> values;
    std::mt19937_64 gen(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    const int n = 200;
    for (int i = 0; i < n; ++i) values.push_back(dist(gen));
    const BootstrapCi ci = bootstrap_ci(values, 0.95, 4000, 3);
    const double expected_width = 2.0 * 1.959963984540054 / std::sqrt(n);
    CHECK(ci.high - ci.low > 0.7 * expected_width);
    CHECK(ci.high - ci.low < 1.3 * expected_width);
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(bootstrap_ci({1.0}, 0.95, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_ci({1.0, 2.0}, 0.0, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_ci({1.0, 2.0}, 1.0, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(bootstrap_ci({1.0, 2.0}, 0.95, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("baseline kinds round-trip through strings") {
  CHECK(to_string(BaselineKind::kScratch) == "scratch");
  CHECK(to_string(BaselineKind::kLearngene) == "learngene");
  CHECK(to_string(BaselineKind::kPretrain) == "pretrain");
  CHECK(baseline_kind_from_string("scratch") == BaselineKind::kScratch);
  CHECK(baseline_kind_from_string("learngene") == BaselineKind::kLearngene);
  CHECK(baseline_kind_from_string("pretrain") == BaselineKind::kPretrain);
  CHECK_THROWS(baseline_kind_from_string("finetune"));
}

TEST_CASE("scratch baselines are reproducible and produce full curves") {
  BaselineConfig c;
  c.kind = BaselineKind::kScratch;
  c.task = ObstacleKind::kBumpy;
  c.episodes = 3;
  c.seed = 5;
  c.env.t_end = 40;
  c.probe_interval = 10;
  const BaselineResult a = run_baseline(c);
  const BaselineResult b = run_baseline(c);
  REQUIRE(a.curve.size() == 3);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].reward == b.curve[i].reward);
    CHECK(a.curve[i].steps == b.curve[i].steps);
  }
  CHECK(a.gene == 0);
  CHECK_FALSE(a.nan_flag);
  CHECK(a.newborn.trajectory == b.newborn.trajectory);
}

TEST_CASE("learngene baselines transplant from the pool before any training") {
  GenePool pool = crafted_pool(30.0, 0.0);  // resident 1 holds all the mass
  BaselineConfig c;
  c.kind = BaselineKind::kLearngene;
  c.task = ObstacleKind::kStep;
  c.episodes = 0;  // probe only
  c.seed = 6;
  c.env.t_end = 40;
  c.probe_interval = 10;
  c.pool = &pool;
  const BaselineResult r = run_baseline(c);
  CHECK(r.curve.empty());
  CHECK(r.gene == 1);  // the only resident with score mass
  CHECK(r.newborn.steps > 0);
  CHECK_FALSE(r.newborn.trajectory.empty());

  // Without a pool the learngene kind must refuse to run.
  BaselineConfig bad = c;
  bad.pool = nullptr;
  CHECK_THROWS_AS(run_baseline(bad), std::invalid_argument);
}

TEST_CASE("pretraining changes the starting point but not the terrain") {
  BaselineConfig scratch;
  scratch.kind = BaselineKind::kScratch;
  scratch.task = ObstacleKind::kRubble;
  scratch.episodes = 2;
  scratch.lt = 2;
  scratch.seed = 8;
  scratch.env.t_end = 30;
  scratch.probe_interval = 10;

  BaselineConfig pre = scratch;
  pre.kind = BaselineKind::kPretrain;
  pre.pretrain_i = 1;

  const BaselineResult rs = run_baseline(scratch);
  const BaselineResult rp = run_baseline(pre);
  REQUIRE(rs.curve.size() == 2);
  REQUIRE(rp.curve.size() == 2);
  // Pretraining moved the policy, so the first target episode differs.
  CHECK(rs.curve[0].reward != rp.curve[0].reward);
}

TEST_CASE("transfer csv layout and micro transfer matrix") {
  TransferConfig tc;
  tc.seeds = 1;
  tc.episodes = 2;
  tc.eval_episodes = 1;
  tc.env.t_end = 30;
  tc.master_seed = 3;
  const TransferMatrix m = compute_transfer_matrix(tc);
  REQUIRE(m.kinds.size() == 8);
  CHECK(m.rates.rows() == 8);
  CHECK(m.rates.cols() == 8);
  CHECK(m.anchors_w.size() == 8);
  CHECK(m.anchors_r.size() == 8);
  for (int i = 0; i < 8; ++i) {
    if (m.anchors_r[i] != m.anchors_w[i]) {
      CHECK(m.rates(i, i) == 1.0);  // exact, by construction
    } else {
      CHECK(std::isnan(m.rates(i, i)));
    }
  }

  // Deterministic in the master seed.
  const TransferMatrix m2 = compute_transfer_matrix(tc);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (std::isnan(m.rates(i, j))) {
        CHECK(std::isnan(m2.rates(i, j)));
      } else {
        CHECK(m.rates(i, j) == m2.rates(i, j));
      }
    }
  }

  std::ostringstream out;
  write_transfer_csv(m, out);
  const std::string text = out.str();
  CHECK(text.find("trained_on") == 0);
  CHECK(text.find("step") != std::string::npos);
  CHECK(text.find("square") != std::string::npos);
}
