#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "grl/event_log.hpp"
#include "grl/network.hpp"
#include "grl/ppo.hpp"
#include "grl/rng.hpp"
#include "grl/terrain.hpp"

namespace grl {

struct EvolutionConfig {
  int n_p = 12;             // population size
  int s = 3;                // tournament size
  int lt = 20;              // lifetime episodes
  double zeta = 1000.0;     // fitness offset
  int rho_max = 7;          // pool residents per form
  double eta = 0.1;         // parental decay coefficient
  double beta = 0.02;       // per-generation score decay
  int m = 4;                // number of training tasks
  NetworkTag network = NetworkTag::kActor;
  int n_l = 2;              // layers per learngene form
  int generations = 40;
  std::uint64_t master_seed = 1;
};

/// Throws std::invalid_argument on any out-of-range field.
void validate(const EvolutionConfig& config);

struct FitnessRecord {
  int agent_id = 0;
  ObstacleKind task = ObstacleKind::kStep;
  double raw = 0.0;         // mean episode reward + zeta
  double normalized = 0.0;  // f-tilde
};

/// mean(r_e) + zeta. Throws on an empty list.
double compute_fitness(const std::vector<EpisodeRecord>& episodes, double zeta);

/// Per-task min-max normalization scaled by the population mean raw fitness.
/// A task group whose min equals its max gets 0.5 before scaling.
void normalize_fitness(std::vector<FitnessRecord>& records);

struct TournamentResult {
  std::vector<std::vector<int>> groups;  // agent ids, partition of the population
  std::vector<int> winners;              // one per group, in group order
};

/// Shuffle the population, chunk into groups of s (last group may be short),
/// highest normalized fitness wins, ties break toward the lower agent_id.
TournamentResult run_tournaments(const std::vector<FitnessRecord>& records,
                                 int s, std::uint64_t seed);

/// Birth score: f_tilde / sum of effective layer widths of the form.
double score_candidate(double f_tilde, const LearngeneForm& form,
                       const std::array<double, 6>& elw);

/// Layer-set overlap weighted by effective layer width:
/// sum elw(intersection) / sum elw(union). Forms over different networks
/// have similarity 0.
double learngene_similarity(const LearngeneForm& a, const LearngeneForm& b,
                            const std::array<double, 6>& elw);

/// One candidate learngene and its lineage bookkeeping. Nodes are never
/// deleted; eviction only clears in_pool.
struct GeneNode {
  GeneId id = 0;
  GeneId parent = 0;  // 0 for generation-0 roots
  std::vector<GeneId> children;
  double score = 0.0;
  bool in_pool = false;
  int birth_generation = 0;
  LearngenePayload payload;  // payload.form is the node's form
};

/// Gene Pool and Gene Tree in one structure: fixed per-form slots of
/// pool residents plus the full lineage forest over every gene ever born.
class GenePool {
 public:
  GenePool() = default;
  GenePool(NetworkTag network, int n_l, int rho_max, NetworkArchitecture arch);

  NetworkTag network() const { return network_; }
  int n_l() const { return n_l_; }
  int rho_max() const { return rho_max_; }
  const NetworkArchitecture& arch() const { return arch_; }
  const std::array<double, 6>& elw() const { return elw_; }

  const std::vector<LearngeneForm>& forms() const { return forms_; }
  const std::vector<GeneId>& residents(FormKey key) const;
  const GeneNode& node(GeneId id) const;
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<GeneNode>& nodes() const { return nodes_; }
  bool bootstrapped() const { return !nodes_.empty(); }

  double total_score() const;

  /// Share of total resident score per form, aligned with forms().
  /// Throws when the pool is empty or all scores are zero.
  std::vector<double> form_probabilities() const;

  /// Form probabilities with the paternal form's weight boosted to 1 and
  /// the result renormalized; null paternal reduces to form_probabilities.
  std::vector<double> extraction_probabilities(const LearngeneForm* paternal) const;

  /// Per-resident inheritance probability p_form * s_g / s_form, in the
  /// canonical form/slot order sample_inheritance draws from.
  std::vector<std::pair<GeneId, double>> inheritance_probabilities() const;

  /// Samples a resident with probability p_form * s_g / s_form
  /// (equivalently, proportional to its score).
  GeneId sample_inheritance(Rng& rng) const;

  /// A tournament winner as seen by the pool.
  struct WinnerView {
    int agent_id = 0;
    const AgentGenome* genome = nullptr;  // trained parameters
    double f_tilde = 0.0;
    GeneId paternal_gene = 0;  // 0 when nothing was inherited
  };

  /// Generation-0 bootstrap: fills every form slot with rho_max residents
  /// whose payloads are extracted from winners drawn uniformly with
  /// replacement. These genes are the roots of the forest.
  void bootstrap(const std::vector<WinnerView>& winners, Rng& rng,
                 EventLog* events);

  /// One candidate per winner (form sampled from extraction probabilities,
  /// leaf attached under the paternal gene), ancestor score updates for every
  /// new leaf, then per-form replacement: strictly better candidates replace
  /// the lowest-scoring residents, at most two per form per generation.
  void extract_and_replace(const std::vector<WinnerView>& winners,
                           int generation, double eta, Rng& rng,
                           EventLog* events);

  /// Walks leaf -> root; every pool-resident ancestor at path distance l
  /// from the leaf gains sim(ancestor, its child on the path) * eta^(l+1)
  /// * f_tilde. Non-resident ancestors are skipped but the walk continues.
  void update_ancestor_scores(GeneId leaf, double f_tilde, double eta,
                              int generation, EventLog* events);

  /// Multiplies every resident score by (1 - beta).
  void apply_decay(double beta, int generation, EventLog* events);

  /// Checkpoint restore. Validates residency and tree integrity.
  static GenePool from_parts(NetworkTag network, int n_l, int rho_max,
                             NetworkArchitecture arch,
                             std::vector<GeneNode> nodes,
                             std::map<FormKey, std::vector<GeneId>> residents);

  const std::map<FormKey, std::vector<GeneId>>& resident_map() const {
    return residents_;
  }

 private:
  GeneId add_node(GeneId parent, int generation, LearngenePayload payload,
                  double score);
  GeneNode& node_mut(GeneId id);

  NetworkTag network_ = NetworkTag::kActor;
  int n_l_ = 0;
  int rho_max_ = 0;
  NetworkArchitecture arch_;
  std::array<double, 6> elw_{};
  std::vector<LearngeneForm> forms_;
  std::map<FormKey, std::vector<GeneId>> residents_;
  std::vector<GeneNode> nodes_;  // nodes_[id - 1]
};

/// One population member during a generation.
struct Agent {
  int agent_id = 0;
  AgentGenome genome;
  ObstacleKind task = ObstacleKind::kStep;
  GeneId paternal_gene = 0;  // 0 = fully random birth
};

/// Builds the next population: generation 0 is fully random; afterwards each
/// agent samples a pool gene (score-proportional), transplants it into a
/// fresh randomly initialized genome, and remembers it as its paternal gene.
/// Tasks are drawn uniformly from the first `m` training obstacles. All
/// randomness is derived from (master_seed, generation, agent_id), so the
/// result is independent of construction order.
std::vector<Agent> initialize_generation(const GenePool& pool,
                                         const EvolutionConfig& config,
                                         int obs_dim, int hidden_width,
                                         int action_dim, InitMethod method,
                                         int generation, EventLog* events);

}  // namespace grl
