#include "grl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace grl {

void validate(const EvolutionConfig& config) {
  if (config.n_p < 1) throw std::invalid_argument("n_p must be >= 1");
  if (config.s < 2) throw std::invalid_argument("s must be >= 2");
  if (config.n_p < config.s) throw std::invalid_argument("n_p must be >= s");
  if (config.lt < 1) throw std::invalid_argument("lt must be >= 1");
  if (config.rho_max < 1) throw std::invalid_argument("rho_max must be >= 1");
  if (config.eta < 0.0) throw std::invalid_argument("eta must be >= 0");
  if (config.beta < 0.0 || config.beta >= 1.0)
    throw std::invalid_argument("beta must be in [0, 1)");
  if (config.m < 1 || config.m > kTrainingObstacleCount)
    throw std::invalid_argument("m must be in [1, 4]");
  if (config.n_l < 1 || config.n_l > 5)
    throw std::invalid_argument("n_l must be in [1, 5]");
  if (config.generations < 0)
    throw std::invalid_argument("generations must be >= 0");
}

double compute_fitness(const std::vector<EpisodeRecord>& episodes, double zeta) {
  if (episodes.empty()) throw std::invalid_argument("compute_fitness: no episodes");
  double sum = 0.0;
  for (const auto& e : episodes) sum += e.reward;
  return sum / static_cast<double>(episodes.size()) + zeta;
}

void normalize_fitness(std::vector<FitnessRecord>& records) {
  if (records.empty()) return;
  double mean = 0.0;
  for (const auto& r : records) mean += r.raw;
  mean /= static_cast<double>(records.size());

  struct Extent {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  std::unordered_map<int, Extent> extents;
  for (const auto& r : records) {
    auto& e = extents[static_cast<int>(r.task)];
    e.lo = std::min(e.lo, r.raw);
    e.hi = std::max(e.hi, r.raw);
  }
  for (auto& r : records) {
    const auto& e = extents[static_cast<int>(r.task)];
    const double unit = e.hi > e.lo ? (r.raw - e.lo) / (e.hi - e.lo) : 0.5;
    r.normalized = unit * mean;
  }
}

TournamentResult run_tournaments(const std::vector<FitnessRecord>& records,
                                 int s, std::uint64_t seed) {
  if (s < 2) throw std::invalid_argument("run_tournaments: s must be >= 2");
  std::unordered_map<int, const FitnessRecord*> by_id;
  std::vector<int> ids;
  ids.reserve(records.size());
  for (const auto& r : records) {
    ids.push_back(r.agent_id);
    by_id[r.agent_id] = &r;
  }
  Rng rng = make_rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  TournamentResult result;
  for (std::size_t start = 0; start < ids.size(); start += static_cast<std::size_t>(s)) {
    const std::size_t end = std::min(ids.size(), start + static_cast<std::size_t>(s));
    std::vector<int> group(ids.begin() + static_cast<std::ptrdiff_t>(start),
                           ids.begin() + static_cast<std::ptrdiff_t>(end));
    int winner = group.front();
    for (int id : group) {
      const double f = by_id.at(id)->normalized;
      const double best = by_id.at(winner)->normalized;
      if (f > best || (f == best && id < winner)) winner = id;
    }
    result.groups.push_back(std::move(group));
    result.winners.push_back(winner);
  }
  return result;
}

double score_candidate(double f_tilde, const LearngeneForm& form,
                       const std::array<double, 6>& elw) {
  double denom = 0.0;
  for (int l : form.layer_indices) denom += elw[static_cast<std::size_t>(l)];
  if (denom <= 0.0) throw std::invalid_argument("score_candidate: zero elw sum");
  return f_tilde / denom;
}

double learngene_similarity(const LearngeneForm& a, const LearngeneForm& b,
                            const std::array<double, 6>& elw) {
  if (a.network != b.network) return 0.0;
  double inter = 0.0;
  double uni = 0.0;
  for (int l = 0; l < 6; ++l) {
    const bool in_a = std::find(a.layer_indices.begin(), a.layer_indices.end(), l) !=
                      a.layer_indices.end();
    const bool in_b = std::find(b.layer_indices.begin(), b.layer_indices.end(), l) !=
                      b.layer_indices.end();
    if (in_a && in_b) inter += elw[static_cast<std::size_t>(l)];
    if (in_a || in_b) uni += elw[static_cast<std::size_t>(l)];
  }
  return uni > 0.0 ? inter / uni : 0.0;
}

GenePool::GenePool(NetworkTag network, int n_l, int rho_max,
                   NetworkArchitecture arch)
    : network_(network), n_l_(n_l), rho_max_(rho_max), arch_(arch) {
  if (n_l < 1 || n_l > 5) throw std::invalid_argument("GenePool: n_l out of range");
  if (rho_max < 1) throw std::invalid_argument("GenePool: rho_max must be >= 1");
  elw_ = layer_elw_table(arch_);
  forms_ = enumerate_forms(network_, n_l_);
  for (const auto& f : forms_) residents_[form_key(f)] = {};
}

const std::vector<GeneId>& GenePool::residents(FormKey key) const {
  return residents_.at(key);
}

const GeneNode& GenePool::node(GeneId id) const {
  if (id == 0 || id > nodes_.size()) throw std::out_of_range("GenePool: bad gene id");
  return nodes_[id - 1];
}

GeneNode& GenePool::node_mut(GeneId id) {
  if (id == 0 || id > nodes_.size()) throw std::out_of_range("GenePool: bad gene id");
  return nodes_[id - 1];
}

double GenePool::total_score() const {
  double total = 0.0;
  for (const auto& [key, ids] : residents_) {
    for (GeneId id : ids) total += node(id).score;
  }
  return total;
}

std::vector<double> GenePool::form_probabilities() const {
  const double total = total_score();
  if (!(total > 0.0)) {
    throw std::runtime_error("form_probabilities: pool holds no score mass");
  }
  std::vector<double> p;
  p.reserve(forms_.size());
  for (const auto& f : forms_) {
    double s = 0.0;
    for (GeneId id : residents_.at(form_key(f))) s += node(id).score;
    p.push_back(s / total);
  }
  return p;
}

std::vector<double> GenePool::extraction_probabilities(
    const LearngeneForm* paternal) const {
  std::vector<double> h = form_probabilities();
  if (paternal != nullptr) {
    const FormKey target = form_key(*paternal);
    double sum = 0.0;
    for (std::size_t i = 0; i < forms_.size(); ++i) {
      if (form_key(forms_[i]) == target) h[i] = 1.0;
      sum += h[i];
    }
    for (double& v : h) v /= sum;
  }
  return h;
}

std::vector<std::pair<GeneId, double>> GenePool::inheritance_probabilities() const {
  const std::vector<double> p_form = form_probabilities();
  std::vector<std::pair<GeneId, double>> out;
  for (std::size_t i = 0; i < forms_.size(); ++i) {
    const std::vector<GeneId>& ids = residents_.at(form_key(forms_[i]));
    double s_form = 0.0;
    for (GeneId id : ids) s_form += node(id).score;
    for (GeneId id : ids) {
      const double p_g = s_form > 0.0 ? p_form[i] * node(id).score / s_form : 0.0;
      out.emplace_back(id, p_g);
    }
  }
  return out;
}

GeneId GenePool::sample_inheritance(Rng& rng) const {
  const double total = total_score();
  if (nodes_.empty() || !(total > 0.0)) {
    throw std::runtime_error("sample_inheritance: pool is empty");
  }
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double cum = 0.0;
  GeneId last = 0;
  for (const auto& f : forms_) {
    for (GeneId id : residents_.at(form_key(f))) {
      cum += node(id).score;
      last = id;
      if (u < cum) return id;
    }
  }
  return last;  // guards the measure-zero u == total edge
}

GeneId GenePool::add_node(GeneId parent, int generation,
                          LearngenePayload payload, double score) {
  GeneNode n;
  n.id = nodes_.size() + 1;
  n.parent = parent;
  n.score = score;
  n.birth_generation = generation;
  n.payload = std::move(payload);
  nodes_.push_back(std::move(n));
  if (parent != 0) node_mut(parent).children.push_back(nodes_.back().id);
  return nodes_.back().id;
}

void GenePool::bootstrap(const std::vector<WinnerView>& winners, Rng& rng,
                         EventLog* events) {
  if (bootstrapped()) throw std::logic_error("bootstrap: pool already populated");
  if (winners.empty()) throw std::invalid_argument("bootstrap: no winners");
  std::uniform_int_distribution<std::size_t> pick(0, winners.size() - 1);
  for (const auto& form : forms_) {
    const FormKey key = form_key(form);
    for (int slot = 0; slot < rho_max_; ++slot) {
      const WinnerView& w = winners[pick(rng)];
      LearngenePayload payload = extract_learngene(*w.genome, form);
      const double score = score_candidate(w.f_tilde, form, elw_);
      const GeneId id = add_node(0, 0, payload, score);
      node_mut(id).in_pool = true;
      residents_[key].push_back(id);
      if (events != nullptr) {
        events->append(BirthEvent{0, id, 0, w.agent_id, w.f_tilde, score,
                                  std::move(payload)});
        events->append(AdmitEvent{0, id, 0});
      }
    }
  }
}

void GenePool::update_ancestor_scores(GeneId leaf, double f_tilde, double eta,
                                      int generation, EventLog* events) {
  GeneId child = leaf;
  GeneId ancestor = node(leaf).parent;
  int l = 1;
  while (ancestor != 0) {
    GeneNode& a = node_mut(ancestor);
    if (a.in_pool) {
      const double sim = learngene_similarity(a.payload.form,
                                              node(child).payload.form, elw_);
      const double increment =
          sim * std::pow(eta, static_cast<double>(l + 1)) * f_tilde;
      a.score += increment;
      if (events != nullptr) {
        events->append(
            ScoreUpdateEvent{generation, ancestor, child, leaf, f_tilde, increment});
      }
    }
    child = ancestor;
    ancestor = a.parent;
    ++l;
  }
}

void GenePool::extract_and_replace(const std::vector<WinnerView>& winners,
                                   int generation, double eta, Rng& rng,
                                   EventLog* events) {
  if (!bootstrapped()) {
    bootstrap(winners, rng, events);
    return;
  }

  // Phase 1: one candidate per winner. Scores are not mutated here, so every
  // winner samples from the same pool snapshot.
  struct NewLeaf {
    GeneId id;
    double f_tilde;
  };
  std::vector<NewLeaf> leaves;
  std::map<FormKey, std::vector<GeneId>> by_form;
  for (const auto& w : winners) {
    const LearngeneForm* paternal = nullptr;
    LearngeneForm paternal_form;
    if (w.paternal_gene != 0) {
      paternal_form = node(w.paternal_gene).payload.form;
      paternal = &paternal_form;
    }
    const std::vector<double> p = extraction_probabilities(paternal);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::size_t pick = p.size() - 1;
    double cum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cum += p[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
    const LearngeneForm& form = forms_[pick];
    LearngenePayload payload = extract_learngene(*w.genome, form);
    const double score = score_candidate(w.f_tilde, form, elw_);
    const GeneId id = add_node(w.paternal_gene, generation, payload, score);
    leaves.push_back({id, w.f_tilde});
    by_form[form_key(form)].push_back(id);
    if (events != nullptr) {
      events->append(BirthEvent{generation, id, w.paternal_gene, w.agent_id,
                                w.f_tilde, score, std::move(payload)});
    }
  }

  // Phase 2: ancestor updates for every new leaf, in winner order.
  for (const auto& leaf : leaves) {
    update_ancestor_scores(leaf.id, leaf.f_tilde, eta, generation, events);
  }

  // Phase 3: per-form replacement, strictly-better only, at most two per form.
  for (const auto& form : forms_) {
    const FormKey key = form_key(form);
    auto it = by_form.find(key);
    if (it == by_form.end()) continue;
    std::vector<GeneId>& cands = it->second;
    std::sort(cands.begin(), cands.end(), [this](GeneId a, GeneId b) {
      const double sa = node(a).score;
      const double sb = node(b).score;
      return sa > sb || (sa == sb && a < b);
    });
    int replaced = 0;
    for (GeneId cand : cands) {
      if (replaced == 2) break;
      std::vector<GeneId>& slot = residents_[key];
      auto worst = slot.begin();
      for (auto jt = slot.begin(); jt != slot.end(); ++jt) {
        const double sj = node(*jt).score;
        const double sw = node(*worst).score;
        if (sj < sw || (sj == sw && *jt < *worst)) worst = jt;
      }
      if (!(node(cand).score > node(*worst).score)) break;  // sorted: no later candidate can win
      const GeneId evicted = *worst;
      node_mut(evicted).in_pool = false;
      slot.erase(worst);
      node_mut(cand).in_pool = true;
      slot.push_back(cand);
      ++replaced;
      if (events != nullptr) {
        events->append(AdmitEvent{generation, cand, evicted});
      }
    }
  }
}

void GenePool::apply_decay(double beta, int generation, EventLog* events) {
  if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("apply_decay: beta out of range");
  const double factor = 1.0 - beta;
  for (const auto& form : forms_) {
    for (GeneId id : residents_[form_key(form)]) node_mut(id).score *= factor;
  }
  if (events != nullptr) events->append(DecayEvent{generation, factor});
}

GenePool GenePool::from_parts(NetworkTag network, int n_l, int rho_max,
                              NetworkArchitecture arch,
                              std::vector<GeneNode> nodes,
                              std::map<FormKey, std::vector<GeneId>> residents) {
  GenePool pool(network, n_l, rho_max, arch);
  pool.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < pool.nodes_.size(); ++i) {
    GeneNode& n = pool.nodes_[i];
    if (n.id != i + 1) throw std::invalid_argument("GenePool: non-sequential gene ids");
    if (n.parent >= n.id) throw std::invalid_argument("GenePool: parent born after child");
    n.children.clear();
  }
  for (auto& n : pool.nodes_) {
    if (n.parent != 0) pool.node_mut(n.parent).children.push_back(n.id);
    n.in_pool = false;
  }
  for (const auto& [key, ids] : residents) {
    auto slot = pool.residents_.find(key);
    if (slot == pool.residents_.end()) {
      throw std::invalid_argument("GenePool: resident form outside the form set");
    }
    if (static_cast<int>(ids.size()) > rho_max) {
      throw std::invalid_argument("GenePool: form over capacity");
    }
    for (GeneId id : ids) {
      GeneNode& n = pool.node_mut(id);
      if (form_key(n.payload.form) != key) {
        throw std::invalid_argument("GenePool: resident filed under the wrong form");
      }
      n.in_pool = true;
    }
    slot->second = ids;
  }
  return pool;
}

std::vector<Agent> initialize_generation(const GenePool& pool,
                                         const EvolutionConfig& config,
                                         int obs_dim, int hidden_width,
                                         int action_dim, InitMethod method,
                                         int generation, EventLog* events) {
  const auto tasks = training_obstacles();
  std::vector<Agent> agents;
  agents.reserve(static_cast<std::size_t>(config.n_p));
  for (int agent_id = 0; agent_id < config.n_p; ++agent_id) {
    Agent a;
    a.agent_id = agent_id;
    a.genome = make_genome(
        obs_dim, hidden_width, action_dim, method,
        seed_stream(config.master_seed, static_cast<std::uint64_t>(generation),
                    static_cast<std::uint64_t>(agent_id), stream::kGenomeInit));
    if (generation > 0) {
      Rng rng = make_rng(seed_stream(config.master_seed,
                                     static_cast<std::uint64_t>(generation),
                                     static_cast<std::uint64_t>(agent_id),
                                     stream::kInheritance));
      a.paternal_gene = pool.sample_inheritance(rng);
      transplant_learngene(pool.node(a.paternal_gene).payload, a.genome);
      if (events != nullptr) {
        events->append(InheritEvent{generation, agent_id, a.paternal_gene});
      }
    }
    Rng task_rng = make_rng(seed_stream(config.master_seed,
                                        static_cast<std::uint64_t>(generation),
                                        static_cast<std::uint64_t>(agent_id),
                                        stream::kTaskAssign));
    const int t =
        std::uniform_int_distribution<int>(0, config.m - 1)(task_rng);
    a.task = tasks[static_cast<std::size_t>(t)];
    agents.push_back(std::move(a));
  }
  return agents;
}

}  // namespace grl
