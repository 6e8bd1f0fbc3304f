#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "grl/network.hpp"

namespace grl {

/// Gene identifiers are assigned sequentially from 1; 0 means "none".
using GeneId = std::uint64_t;

/// A candidate learngene came into existence (extraction or bootstrap).
/// Carries the full payload so analyses can be replayed from the log alone.
struct BirthEvent {
  int generation = 0;
  GeneId gene_id = 0;
  GeneId parent = 0;  // 0 for generation-0 roots
  int winner_agent = -1;
  double f_tilde = 0.0;
  double birth_score = 0.0;
  LearngenePayload payload;
};

/// A gene entered the pool; `evicted` names the resident it displaced
/// (0 during the generation-0 fill of empty slots).
struct AdmitEvent {
  int generation = 0;
  GeneId gene_id = 0;
  GeneId evicted = 0;
};

/// Ancestor score increment: gene_id gained `increment` because descendant
/// leaf_id was extracted; child_id is gene_id's child on the leaf-to-root
/// path (the similarity partner).
struct ScoreUpdateEvent {
  int generation = 0;
  GeneId gene_id = 0;
  GeneId child_id = 0;
  GeneId leaf_id = 0;
  double f_tilde = 0.0;
  double increment = 0.0;
};

/// End-of-generation decay applied to every resident score.
struct DecayEvent {
  int generation = 0;
  double factor = 0.0;  // 1 - beta
};

/// An agent was initialized with a pool gene this generation.
struct InheritEvent {
  int generation = 0;
  int agent_id = -1;
  GeneId gene_id = 0;
};

/// End-of-lifetime snapshot of an inherited gene's layers inside its
/// carrier's trained genome (drives the parameter-change heatmap).
struct CarrierEndEvent {
  int generation = 0;
  int agent_id = -1;
  GeneId gene_id = 0;
  LearngenePayload payload;
};

using Event = std::variant<BirthEvent, AdmitEvent, ScoreUpdateEvent,
                           DecayEvent, InheritEvent, CarrierEndEvent>;

int event_generation(const Event& e);
std::string event_type(const Event& e);

/// Append-only in-memory buffer; the harness flushes it per generation.
class EventLog {
 public:
  void append(Event e) { events_.push_back(std::move(e)); }
  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  void clear() { events_.clear(); }

 private:
  std::vector<Event> events_;
};

/// One JSON object per line, deterministic field order; doubles round-trip
/// exactly.
void write_events_jsonl(const std::vector<Event>& events, std::ostream& out);
std::vector<Event> read_events_jsonl(std::istream& in);

}  // namespace grl
