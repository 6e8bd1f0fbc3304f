#include "grl/event_log.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace grl {

namespace {

using nlohmann::json;

json payload_to_json(const LearngenePayload& payload) {
  json layers = json::array();
  for (const auto& lp : payload.layer_params) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < lp.weights.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < lp.weights.cols(); ++c) row.push_back(lp.weights(r, c));
      rows.push_back(std::move(row));
    }
    json bias = json::array();
    for (Eigen::Index r = 0; r < lp.bias.size(); ++r) bias.push_back(lp.bias[r]);
    layers.push_back(json{{"weights", std::move(rows)}, {"bias", std::move(bias)}});
  }
  return json{{"form", to_string(payload.form)}, {"layers", std::move(layers)}};
}

LearngenePayload payload_from_json(const json& j) {
  LearngenePayload payload;
  payload.form = form_from_string(j.at("form").get<std::string>());
  for (const auto& layer : j.at("layers")) {
    LayerParams lp;
    const auto& rows = layer.at("weights");
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = nr > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    lp.weights.resize(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
      for (Eigen::Index c = 0; c < nc; ++c)
        lp.weights(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    const auto& bias = layer.at("bias");
    lp.bias.resize(static_cast<Eigen::Index>(bias.size()));
    for (Eigen::Index r = 0; r < lp.bias.size(); ++r)
      lp.bias[r] = bias[static_cast<std::size_t>(r)].get<double>();
    payload.layer_params.push_back(std::move(lp));
  }
  return payload;
}

json event_to_json(const Event& event) {
  json j;
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        j["gen"] = e.generation;
        if constexpr (std::is_same_v<T, BirthEvent>) {
          j["type"] = "birth";
          j["gene"] = e.gene_id;
          j["parent"] = e.parent;
          j["winner_agent"] = e.winner_agent;
          j["f_tilde"] = e.f_tilde;
          j["birth_score"] = e.birth_score;
          j["payload"] = payload_to_json(e.payload);
        } else if constexpr (std::is_same_v<T, AdmitEvent>) {
          j["type"] = "admit";
          j["gene"] = e.gene_id;
          j["evicted"] = e.evicted;
        } else if constexpr (std::is_same_v<T, ScoreUpdateEvent>) {
          j["type"] = "score_update";
          j["gene"] = e.gene_id;
          j["child"] = e.child_id;
          j["leaf"] = e.leaf_id;
          j["f_tilde"] = e.f_tilde;
          j["increment"] = e.increment;
        } else if constexpr (std::is_same_v<T, DecayEvent>) {
          j["type"] = "decay";
          j["factor"] = e.factor;
        } else if constexpr (std::is_same_v<T, InheritEvent>) {
          j["type"] = "inherit";
          j["agent"] = e.agent_id;
          j["gene"] = e.gene_id;
        } else if constexpr (std::is_same_v<T, CarrierEndEvent>) {
          j["type"] = "carrier_end";
          j["agent"] = e.agent_id;
          j["gene"] = e.gene_id;
          j["payload"] = payload_to_json(e.payload);
        }
      },
      event);
  return j;
}

Event event_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  const int gen = j.at("gen").get<int>();
  if (type == "birth") {
    BirthEvent e;
    e.generation = gen;
    e.gene_id = j.at("gene").get<GeneId>();
    e.parent = j.at("parent").get<GeneId>();
    e.winner_agent = j.at("winner_agent").get<int>();
    e.f_tilde = j.at("f_tilde").get<double>();
    e.birth_score = j.at("birth_score").get<double>();
    e.payload = payload_from_json(j.at("payload"));
    return e;
  }
  if (type == "admit") {
    AdmitEvent e;
    e.generation = gen;
    e.gene_id = j.at("gene").get<GeneId>();
    e.evicted = j.at("evicted").get<GeneId>();
    return e;
  }
  if (type == "score_update") {
    ScoreUpdateEvent e;
    e.generation = gen;
    e.gene_id = j.at("gene").get<GeneId>();
    e.child_id = j.at("child").get<GeneId>();
    e.leaf_id = j.at("leaf").get<GeneId>();
    e.f_tilde = j.at("f_tilde").get<double>();
    e.increment = j.at("increment").get<double>();
    return e;
  }
  if (type == "decay") {
    DecayEvent e;
    e.generation = gen;
    e.factor = j.at("factor").get<double>();
    return e;
  }
  if (type == "inherit") {
    InheritEvent e;
    e.generation = gen;
    e.agent_id = j.at("agent").get<int>();
    e.gene_id = j.at("gene").get<GeneId>();
    return e;
  }
  if (type == "carrier_end") {
    CarrierEndEvent e;
    e.generation = gen;
    e.agent_id = j.at("agent").get<int>();
    e.gene_id = j.at("gene").get<GeneId>();
    e.payload = payload_from_json(j.at("payload"));
    return e;
  }
  throw std::runtime_error("event log: unknown event type '" + type + "'");
}

}  // namespace

int event_generation(const Event& e) {
  return std::visit([](const auto& ev) { return ev.generation; }, e);
}

std::string event_type(const Event& e) {
  return event_to_json(e).at("type").get<std::string>();
}

void write_events_jsonl(const std::vector<Event>& events, std::ostream& out) {
  for (const auto& e : events) {
    out << event_to_json(e).dump() << '\n';
  }
}

std::vector<Event> read_events_jsonl(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(event_from_json(json::parse(line)));
  }
  return events;
}

}  // namespace grl
