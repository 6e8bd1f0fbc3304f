#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace grl {

enum class NetworkTag { kActor, kCritic };

enum class InitMethod {
  kOrthogonal,
  kXavierUniform,
  kXavierNormal,
  kKaimingUniform,
  kKaimingNormal,
};

std::string to_string(NetworkTag tag);
std::string to_string(InitMethod method);
NetworkTag network_tag_from_string(const std::string& s);
InitMethod init_method_from_string(const std::string& s);

/// Dense feed-forward net with five tanh hidden layers of equal width and a
/// linear output layer: six weight layers total, indexed 0..5.
struct NetworkArchitecture {
  int input_dim = 0;
  int hidden_width = 0;
  int hidden_layers = 5;
  int output_dim = 0;

  static constexpr int kWeightLayers = 6;

  bool operator==(const NetworkArchitecture&) const = default;
};

/// (in, out) shape of each of the six weight layers.
std::vector<std::pair<int, int>> build_network(const NetworkArchitecture& arch);

struct LayerParams {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out

  long parameter_count() const { return weights.size() + bias.size(); }
};

struct ParameterSet {
  std::vector<LayerParams> layers;  // always kWeightLayers entries
};

/// Deterministic layer-wise initialization; biases are always zero.
ParameterSet init_params(const NetworkArchitecture& arch, InitMethod method,
                         std::uint64_t seed);

/// tanh on hidden activations, linear output.
Eigen::VectorXd forward(const ParameterSet& params, const Eigen::VectorXd& obs);

/// Batched variant; observations are columns.
Eigen::MatrixXd forward_batch(const ParameterSet& params,
                              const Eigen::MatrixXd& obs);

/// One agent: actor maps observations to action means, critic to a scalar
/// value; log_std is a global learnable vector, not part of any layer.
struct AgentGenome {
  NetworkArchitecture actor_arch;
  NetworkArchitecture critic_arch;
  ParameterSet actor;
  ParameterSet critic;
  Eigen::VectorXd log_std;
};

AgentGenome make_genome(int obs_dim, int hidden_width, int action_dim,
                        InitMethod method, std::uint64_t seed);

/// Identity of a network fragment: which network and which weight layers.
/// Never the whole network (1..5 of the 6 layers).
struct LearngeneForm {
  NetworkTag network = NetworkTag::kActor;
  std::vector<int> layer_indices;  // sorted, unique, each in 0..5

  bool operator==(const LearngeneForm&) const = default;
};

/// Compact order-preserving key: tag bit plus 6-bit layer mask.
using FormKey = std::uint16_t;

FormKey form_key(const LearngeneForm& form);
LearngeneForm form_from_key(FormKey key);
std::string to_string(const LearngeneForm& form);          // e.g. "a:45"
LearngeneForm form_from_string(const std::string& s);

/// All C(6, n_l) forms of one size over one network, in canonical order.
std::vector<LearngeneForm> enumerate_forms(NetworkTag network, int n_l);

/// Parameter payload of one form; layer_params parallels form.layer_indices.
struct LearngenePayload {
  LearngeneForm form;
  std::vector<LayerParams> layer_params;
};

/// Deep copy of the form's layers out of the genome.
LearngenePayload extract_learngene(const AgentGenome& genome,
                                   const LearngeneForm& form);

/// Overwrites exactly the form's layers; everything else is untouched.
/// Throws on shape mismatch.
void transplant_learngene(const LearngenePayload& payload, AgentGenome& genome);

/// sqrt of the layer's trainable parameter count (weights plus biases).
double effective_layer_width(const LayerParams& layer);

/// elw of each of the six layers of an architecture.
std::array<double, 6> layer_elw_table(const NetworkArchitecture& arch);

/// Mean absolute per-parameter difference between two payloads of one form.
double manhattan_change(const LearngenePayload& before,
                        const LearngenePayload& after);

}  // namespace grl
