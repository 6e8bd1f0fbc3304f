#include "grl/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "grl/rng.hpp"

namespace grl {

std::string to_string(NetworkTag tag) {
  return tag == NetworkTag::kActor ? "actor" : "critic";
}

std::string to_string(InitMethod method) {
  switch (method) {
    case InitMethod::kOrthogonal: return "orthogonal";
    case InitMethod::kXavierUniform: return "xavier_uniform";
    case InitMethod::kXavierNormal: return "xavier_normal";
    case InitMethod::kKaimingUniform: return "kaiming_uniform";
    case InitMethod::kKaimingNormal: return "kaiming_normal";
  }
  return "orthogonal";
}

NetworkTag network_tag_from_string(const std::string& s) {
  if (s == "actor" || s == "a") return NetworkTag::kActor;
  if (s == "critic" || s == "c") return NetworkTag::kCritic;
  throw std::invalid_argument("unknown network tag: " + s);
}

InitMethod init_method_from_string(const std::string& s) {
  if (s == "orthogonal") return InitMethod::kOrthogonal;
  if (s == "xavier_uniform") return InitMethod::kXavierUniform;
  if (s == "xavier_normal") return InitMethod::kXavierNormal;
  if (s == "kaiming_uniform") return InitMethod::kKaimingUniform;
  if (s == "kaiming_normal") return InitMethod::kKaimingNormal;
  throw std::invalid_argument("unknown init method: " + s);
}

std::vector<std::pair<int, int>> build_network(const NetworkArchitecture& arch) {
  if (arch.input_dim < 1 || arch.hidden_width < 1 || arch.output_dim < 1) {
    throw std::invalid_argument("network dimensions must be >= 1");
  }
  if (arch.hidden_layers != 5) {
    throw std::invalid_argument("architecture is fixed at five hidden layers");
  }
  std::vector<std::pair<int, int>> shapes;
  shapes.reserve(NetworkArchitecture::kWeightLayers);
  shapes.emplace_back(arch.input_dim, arch.hidden_width);
  for (int i = 0; i < arch.hidden_layers - 1; ++i) {
    shapes.emplace_back(arch.hidden_width, arch.hidden_width);
  }
  shapes.emplace_back(arch.hidden_width, arch.output_dim);
  return shapes;
}

namespace {

// Row-major fill keeps the draw order independent of Eigen's storage layout.
template <typename Dist>
void fill_matrix(Eigen::MatrixXd& m, Dist& dist, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = dist(rng);
    }
  }
}

// Gaussian matrix followed by a QR decomposition; the sign fix makes the
// factorization unique. Rows are orthonormal when out <= in, columns
// otherwise, so square layers satisfy W^T W = I.
Eigen::MatrixXd orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const bool transpose = rows < cols;
  const Eigen::Index r = transpose ? cols : rows;
  const Eigen::Index c = transpose ? rows : cols;
  Eigen::MatrixXd gauss(r, c);
  std::normal_distribution<double> normal(0.0, 1.0);
  fill_matrix(gauss, normal, rng);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  Eigen::MatrixXd rmat = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j) {
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return transpose ? Eigen::MatrixXd(q.transpose()) : q;
}

}  // namespace

ParameterSet init_params(const NetworkArchitecture& arch, InitMethod method,
                         std::uint64_t seed) {
  const auto shapes = build_network(arch);
  Rng rng = make_rng(seed);
  ParameterSet params;
  params.layers.reserve(shapes.size());
  for (const auto& [fan_in, fan_out] : shapes) {
    LayerParams layer;
    layer.weights.resize(fan_out, fan_in);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    switch (method) {
      case InitMethod::kOrthogonal:
        layer.weights = orthogonal_matrix(fan_out, fan_in, rng);
        break;
      case InitMethod::kXavierUniform: {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        fill_matrix(layer.weights, dist, rng);
        break;
      }
      case InitMethod::kXavierNormal: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
        fill_matrix(layer.weights, dist, rng);
        break;
      }
      case InitMethod::kKaimingUniform: {
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        fill_matrix(layer.weights, dist, rng);
        break;
      }
      case InitMethod::kKaimingNormal: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        fill_matrix(layer.weights, dist, rng);
        break;
      }
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::VectorXd forward(const ParameterSet& params, const Eigen::VectorXd& obs) {
  if (!obs.allFinite()) throw std::invalid_argument("forward: non-finite observation");
  Eigen::VectorXd h = obs;
  const auto n = params.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = params.layers[i];
    if (layer.weights.cols() != h.size()) {
      throw std::invalid_argument("forward: observation/layer shape mismatch");
    }
    h = layer.weights * h + layer.bias;
    if (i + 1 < n) h = h.array().tanh();
  }
  return h;
}

Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& obs) {
  Eigen::MatrixXd h = obs;
  const auto n = params.layers.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = params.layers[i];
    h = (layer.weights * h).colwise() + layer.bias;
    if (i + 1 < n) h = h.array().tanh();
  }
  return h;
}

AgentGenome make_genome(int obs_dim, int hidden_width, int action_dim,
                        InitMethod method, std::uint64_t seed) {
  AgentGenome genome;
  genome.actor_arch = {obs_dim, hidden_width, 5, action_dim};
  genome.critic_arch = {obs_dim, hidden_width, 5, 1};
  genome.actor = init_params(genome.actor_arch, method, seed_stream(seed, 1));
  genome.critic = init_params(genome.critic_arch, method, seed_stream(seed, 2));
  genome.log_std = Eigen::VectorXd::Constant(action_dim, -0.5);
  return genome;
}

FormKey form_key(const LearngeneForm& form) {
  FormKey mask = 0;
  for (int idx : form.layer_indices) mask |= static_cast<FormKey>(1u << idx);
  if (form.network == NetworkTag::kCritic) mask |= 1u << 6;
  return mask;
}

LearngeneForm form_from_key(FormKey key) {
  LearngeneForm form;
  form.network = (key & (1u << 6)) ? NetworkTag::kCritic : NetworkTag::kActor;
  for (int i = 0; i < 6; ++i) {
    if (key & (1u << i)) form.layer_indices.push_back(i);
  }
  return form;
}

std::string to_string(const LearngeneForm& form) {
  std::string s = form.network == NetworkTag::kActor ? "a:" : "c:";
  for (int idx : form.layer_indices) s += static_cast<char>('0' + idx);
  return s;
}

LearngeneForm form_from_string(const std::string& s) {
  if (s.size() < 3 || s[1] != ':') throw std::invalid_argument("bad form: " + s);
  LearngeneForm form;
  form.network = network_tag_from_string(s.substr(0, 1));
  for (std::size_t i = 2; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '5') throw std::invalid_argument("bad form: " + s);
    const int layer = s[i] - '0';
    // Strictly increasing keeps forms canonical and rejects duplicates.
    if (!form.layer_indices.empty() && layer <= form.layer_indices.back()) {
      throw std::invalid_argument("bad form: " + s);
    }
    form.layer_indices.push_back(layer);
  }
  if (form.layer_indices.size() > 5) {
    throw std::invalid_argument("a form never spans the whole network: " + s);
  }
  return form;
}

std::vector<LearngeneForm> enumerate_forms(NetworkTag network, int n_l) {
  if (n_l < 1 || n_l > 5) throw std::invalid_argument("n_l must be in [1,5]");
  std::vector<LearngeneForm> forms;
  // All 6-bit masks with n_l bits set, ascending: lexicographic in indices.
  for (unsigned mask = 1; mask < 64; ++mask) {
    if (std::popcount(mask) != n_l) continue;
    LearngeneForm form;
    form.network = network;
    for (int i = 0; i < 6; ++i) {
      if (mask & (1u << i)) form.layer_indices.push_back(i);
    }
    forms.push_back(std::move(form));
  }
  std::sort(forms.begin(), forms.end(), [](const auto& a, const auto& b) {
    return a.layer_indices < b.layer_indices;
  });
  return forms;
}

namespace {

void validate_form(const LearngeneForm& form) {
  const auto& idx = form.layer_indices;
  if (idx.empty() || idx.size() > 5) {
    throw std::invalid_argument("learngene form must cover 1..5 layers");
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] > 5) throw std::out_of_range("layer index out of range");
    if (i > 0 && idx[i] <= idx[i - 1]) {
      throw std::invalid_argument("layer indices must be strictly increasing");
    }
  }
}

const ParameterSet& select_network(const AgentGenome& genome, NetworkTag tag) {
  return tag == NetworkTag::kActor ? genome.actor : genome.critic;
}

ParameterSet& select_network(AgentGenome& genome, NetworkTag tag) {
  return tag == NetworkTag::kActor ? genome.actor : genome.critic;
}

}  // namespace

LearngenePayload extract_learngene(const AgentGenome& genome,
                                   const LearngeneForm& form) {
  validate_form(form);
  const ParameterSet& net = select_network(genome, form.network);
  LearngenePayload payload;
  payload.form = form;
  payload.layer_params.reserve(form.layer_indices.size());
  for (int idx : form.layer_indices) {
    payload.layer_params.push_back(net.layers.at(idx));
  }
  return payload;
}

void transplant_learngene(const LearngenePayload& payload, AgentGenome& genome) {
  validate_form(payload.form);
  ParameterSet& net = select_network(genome, payload.form.network);
  // Validate all shapes before touching anything.
  for (std::size_t i = 0; i < payload.form.layer_indices.size(); ++i) {
    const auto& dst = net.layers.at(payload.form.layer_indices[i]);
    const auto& src = payload.layer_params.at(i);
    if (dst.weights.rows() != src.weights.rows() ||
        dst.weights.cols() != src.weights.cols() ||
        dst.bias.size() != src.bias.size()) {
      throw std::invalid_argument("transplant_learngene: shape mismatch at layer " +
                                  std::to_string(payload.form.layer_indices[i]));
    }
  }
  for (std::size_t i = 0; i < payload.form.layer_indices.size(); ++i) {
    net.layers[payload.form.layer_indices[i]] = payload.layer_params[i];
  }
}

double effective_layer_width(const LayerParams& layer) {
  return std::sqrt(static_cast<double>(layer.parameter_count()));
}

std::array<double, 6> layer_elw_table(const NetworkArchitecture& arch) {
  const auto shapes = build_network(arch);
  std::array<double, 6> table{};
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto [in, out] = shapes[i];
    table[i] = std::sqrt(static_cast<double>(in) * out + out);
  }
  return table;
}

double manhattan_change(const LearngenePayload& before,
                        const LearngenePayload& after) {
  if (!(before.form == after.form)) {
    throw std::invalid_argument("manhattan_change: forms differ");
  }
  double total = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < before.layer_params.size(); ++i) {
    const auto& a = before.layer_params[i];
    const auto& b = after.layer_params[i];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
        a.bias.size() != b.bias.size()) {
      throw std::invalid_argument("manhattan_change: shape mismatch");
    }
    total += (a.weights - b.weights).cwiseAbs().sum();
    total += (a.bias - b.bias).cwiseAbs().sum();
    count += a.parameter_count();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace grl
