#include "grl/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace grl {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 14695981039346656037ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string checkpoint_blob_path(const std::string& path) {
  fs::path p(path);
  p.replace_extension(".blob");
  return p.string();
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

void append_doubles(std::string& blob, const Eigen::MatrixXd& m) {
  // Row-major, little-endian; matches the pack order used everywhere else.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      blob.append(bytes, sizeof(double));
    }
  }
}

void append_doubles(std::string& blob, const Eigen::VectorXd& v) {
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    const double x = v[r];
    char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    blob.append(bytes, sizeof(double));
  }
}

double read_double(const std::string& blob, std::size_t& pos) {
  double v = 0.0;
  std::memcpy(&v, blob.data() + pos, sizeof(double));
  pos += sizeof(double);
  return v;
}

void atomic_write(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw CheckpointError(CheckpointError::Kind::kIo,
                            "cannot write " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw CheckpointError(CheckpointError::Kind::kIo,
                            "short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path, CheckpointError::Kind fail_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(fail_kind, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

void save_checkpoint(const CheckpointState& state, const std::string& path) {
  const GenePool& pool = state.pool;

  std::string blob;
  json nodes = json::array();
  for (const GeneNode& n : pool.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["parent"] = n.parent;
    jn["score"] = n.score;
    jn["in_pool"] = n.in_pool;
    jn["birth_gen"] = n.birth_generation;
    jn["form"] = to_string(n.payload.form);
    jn["offset"] = blob.size() / sizeof(double);
    for (const LayerParams& lp : n.payload.layer_params) {
      append_doubles(blob, lp.weights);
      append_doubles(blob, lp.bias);
    }
    nodes.push_back(std::move(jn));
  }

  json residents = json::object();
  for (const auto& [key, ids] : pool.resident_map()) {
    residents[to_string(form_from_key(key))] = ids;
  }

  json body;
  body["version"] = kCheckpointVersion;
  body["generation"] = state.generation;
  body["config_hash"] = hex64(state.config_hash);
  body["rng"] = json{{"master_seed", state.master_seed}};
  body["pool"] = json{
      {"network", to_string(pool.network())},
      {"n_l", pool.n_l()},
      {"rho_max", pool.rho_max()},
      {"arch",
       json{{"input", pool.arch().input_dim},
            {"hidden_width", pool.arch().hidden_width},
            {"hidden_layers", pool.arch().hidden_layers},
            {"output", pool.arch().output_dim}}},
      {"nodes", std::move(nodes)},
      {"residents", std::move(residents)},
  };
  body["blob"] = json{{"file", fs::path(checkpoint_blob_path(path)).filename().string()},
                      {"doubles", blob.size() / sizeof(double)},
                      {"checksum", hex64(fnv1a64(blob.data(), blob.size()))}};

  json root;
  root["body"] = body;
  root["checksum"] = hex64(fnv1a64(body.dump()));

  atomic_write(checkpoint_blob_path(path), blob);
  atomic_write(path, root.dump(2) + "\n");
}

CheckpointState load_checkpoint(const std::string& path,
                                std::uint64_t expected_config_hash) {
  const std::string text = read_file(path, CheckpointError::Kind::kIo);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kFormat,
                          std::string("malformed checkpoint JSON: ") + e.what());
  }

  json body;
  try {
    body = root.at("body");
    const std::uint64_t stored = parse_hex64(root.at("checksum").get<std::string>());
    if (stored != fnv1a64(body.dump())) {
      throw CheckpointError(CheckpointError::Kind::kChecksum,
                            "checkpoint metadata checksum mismatch");
    }
    const int version = body.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(CheckpointError::Kind::kVersion,
                            "unsupported checkpoint version " + std::to_string(version));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kFormat,
                          std::string("checkpoint fields missing: ") + e.what());
  }

  CheckpointState state;
  try {
    state.generation = body.at("generation").get<int>();
    state.config_hash = parse_hex64(body.at("config_hash").get<std::string>());
    state.master_seed = body.at("rng").at("master_seed").get<std::uint64_t>();

    if (expected_config_hash != 0 && state.config_hash != expected_config_hash) {
      throw CheckpointError(CheckpointError::Kind::kConfigHash,
                            "checkpoint belongs to a different configuration");
    }

    const json& jp = body.at("pool");
    NetworkArchitecture arch;
    arch.input_dim = jp.at("arch").at("input").get<int>();
    arch.hidden_width = jp.at("arch").at("hidden_width").get<int>();
    arch.hidden_layers = jp.at("arch").at("hidden_layers").get<int>();
    arch.output_dim = jp.at("arch").at("output").get<int>();
    const NetworkTag network = network_tag_from_string(jp.at("network").get<std::string>());
    const int n_l = jp.at("n_l").get<int>();
    const int rho_max = jp.at("rho_max").get<int>();

    const std::string blob = read_file(checkpoint_blob_path(path),
                                       CheckpointError::Kind::kIo);
    const json& jb = body.at("blob");
    if (jb.at("doubles").get<std::size_t>() * sizeof(double) != blob.size() ||
        parse_hex64(jb.at("checksum").get<std::string>()) !=
            fnv1a64(blob.data(), blob.size())) {
      throw CheckpointError(CheckpointError::Kind::kChecksum,
                            "checkpoint blob checksum mismatch");
    }

    const auto shapes = build_network(arch);
    std::vector<GeneNode> nodes;
    for (const json& jn : jp.at("nodes")) {
      GeneNode n;
      n.id = jn.at("id").get<GeneId>();
      n.parent = jn.at("parent").get<GeneId>();
      n.score = jn.at("score").get<double>();
      n.in_pool = jn.at("in_pool").get<bool>();
      n.birth_generation = jn.at("birth_gen").get<int>();
      n.payload.form = form_from_string(jn.at("form").get<std::string>());
      std::size_t pos = jn.at("offset").get<std::size_t>() * sizeof(double);
      for (int layer : n.payload.form.layer_indices) {
        const auto [in, out] = shapes[static_cast<std::size_t>(layer)];
        if (pos + sizeof(double) * static_cast<std::size_t>(out) * static_cast<std::size_t>(in + 1) >
            blob.size()) {
          throw CheckpointError(CheckpointError::Kind::kFormat,
                                "checkpoint blob too short for node payloads");
        }
        LayerParams lp;
        lp.weights.resize(out, in);
        for (int r = 0; r < out; ++r)
          for (int c = 0; c < in; ++c) lp.weights(r, c) = read_double(blob, pos);
        lp.bias.resize(out);
        for (int r = 0; r < out; ++r) lp.bias[r] = read_double(blob, pos);
        n.payload.layer_params.push_back(std::move(lp));
      }
      nodes.push_back(std::move(n));
    }

    std::map<FormKey, std::vector<GeneId>> residents;
    for (const auto& [name, ids] : jp.at("residents").items()) {
      residents[form_key(form_from_string(name))] = ids.get<std::vector<GeneId>>();
    }

    state.pool = GenePool::from_parts(network, n_l, rho_max, arch,
                                      std::move(nodes), std::move(residents));
  } catch (const CheckpointError&) {
    throw;
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kFormat,
                          std::string("checkpoint fields missing: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::kFormat,
                          std::string("inconsistent checkpoint state: ") + e.what());
  }
  return state;
}

}  // namespace grl
