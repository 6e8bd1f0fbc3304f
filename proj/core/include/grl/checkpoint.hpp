#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "grl/evolution.hpp"

namespace grl {

inline constexpr int kCheckpointVersion = 1;

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(std::string_view s);

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kFormat, kVersion, kChecksum, kConfigHash };

  CheckpointError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Everything needed to continue a run: the generation just completed and the
/// full pool/tree state. All random streams are derived from master_seed and
/// the generation index, so no mutable RNG state needs to be carried.
struct CheckpointState {
  int generation = -1;
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  GenePool pool;
};

/// Writes `<path>` (JSON metadata) plus an adjacent `.blob` file holding all
/// payload parameters as little-endian doubles. Both are checksummed and the
/// write is atomic (temp file + rename). Byte-stable: saving an identical
/// state twice produces identical files.
void save_checkpoint(const CheckpointState& state, const std::string& path);

/// Round-trips save_checkpoint. Throws CheckpointError on unreadable files,
/// malformed JSON, version mismatch, or checksum mismatch; additionally on
/// config-hash mismatch when expected_config_hash is nonzero.
CheckpointState load_checkpoint(const std::string& path,
                                std::uint64_t expected_config_hash = 0);

/// Blob path convention used by save/load: path with a .blob extension.
std::string checkpoint_blob_path(const std::string& path);

}  // namespace grl
