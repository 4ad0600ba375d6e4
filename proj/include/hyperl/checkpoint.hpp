#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hyperl/agent.hpp"

namespace hyperl {

inline constexpr int kCheckpointVersion = 1;

// One seed's complete training state. On disk: `manifest.txt` (structured
// text) and `arrays.bin` (little-endian doubles, arrays back to back in
// manifest order).
struct CheckpointData {
  int version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int episode = 0;
  std::int64_t global_step = 0;
  std::size_t replay_size = 0;
  std::size_t replay_cursor = 0;
  std::map<std::string, std::string> rng;  // stream name -> engine state
  std::vector<NamedArray> arrays;
  std::string config_text;
};

void save_checkpoint(const std::filesystem::path& dir, const CheckpointData& data);
// Throws ConfigError for a missing or corrupt checkpoint.
CheckpointData load_checkpoint(const std::filesystem::path& dir);

}  // namespace hyperl
