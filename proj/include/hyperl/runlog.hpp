#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace hyperl {

// One completed episode. For eval records, `episode` is the number of
// training episodes completed when the evaluation ran.
struct EpisodeRecord {
  std::string phase = "train";  // train | eval
  std::uint64_t seed = 0;
  int episode = 0;
  double mu = 0.0;
  double cum_reward = 0.0;
  double state_cost = 0.0;   // sum of c1
  double action_cost = 0.0;  // sum of alpha * c2
  int steps = 0;
  double wall_ms = 0.0;
  bool blowup = false;

  bool operator==(const EpisodeRecord&) const = default;
};

inline constexpr const char* kRunLogHeader =
    "phase,seed,episode,mu,cum_reward,state_cost,action_cost,steps,wall_ms,blowup";

std::string format_record(const EpisodeRecord& r);
EpisodeRecord parse_record(const std::string& line);

// Append-only CSV writer; flushes after every record.
class RunLogWriter {
 public:
  RunLogWriter() = default;
  // append = true keeps existing rows (resume); the header is written only
  // to a new or empty file.
  RunLogWriter(const std::filesystem::path& path, bool append);
  void write(const EpisodeRecord& r);

 private:
  std::ofstream out_;
};

// Throws ConfigError on a missing file, bad header or malformed row.
std::vector<EpisodeRecord> read_runlog(const std::filesystem::path& path);
void write_runlog(const std::filesystem::path& path, const std::vector<EpisodeRecord>& records);

}  // namespace hyperl
