#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperl/rng.hpp"
#include "hyperl/runlog.hpp"

namespace hyperl {

// Mean and population std of cumulative reward, pooled across seeds.
struct PhaseRow {
  std::string label;  // "all" or ">B" (episodes strictly after B)
  int boundary = 0;   // 0 for "all"
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
};

// Rows for all records then one per boundary. Throws ConfigError for an
// empty log or a boundary that leaves no episodes.
std::vector<PhaseRow> aggregate_phase_stats(const std::vector<EpisodeRecord>& records,
                                            std::span<const int> boundaries);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Stratified percentile bootstrap of the pooled mean: resample seeds with
// replacement, then episodes within each drawn seed. Throws ConfigError for
// fewer than two seeds or an empty seed group.
Interval bootstrap_ci(const std::vector<std::vector<double>>& per_seed, double confidence,
                      int resamples, Rng& rng);

// Cumulative rewards of `records` grouped by seed, in ascending seed order.
std::vector<std::vector<double>> rewards_by_seed(const std::vector<EpisodeRecord>& records);

std::vector<EpisodeRecord> filter_phase(const std::vector<EpisodeRecord>& records,
                                        const std::string& phase);

// Table export: one row per (phase, window). The CI columns are empty when
// the window holds fewer than two seeds.
struct StatsOptions {
  std::vector<int> boundaries;
  double confidence = 0.95;
  int resamples = 2000;
  std::uint64_t seed = 0;
};
void write_stats_csv(const std::vector<EpisodeRecord>& records, const StatsOptions& opts,
                     const std::filesystem::path& path);
inline constexpr const char* kStatsHeader = "phase,window,episodes,seeds,mean,std,ci_low,ci_high";

}  // namespace hyperl
