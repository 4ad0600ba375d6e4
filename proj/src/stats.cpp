#include "hyperl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

PhaseRow summarize(const std::vector<double>& v, std::string label, int boundary) {
  PhaseRow row;
  row.label = std::move(label);
  row.boundary = boundary;
  row.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  row.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - row.mean) * (x - row.mean);
  row.std = std::sqrt(ss / static_cast<double>(v.size()));
  return row;
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<PhaseRow> aggregate_phase_stats(const std::vector<EpisodeRecord>& records,
                                            std::span<const int> boundaries) {
  if (records.empty()) throw ConfigError("cannot aggregate an empty log");
  std::vector<double> all;
  for (const auto& r : records) all.push_back(r.cum_reward);
  std::vector<PhaseRow> rows{summarize(all, "all", 0)};
  for (int b : boundaries) {
    std::vector<double> window;
    for (const auto& r : records) {
      if (r.episode > b) window.push_back(r.cum_reward);
    }
    if (window.empty()) {
      throw ConfigError("phase boundary " + std::to_string(b) + " leaves no episodes");
    }
    rows.push_back(summarize(window, ">" + std::to_string(b), b));
  }
  return rows;
}

Interval bootstrap_ci(const std::vector<std::vector<double>>& per_seed, double confidence,
                      int resamples, Rng& rng) {
  if (per_seed.size() < 2) throw ConfigError("bootstrap_ci needs at least two seeds");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
  if (resamples < 1) throw ConfigError("resamples must be >= 1");
  for (const auto& s : per_seed) {
    if (s.empty()) throw ConfigError("bootstrap_ci: a seed has no samples");
  }
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      const auto& group = per_seed[uniform_index(rng, per_seed.size())];
      for (std::size_t j = 0; j < group.size(); ++j) sum += group[uniform_index(rng, group.size())];
      count += group.size();
    }
    m = sum / static_cast<double>(count);
  }
  std::sort(means.begin(), means.end());
  const double tail = 0.5 * (1.0 - confidence);
  return {quantile(means, tail), quantile(means, 1.0 - tail)};
}

std::vector<std::vector<double>> rewards_by_seed(const std::vector<EpisodeRecord>& records) {
  std::map<std::uint64_t, std::vector<double>> groups;
  for (const auto& r : records) groups[r.seed].push_back(r.cum_reward);
  std::vector<std::vector<double>> out;
  for (auto& [seed, v] : groups) out.push_back(std::move(v));
  return out;
}

std::vector<EpisodeRecord> filter_phase(const std::vector<EpisodeRecord>& records,
                                        const std::string& phase) {
  std::vector<EpisodeRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const EpisodeRecord& r) { return r.phase == phase; });
  return out;
}

void write_stats_csv(const std::vector<EpisodeRecord>& records, const StatsOptions& opts,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << kStatsHeader << '\n';
  Rng rng = make_rng(opts.seed, 0x737461);
  bool any = false;
  for (const std::string phase : {"train", "eval"}) {
    const auto subset = filter_phase(records, phase);
    if (subset.empty()) continue;
    any = true;
    for (const PhaseRow& row : aggregate_phase_stats(subset, opts.boundaries)) {
      std::vector<EpisodeRecord> window;
      std::copy_if(subset.begin(), subset.end(), std::back_inserter(window),
                   [&](const EpisodeRecord& r) { return r.episode > row.boundary || row.label == "all"; });
      const auto groups = rewards_by_seed(window);
      out << phase << ',' << row.label << ',' << row.count << ',' << groups.size() << ','
          << fmt(row.mean) << ',' << fmt(row.std) << ',';
      if (groups.size() >= 2) {
        const Interval ci = bootstrap_ci(groups, opts.confidence, opts.resamples, rng);
        out << fmt(ci.low) << ',' << fmt(ci.high);
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
  if (!any) throw ConfigError("log holds no train or eval records");
}

}  // namespace hyperl
