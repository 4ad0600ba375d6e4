#include "hyperl/runlog.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& field, const std::string& line) {
  T value{};
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("malformed runlog row: " + line);
  return value;
}

}  // namespace

std::string format_record(const EpisodeRecord& r) {
  std::ostringstream s;
  s << r.phase << ',' << r.seed << ',' << r.episode << ',' << fmt(r.mu) << ',' << fmt(r.cum_reward)
    << ',' << fmt(r.state_cost) << ',' << fmt(r.action_cost) << ',' << r.steps << ','
    << fmt(r.wall_ms) << ',' << (r.blowup ? 1 : 0);
  return s.str();
}

EpisodeRecord parse_record(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) f.push_back(cur);
  if (f.size() != 10) throw ConfigError("runlog row needs 10 fields: " + line);
  EpisodeRecord r;
  r.phase = f[0];
  if (r.phase != "train" && r.phase != "eval") throw ConfigError("unknown phase in row: " + line);
  r.seed = parse_number<std::uint64_t>(f[1], line);
  r.episode = parse_number<int>(f[2], line);
  r.mu = parse_number<double>(f[3], line);
  r.cum_reward = parse_number<double>(f[4], line);
  r.state_cost = parse_number<double>(f[5], line);
  r.action_cost = parse_number<double>(f[6], line);
  r.steps = parse_number<int>(f[7], line);
  r.wall_ms = parse_number<double>(f[8], line);
  const int b = parse_number<int>(f[9], line);
  if (b != 0 && b != 1) throw ConfigError("blowup flag must be 0 or 1: " + line);
  r.blowup = b == 1;
  return r;
}

RunLogWriter::RunLogWriter(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
  if (fresh) out_ << kRunLogHeader << '\n' << std::flush;
}

void RunLogWriter::write(const EpisodeRecord& r) {
  out_ << format_record(r) << '\n' << std::flush;
}

std::vector<EpisodeRecord> read_runlog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read runlog " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader) {
    throw ConfigError("runlog " + path.string() + " has an unexpected header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_record(line));
  }
  return out;
}

void write_runlog(const std::filesystem::path& path, const std::vector<EpisodeRecord>& records) {
  RunLogWriter w(path, false);
  for (const auto& r : records) w.write(r);
}

}  // namespace hyperl
