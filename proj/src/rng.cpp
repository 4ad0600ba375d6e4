#include "hyperl/rng.hpp"

#include <sstream>

#include "hyperl/errors.hpp"

namespace hyperl {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x68797065u};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

double normal(Rng& rng, double mean, double stddev) {
  if (stddev == 0.0) return mean;
  std::normal_distribution<double> dist(mean, stddev);
  return dist(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(rng);
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void deserialize_rng(Rng& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (in.fail()) throw ConfigError("corrupt rng state");
}

}  // namespace hyperl
