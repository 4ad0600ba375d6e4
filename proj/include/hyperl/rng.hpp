#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hyperl {

using Rng = std::mt19937_64;

// Independent stream derived from (seed, stream) through std::seed_seq.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Distributions are constructed per draw so no hidden cached state survives
// between calls; the engine state alone determines every subsequent value.
double uniform(Rng& rng, double lo, double hi);
// A zero stddev returns the mean without consuming engine output.
double normal(Rng& rng, double mean, double stddev);
std::size_t uniform_index(Rng& rng, std::size_t n);

std::string serialize_rng(const Rng& rng);
void deserialize_rng(Rng& rng, const std::string& text);

}  // namespace hyperl
