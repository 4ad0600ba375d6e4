#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyperl/mlp.hpp"
#include "hyperl/rng.hpp"

namespace hyperl {

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;  // normalized, in [-1, 1]
  double reward = 0.0;
  std::vector<double> next_obs;
  double mu = 0.0;
  bool done = false;
};

// Columns are transitions.
struct Batch {
  Matrix obs;
  Matrix action;
  Vector reward;
  Matrix next_obs;
  Vector mu;
  Vector done;  // 1.0 for terminal transitions
  std::size_t size() const { return static_cast<std::size_t>(reward.size()); }
};

// FIFO ring of transitions. Storage grows with the contents, up to capacity.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  std::size_t cursor() const { return cursor_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }

  // Throws DimensionError on shape mismatch.
  void push(const Transition& t);
  // i-th oldest stored transition.
  Transition at(std::size_t i) const;
  // Uniform with replacement. Throws ConfigError when size < batch_size.
  Batch sample(std::size_t batch_size, Rng& rng) const;
  Batch gather(std::span<const std::size_t> slots) const;

  // Raw slot storage for checkpoints.
  const std::vector<double>& storage() const { return data_; }
  void restore(std::vector<double> data, std::size_t size, std::size_t cursor);

 private:
  std::size_t stride() const { return 2 * static_cast<std::size_t>(obs_dim_) + action_dim_ + 3; }

  std::size_t capacity_ = 0;
  int obs_dim_ = 0;
  int action_dim_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  // Slot layout: obs, action, reward, next_obs, mu, done.
  std::vector<double> data_;
};

}  // namespace hyperl
