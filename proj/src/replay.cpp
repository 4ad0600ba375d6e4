#include "hyperl/replay.hpp"

#include <algorithm>
#include <string>

#include "hyperl/errors.hpp"

namespace hyperl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  if (obs_dim < 1 || action_dim < 1) throw DimensionError("replay dims must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.obs.size() != static_cast<std::size_t>(obs_dim_) ||
      t.next_obs.size() != static_cast<std::size_t>(obs_dim_) ||
      t.action.size() != static_cast<std::size_t>(action_dim_)) {
    throw DimensionError("transition shape (" + std::to_string(t.obs.size()) + ", " +
                         std::to_string(t.action.size()) + ", " + std::to_string(t.next_obs.size()) +
                         ") does not match buffer (" + std::to_string(obs_dim_) + ", " +
                         std::to_string(action_dim_) + ")");
  }
  const std::size_t st = stride();
  if (cursor_ * st == data_.size()) data_.resize(data_.size() + st);
  double* slot = data_.data() + cursor_ * st;
  slot = std::copy(t.obs.begin(), t.obs.end(), slot);
  slot = std::copy(t.action.begin(), t.action.end(), slot);
  *slot++ = t.reward;
  slot = std::copy(t.next_obs.begin(), t.next_obs.end(), slot);
  *slot++ = t.mu;
  *slot = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw DimensionError("replay index out of range");
  const std::size_t slot_index = size_ < capacity_ ? i : (cursor_ + i) % capacity_;
  const double* p = data_.data() + slot_index * stride();
  Transition t;
  t.obs.assign(p, p + obs_dim_);
  p += obs_dim_;
  t.action.assign(p, p + action_dim_);
  p += action_dim_;
  t.reward = *p++;
  t.next_obs.assign(p, p + obs_dim_);
  p += obs_dim_;
  t.mu = *p++;
  t.done = *p != 0.0;
  return t;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const Eigen::Index b = static_cast<Eigen::Index>(slots.size());
  Batch out;
  out.obs.resize(obs_dim_, b);
  out.action.resize(action_dim_, b);
  out.reward.resize(b);
  out.next_obs.resize(obs_dim_, b);
  out.mu.resize(b);
  out.done.resize(b);
  const std::size_t st = stride();
  for (Eigen::Index j = 0; j < b; ++j) {
    if (slots[j] >= size_) throw DimensionError("replay slot out of range");
    const double* p = data_.data() + slots[j] * st;
    out.obs.col(j) = Eigen::Map<const Vector>(p, obs_dim_);
    p += obs_dim_;
    out.action.col(j) = Eigen::Map<const Vector>(p, action_dim_);
    p += action_dim_;
    out.reward(j) = *p++;
    out.next_obs.col(j) = Eigen::Map<const Vector>(p, obs_dim_);
    p += obs_dim_;
    out.mu(j) = *p++;
    out.done(j) = *p;
  }
  return out;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (size_ < batch_size) {
    throw ConfigError("replay holds " + std::to_string(size_) + " transitions, batch needs " +
                      std::to_string(batch_size));
  }
  std::vector<std::size_t> slots(batch_size);
  for (auto& s : slots) s = uniform_index(rng, size_);
  return gather(slots);
}

void ReplayBuffer::restore(std::vector<double> data, std::size_t size, std::size_t cursor) {
  if (size > capacity_ || cursor >= capacity_ || data.size() != size * stride() ||
      (size < capacity_ && cursor != size)) {
    throw DimensionError("replay restore: inconsistent size/cursor/storage");
  }
  data_ = std::move(data);
  size_ = size;
  cursor_ = cursor;
}

}  // namespace hyperl
