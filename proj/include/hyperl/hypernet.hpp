#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyperl/mlp.hpp"

namespace hyperl {

enum class ContextKind { param_only, state_and_param };

// Rows of the head matrix that emit one target layer's weights and biases.
struct HeadSlice {
  std::size_t target_layer = 0;
  std::size_t offset = 0;  // first index in the target FlatParams
  std::size_t count = 0;   // weight_count + out_dim of that layer
};

// A hypernetwork: a relu trunk (context -> embed_dims...) followed by one
// linear head per target layer. The heads are stored as a single row-major
// (target_params x embed_dim) matrix whose row blocks are the head slices, so
// concatenated head outputs are exactly the target FlatParams.
//
// Flat layout: [trunk params (MlpSpec layout)] [head weights, row-major]
//              [head biases].
class HyperSpec {
 public:
  HyperSpec() = default;
  HyperSpec(int context_dim, std::vector<int> embed_dims, MlpSpec target);

  int context_dim() const { return context_dim_; }
  const std::vector<int>& embed_dims() const { return embed_dims_; }
  // Width of the vector the heads read: last embed dim, or context_dim when
  // there is no trunk.
  int embed_dim() const;
  const MlpSpec& target() const { return target_; }
  bool has_trunk() const { return !trunk_.empty(); }
  const MlpSpec& trunk() const { return trunk_; }
  const std::vector<HeadSlice>& heads() const { return heads_; }

  std::size_t trunk_params() const { return trunk_.total_params(); }
  std::size_t head_weight_offset() const { return trunk_params(); }
  std::size_t head_bias_offset() const {
    return trunk_params() + target_.total_params() * static_cast<std::size_t>(embed_dim());
  }
  std::size_t total_params() const { return head_bias_offset() + target_.total_params(); }

 private:
  int context_dim_ = 0;
  std::vector<int> embed_dims_;
  MlpSpec target_;
  MlpSpec trunk_;
  std::vector<HeadSlice> heads_;
};

struct HyperParams {
  HyperSpec spec;
  std::vector<double> values;

  HyperParams() = default;
  HyperParams(HyperSpec s, std::vector<double> v);
};

struct HyperTape {
  MlpTape trunk;
  Matrix embedding;  // embed_dim x batch
};

// Generates one column of target parameters per context column.
Matrix hyper_forward_batch(const HyperSpec& spec, std::span<const double> params,
                           const Matrix& contexts, HyperTape* tape = nullptr);

// Adds d(loss)/d(hyper params) into grad_params given d(loss)/d(target params)
// per column; optionally returns d(loss)/d(contexts).
void hyper_backward_batch(const HyperSpec& spec, std::span<const double> params,
                          const HyperTape& tape, const Matrix& grad_targets,
                          std::span<double> grad_params, Matrix* grad_contexts);

FlatParams hyper_forward(const HyperParams& h, std::span<const double> context);

struct HyperGradient {
  std::vector<double> params;
  std::vector<double> context;
};

HyperGradient hyper_backward(const HyperParams& h, std::span<const double> context,
                             std::span<const double> grad_target_params);

// Trunk: fan-in uniform weights, zero biases. Heads: weights uniform in
// +-1/sqrt(embed_dim * target_fan_in); the head bias of every generated weight
// is a fan-in uniform draw for its target layer, generated biases start at zero.
HyperParams hyper_init(const HyperSpec& spec, std::uint64_t seed);
void hyper_init(const HyperSpec& spec, Rng& rng, std::span<double> out);

}  // namespace hyperl
