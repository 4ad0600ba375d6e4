#include "hyperl/hypernet.hpp"

#include <cmath>
#include <string>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

MlpSpec make_trunk(int context_dim, const std::vector<int>& embed_dims) {
  if (embed_dims.empty()) return MlpSpec();
  std::vector<LayerSpec> layers;
  int prev = context_dim;
  for (int w : embed_dims) {
    layers.push_back({prev, w, Activation::relu});
    prev = w;
  }
  return MlpSpec(std::move(layers));
}

}  // namespace

HyperSpec::HyperSpec(int context_dim, std::vector<int> embed_dims, MlpSpec target)
    : context_dim_(context_dim), embed_dims_(std::move(embed_dims)), target_(std::move(target)) {
  if (context_dim_ < 1) throw DimensionError("hypernetwork context_dim must be >= 1");
  if (target_.empty()) throw DimensionError("hypernetwork target spec is empty");
  trunk_ = make_trunk(context_dim_, embed_dims_);
  for (std::size_t k = 0; k < target_.num_layers(); ++k) {
    heads_.push_back({k, target_.weight_offset(k), target_.layers()[k].param_count()});
  }
}

int HyperSpec::embed_dim() const {
  return embed_dims_.empty() ? context_dim_ : embed_dims_.back();
}

HyperParams::HyperParams(HyperSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
  if (values.size() != spec.total_params()) {
    throw DimensionError("HyperParams holds " + std::to_string(values.size()) +
                         " values, spec needs " + std::to_string(spec.total_params()));
  }
}

Matrix hyper_forward_batch(const HyperSpec& spec, std::span<const double> params,
                           const Matrix& contexts, HyperTape* tape) {
  if (params.size() != spec.total_params()) {
    throw DimensionError("hypernetwork parameter vector has wrong length");
  }
  if (contexts.rows() != spec.context_dim()) {
    throw DimensionError("context has " + std::to_string(contexts.rows()) +
                         " entries, hypernetwork expects " + std::to_string(spec.context_dim()));
  }
  Matrix embedding;
  if (spec.has_trunk()) {
    embedding = mlp_forward_batch(spec.trunk(), params.subspan(0, spec.trunk_params()), contexts,
                                  tape ? &tape->trunk : nullptr);
  } else {
    embedding = contexts;
  }
  const auto p = static_cast<Eigen::Index>(spec.target().total_params());
  RowMajorMap w(params.data() + spec.head_weight_offset(), p, spec.embed_dim());
  Eigen::Map<const Vector> b(params.data() + spec.head_bias_offset(), p);
  Matrix out = w * embedding;
  out.colwise() += b;
  if (tape) tape->embedding = std::move(embedding);
  return out;
}

void hyper_backward_batch(const HyperSpec& spec, std::span<const double> params,
                          const HyperTape& tape, const Matrix& grad_targets,
                          std::span<double> grad_params, Matrix* grad_contexts) {
  const auto p = static_cast<Eigen::Index>(spec.target().total_params());
  if (grad_params.size() != spec.total_params()) {
    throw DimensionError("hypernetwork gradient buffer has wrong length");
  }
  if (grad_targets.rows() != p || grad_targets.cols() != tape.embedding.cols()) {
    throw DimensionError("target gradient has " + std::to_string(grad_targets.rows()) +
                         " rows, target network has " + std::to_string(p) + " parameters");
  }
  RowMajorMutMap gw(grad_params.data() + spec.head_weight_offset(), p, spec.embed_dim());
  Eigen::Map<Vector> gb(grad_params.data() + spec.head_bias_offset(), p);
  gw.noalias() += grad_targets * tape.embedding.transpose();
  const Vector bias_grad = grad_targets.rowwise().sum();  // owned: see mlp_backward_batch
  gb += bias_grad;

  const bool need_embedding_grad = spec.has_trunk() || grad_contexts;
  if (!need_embedding_grad) return;
  RowMajorMap w(params.data() + spec.head_weight_offset(), p, spec.embed_dim());
  Matrix g_embed = w.transpose() * grad_targets;
  if (spec.has_trunk()) {
    mlp_backward_batch(spec.trunk(), params.subspan(0, spec.trunk_params()), tape.trunk, g_embed,
                       grad_params.subspan(0, spec.trunk_params()), grad_contexts);
  } else if (grad_contexts) {
    *grad_contexts = std::move(g_embed);
  }
}

FlatParams hyper_forward(const HyperParams& h, std::span<const double> context) {
  if (context.size() != static_cast<std::size_t>(h.spec.context_dim())) {
    throw DimensionError("context has " + std::to_string(context.size()) +
                         " entries, hypernetwork expects " + std::to_string(h.spec.context_dim()));
  }
  Matrix z = Eigen::Map<const Vector>(context.data(), static_cast<Eigen::Index>(context.size()));
  Matrix theta = hyper_forward_batch(h.spec, h.values, z);
  return FlatParams(h.spec.target(), std::vector<double>(theta.data(), theta.data() + theta.size()));
}

HyperGradient hyper_backward(const HyperParams& h, std::span<const double> context,
                             std::span<const double> grad_target_params) {
  if (grad_target_params.size() != h.spec.target().total_params()) {
    throw DimensionError("target gradient has " + std::to_string(grad_target_params.size()) +
                         " entries, target network has " +
                         std::to_string(h.spec.target().total_params()));
  }
  if (context.size() != static_cast<std::size_t>(h.spec.context_dim())) {
    throw DimensionError("context dimension mismatch");
  }
  Matrix z = Eigen::Map<const Vector>(context.data(), static_cast<Eigen::Index>(context.size()));
  HyperTape tape;
  hyper_forward_batch(h.spec, h.values, z, &tape);
  Matrix g = Eigen::Map<const Vector>(grad_target_params.data(),
                                      static_cast<Eigen::Index>(grad_target_params.size()));
  HyperGradient out;
  out.params.assign(h.spec.total_params(), 0.0);
  Matrix gz;
  hyper_backward_batch(h.spec, h.values, tape, g, out.params, &gz);
  out.context.assign(gz.data(), gz.data() + gz.size());
  return out;
}

void hyper_init(const HyperSpec& spec, Rng& rng, std::span<double> out) {
  if (out.size() != spec.total_params()) throw DimensionError("init buffer size mismatch");
  if (spec.has_trunk()) init_params(spec.trunk(), rng, out.subspan(0, spec.trunk_params()));
  const int e = spec.embed_dim();
  const MlpSpec& target = spec.target();
  for (const HeadSlice& head : spec.heads()) {
    const LayerSpec& l = target.layers()[head.target_layer];
    const double fan_in = static_cast<double>(l.in_dim);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(e) * fan_in);
    const double b_bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t r = head.offset; r < head.offset + head.count; ++r) {
      double* row = out.data() + spec.head_weight_offset() + r * static_cast<std::size_t>(e);
      for (int c = 0; c < e; ++c) row[c] = uniform(rng, -w_bound, w_bound);
    }
    const std::size_t n_weights = l.weight_count();
    double* bias = out.data() + spec.head_bias_offset() + head.offset;
    for (std::size_t i = 0; i < head.count; ++i) {
      bias[i] = i < n_weights ? uniform(rng, -b_bound, b_bound) : 0.0;
    }
  }
}

HyperParams hyper_init(const HyperSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x6879706572);
  std::vector<double> v(spec.total_params());
  hyper_init(spec, rng, v);
  return HyperParams(spec, std::move(v));
}

}  // namespace hyperl
