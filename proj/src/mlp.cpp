#include "hyperl/mlp.hpp"

#include <cmath>
#include <string>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::tanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::linear:
      break;
  }
}

// Multiplies delta in place by the activation derivative, expressed through the
// post-activation output.
void apply_activation_grad(Activation act, const Matrix& out, Matrix& delta) {
  switch (act) {
    case Activation::relu:
      delta = (out.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::tanh:
      delta.array() *= 1.0 - out.array().square();
      break;
    case Activation::linear:
      break;
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::linear:
      return "linear";
  }
  return "?";
}

MlpSpec::MlpSpec(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("MlpSpec needs at least one layer");
  offsets_.reserve(layers_.size());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.in_dim < 1 || l.out_dim < 1) {
      throw DimensionError("layer " + std::to_string(k) + " has non-positive dimension");
    }
    if (k > 0 && layers_[k - 1].out_dim != l.in_dim) {
      throw DimensionError("layer " + std::to_string(k) + " expects " +
                           std::to_string(l.in_dim) + " inputs but layer " +
                           std::to_string(k - 1) + " emits " +
                           std::to_string(layers_[k - 1].out_dim));
    }
    offsets_.push_back(total_);
    total_ += l.param_count();
  }
}

MlpSpec MlpSpec::dense(int input_dim, std::span<const int> hidden, int output_dim,
                       Activation output_activation) {
  std::vector<LayerSpec> layers;
  int prev = input_dim;
  for (int width : hidden) {
    layers.push_back({prev, width, Activation::relu});
    prev = width;
  }
  layers.push_back({prev, output_dim, output_activation});
  return MlpSpec(std::move(layers));
}

int MlpSpec::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
int MlpSpec::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim; }

FlatParams::FlatParams(MlpSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
  if (values.size() != spec.total_params()) {
    throw DimensionError("FlatParams holds " + std::to_string(values.size()) +
                         " values, spec needs " + std::to_string(spec.total_params()));
  }
}

FlatParams FlatParams::zeros(const MlpSpec& s) {
  return FlatParams(s, std::vector<double>(s.total_params(), 0.0));
}

Matrix mlp_forward_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& inputs, MlpTape* tape) {
  if (params.size() != spec.total_params()) {
    throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                         " entries, spec needs " + std::to_string(spec.total_params()));
  }
  if (inputs.rows() != spec.input_dim()) {
    throw DimensionError("layer 0 expects " + std::to_string(spec.input_dim()) +
                         " inputs, got " + std::to_string(inputs.rows()));
  }
  if (tape) {
    tape->activations.clear();
    tape->activations.reserve(spec.num_layers() + 1);
    tape->activations.push_back(inputs);
  }
  Matrix x = inputs;
  for (std::size_t k = 0; k < spec.num_layers(); ++k) {
    const LayerSpec& l = spec.layers()[k];
    RowMajorMap w(params.data() + spec.weight_offset(k), l.out_dim, l.in_dim);
    Eigen::Map<const Vector> b(params.data() + spec.bias_offset(k), l.out_dim);
    Matrix z = w * x;
    z.colwise() += b;
    apply_activation(l.activation, z);
    x = std::move(z);
    if (tape) tape->activations.push_back(x);
  }
  return x;
}

void mlp_backward_batch(const MlpSpec& spec, std::span<const double> params,
                        const MlpTape& tape, const Matrix& upstream,
                        std::span<double> grad_params, Matrix* grad_inputs) {
  if (grad_params.size() != spec.total_params() || params.size() != spec.total_params()) {
    throw DimensionError("gradient buffer does not match spec parameter count");
  }
  if (tape.activations.size() != spec.num_layers() + 1) {
    throw DimensionError("tape does not belong to this spec");
  }
  if (upstream.rows() != spec.output_dim() ||
      upstream.cols() != tape.activations.back().cols()) {
    throw DimensionError("upstream gradient is " + std::to_string(upstream.rows()) + "x" +
                         std::to_string(upstream.cols()) + ", output is " +
                         std::to_string(spec.output_dim()) + "x" +
                         std::to_string(tape.activations.back().cols()));
  }
  Matrix delta = upstream;
  for (std::size_t k = spec.num_layers(); k-- > 0;) {
    const LayerSpec& l = spec.layers()[k];
    apply_activation_grad(l.activation, tape.activations[k + 1], delta);
    const Matrix& x = tape.activations[k];
    RowMajorMutMap gw(grad_params.data() + spec.weight_offset(k), l.out_dim, l.in_dim);
    Eigen::Map<Vector> gb(grad_params.data() + spec.bias_offset(k), l.out_dim);
    gw.noalias() += delta * x.transpose();
    // Reduce into owned storage first: a reduction assigned straight into a
    // mapped buffer picks its summation path from the buffer address.
    const Vector bias_grad = delta.rowwise().sum();
    gb += bias_grad;
    if (k > 0 || grad_inputs) {
      RowMajorMap w(params.data() + spec.weight_offset(k), l.out_dim, l.in_dim);
      Matrix next = w.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (grad_inputs) *grad_inputs = std::move(delta);
}

std::vector<double> mlp_forward(const FlatParams& params, std::span<const double> input) {
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  Matrix y = mlp_forward_batch(params.spec, params.values, x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

MlpGradient mlp_backward(const FlatParams& params, std::span<const double> input,
                         std::span<const double> upstream) {
  if (upstream.size() != static_cast<std::size_t>(params.spec.output_dim())) {
    throw DimensionError("upstream gradient has " + std::to_string(upstream.size()) +
                         " entries, output has " + std::to_string(params.spec.output_dim()));
  }
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  MlpTape tape;
  mlp_forward_batch(params.spec, params.values, x, &tape);
  Matrix up = Eigen::Map<const Vector>(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  MlpGradient g;
  g.params.assign(params.spec.total_params(), 0.0);
  Matrix gx;
  mlp_backward_batch(params.spec, params.values, tape, up, g.params, &gx);
  g.input.assign(gx.data(), gx.data() + gx.size());
  return g;
}

void init_params(const MlpSpec& spec, Rng& rng, std::span<double> out) {
  if (out.size() != spec.total_params()) throw DimensionError("init buffer size mismatch");
  for (std::size_t k = 0; k < spec.num_layers(); ++k) {
    const LayerSpec& l = spec.layers()[k];
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    double* w = out.data() + spec.weight_offset(k);
    for (std::size_t i = 0; i < l.weight_count(); ++i) w[i] = uniform(rng, -bound, bound);
    double* b = out.data() + spec.bias_offset(k);
    for (int i = 0; i < l.out_dim; ++i) b[i] = 0.0;
  }
}

FlatParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x6d6c70);
  std::vector<double> v(spec.total_params());
  init_params(spec, rng, v);
  return FlatParams(spec, std::move(v));
}

}  // namespace hyperl
