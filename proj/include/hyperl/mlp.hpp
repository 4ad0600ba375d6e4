#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hyperl/rng.hpp"

namespace hyperl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, linear };

std::string_view to_string(Activation a);

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::linear;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim);
  }
  std::size_t param_count() const { return weight_count() + static_cast<std::size_t>(out_dim); }

  bool operator==(const LayerSpec&) const = default;
};

// Ordered stack of dense layers. Construction rejects empty stacks, non-positive
// widths and incompatible neighbours, so a held MlpSpec is always valid.
//
// Flat layout: for each layer in order, the out_dim x in_dim weight matrix in
// row-major order, followed by the out_dim bias entries.
class MlpSpec {
 public:
  MlpSpec() = default;
  explicit MlpSpec(std::vector<LayerSpec> layers);

  // relu hidden layers, chosen output activation.
  static MlpSpec dense(int input_dim, std::span<const int> hidden, int output_dim,
                       Activation output_activation);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t total_params() const { return total_; }
  bool empty() const { return layers_.empty(); }
  int input_dim() const;
  int output_dim() const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + layers_.at(layer).weight_count();
  }

  bool operator==(const MlpSpec& other) const { return layers_ == other.layers_; }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

struct FlatParams {
  MlpSpec spec;
  std::vector<double> values;

  FlatParams() = default;
  FlatParams(MlpSpec s, std::vector<double> v);

  static FlatParams zeros(const MlpSpec& s);
};

// Post-activation outputs of every layer; activations[0] is the input batch.
// Columns are samples.
struct MlpTape {
  std::vector<Matrix> activations;
};

Matrix mlp_forward_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& inputs, MlpTape* tape = nullptr);

// Adds d(loss)/d(params) into grad_params. upstream holds d(loss)/d(output) per
// column. grad_inputs, when given, receives d(loss)/d(inputs).
void mlp_backward_batch(const MlpSpec& spec, std::span<const double> params,
                        const MlpTape& tape, const Matrix& upstream,
                        std::span<double> grad_params, Matrix* grad_inputs);

std::vector<double> mlp_forward(const FlatParams& params, std::span<const double> input);

struct MlpGradient {
  std::vector<double> params;
  std::vector<double> input;
};

MlpGradient mlp_backward(const FlatParams& params, std::span<const double> input,
                         std::span<const double> upstream);

// Weights uniform in +-1/sqrt(in_dim) per layer, biases zero.
FlatParams init_params(const MlpSpec& spec, std::uint64_t seed);
void init_params(const MlpSpec& spec, Rng& rng, std::span<double> out);

}  // namespace hyperl
