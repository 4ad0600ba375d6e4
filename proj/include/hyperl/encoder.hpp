#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hyperl/mlp.hpp"

namespace hyperl {

// Convolutional encoder for 2-component fields: a stack of 3x3 "same"-padded
// convolutions (relu, optional batch-norm before the relu), flatten, then a
// relu hidden dense layer and a linear output layer.
//
// Inputs use the environment field layout ((row * width) + col) * channels + c.
//
// Parameter layout: for each conv layer, weights [out][in][3][3] then biases,
// then (if batch-normed) gamma and beta; finally the dense head in MlpSpec
// layout.
struct EncoderSpec {
  int height = 21;
  int width = 21;
  int in_channels = 2;
  int channels = 32;
  std::vector<int> strides = {2, 1, 1, 1};
  std::vector<bool> batch_norm = {false, true, false, true};
  int fc_hidden = 128;
  int output_dim = 20;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  // Throws DimensionError for inconsistent shapes.
  void validate() const;
  int num_conv() const { return static_cast<int>(strides.size()); }
  int input_dim() const { return height * width * in_channels; }
  // Spatial size after conv layer k (0-based): ceil(size / stride) chained.
  int out_height(int k) const;
  int out_width(int k) const;
  int flatten_dim() const;
  MlpSpec head() const;

  std::size_t conv_weight_offset(int k) const;
  std::size_t conv_bias_offset(int k) const;
  std::size_t bn_gamma_offset(int k) const;  // only for batch-normed layers
  std::size_t bn_beta_offset(int k) const;
  std::size_t head_offset() const;
  std::size_t total_params() const;
  int num_batch_norm() const;
};

enum class BatchNormMode { train, inference };

struct EncoderTape {
  struct Layer {
    Matrix input;       // C_in x (B * H_in * W_in)
    Matrix normalized;  // x-hat for batch-normed layers
    Vector inv_std;     // per channel
    Matrix output;      // post-relu
  };
  BatchNormMode mode = BatchNormMode::inference;
  int batch = 0;
  std::vector<Layer> layers;
  MlpTape head;
};

class ConvEncoder {
 public:
  ConvEncoder() = default;
  explicit ConvEncoder(EncoderSpec spec);  // zero parameters, unit running variance

  // Conv weights uniform +-1/sqrt(fan_in), zero biases, gamma 1, beta 0.
  static ConvEncoder init(EncoderSpec spec, Rng& rng);

  const EncoderSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  // Per batch-normed layer in order: running mean (C) then running var (C).
  std::vector<double>& running_stats() { return running_; }
  const std::vector<double>& running_stats() const { return running_; }

  // fields: input_dim x B. Training mode normalizes with batch statistics and,
  // when update_running is set, folds them into the running statistics.
  Matrix forward(const Matrix& fields, BatchNormMode mode, EncoderTape* tape,
                 bool update_running);
  Matrix infer(const Matrix& fields) const;

  void backward(const EncoderTape& tape, const Matrix& upstream, std::span<double> grad_params,
                Matrix* grad_fields) const;

 private:
  Matrix forward_impl(const Matrix& fields, BatchNormMode mode, EncoderTape* tape,
                      std::vector<double>* running) const;

  EncoderSpec spec_;
  std::vector<double> params_;
  std::vector<double> running_;
};

std::vector<double> encode(const ConvEncoder& enc, std::span<const double> field);

struct EncoderGradient {
  std::vector<double> params;
  std::vector<double> field;
};

// Inference-mode gradient of <upstream, encode(field)>.
EncoderGradient encode_backward(const ConvEncoder& enc, std::span<const double> field,
                                std::span<const double> upstream);

}  // namespace hyperl
