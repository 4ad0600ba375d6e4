#include "hyperl/encoder.hpp"

#include <cmath>
#include <string>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

struct Geometry {
  int c_in, h_in, w_in, c_out, h_out, w_out, stride;
};

Matrix im2col(const Matrix& in, const Geometry& g, int batch) {
  const int hw_in = g.h_in * g.w_in;
  const int hw_out = g.h_out * g.w_out;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(g.c_in) * kTaps,
                             static_cast<Eigen::Index>(batch) * hw_out);
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < g.h_out; ++oy) {
      for (int ox = 0; ox < g.w_out; ++ox) {
        const Eigen::Index col = static_cast<Eigen::Index>(b) * hw_out + oy * g.w_out + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = oy * g.stride + ky - 1;
          if (iy < 0 || iy >= g.h_in) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = ox * g.stride + kx - 1;
            if (ix < 0 || ix >= g.w_in) continue;
            const Eigen::Index src = static_cast<Eigen::Index>(b) * hw_in + iy * g.w_in + ix;
            for (int c = 0; c < g.c_in; ++c) cols(c * kTaps + ky * kKernel + kx, col) = in(c, src);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Matrix& cols, const Geometry& g, int batch, Matrix& grad_in) {
  const int hw_in = g.h_in * g.w_in;
  const int hw_out = g.h_out * g.w_out;
  for (int b = 0; b < batch; ++b) {
    for (int oy = 0; oy < g.h_out; ++oy) {
      for (int ox = 0; ox < g.w_out; ++ox) {
        const Eigen::Index col = static_cast<Eigen::Index>(b) * hw_out + oy * g.w_out + ox;
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = oy * g.stride + ky - 1;
          if (iy < 0 || iy >= g.h_in) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = ox * g.stride + kx - 1;
            if (ix < 0 || ix >= g.w_in) continue;
            const Eigen::Index dst = static_cast<Eigen::Index>(b) * hw_in + iy * g.w_in + ix;
            for (int c = 0; c < g.c_in; ++c) grad_in(c, dst) += cols(c * kTaps + ky * kKernel + kx, col);
          }
        }
      }
    }
  }
}

}  // namespace

void EncoderSpec::validate() const {
  if (height < 1 || width < 1 || in_channels < 1 || channels < 1) {
    throw DimensionError("encoder input and channel sizes must be positive");
  }
  if (strides.empty()) throw DimensionError("encoder needs at least one conv layer");
  if (batch_norm.size() != strides.size()) {
    throw DimensionError("encoder batch_norm flags must match the conv layer count");
  }
  for (int s : strides) {
    if (s < 1) throw DimensionError("encoder strides must be >= 1");
  }
  if (fc_hidden < 1 || output_dim < 1) throw DimensionError("encoder dense sizes must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0) || !(bn_epsilon > 0.0)) {
    throw DimensionError("encoder batch-norm settings invalid");
  }
}

int EncoderSpec::out_height(int k) const {
  int h = height;
  for (int i = 0; i <= k; ++i) h = (h + strides[i] - 1) / strides[i];
  return h;
}

int EncoderSpec::out_width(int k) const {
  int w = width;
  for (int i = 0; i <= k; ++i) w = (w + strides[i] - 1) / strides[i];
  return w;
}

int EncoderSpec::flatten_dim() const {
  const int last = num_conv() - 1;
  return channels * out_height(last) * out_width(last);
}

MlpSpec EncoderSpec::head() const {
  const int hidden[] = {fc_hidden};
  return MlpSpec::dense(flatten_dim(), hidden, output_dim, Activation::linear);
}

std::size_t EncoderSpec::conv_weight_offset(int k) const {
  std::size_t off = 0;
  for (int i = 0; i < k; ++i) {
    const int cin = i == 0 ? in_channels : channels;
    off += static_cast<std::size_t>(channels) * cin * kTaps + channels;
    if (batch_norm[i]) off += 2 * static_cast<std::size_t>(channels);
  }
  return off;
}

std::size_t EncoderSpec::conv_bias_offset(int k) const {
  const int cin = k == 0 ? in_channels : channels;
  return conv_weight_offset(k) + static_cast<std::size_t>(channels) * cin * kTaps;
}

std::size_t EncoderSpec::bn_gamma_offset(int k) const { return conv_bias_offset(k) + channels; }
std::size_t EncoderSpec::bn_beta_offset(int k) const { return bn_gamma_offset(k) + channels; }
std::size_t EncoderSpec::head_offset() const { return conv_weight_offset(num_conv()); }
std::size_t EncoderSpec::total_params() const { return head_offset() + head().total_params(); }

int EncoderSpec::num_batch_norm() const {
  int n = 0;
  for (bool b : batch_norm) n += b ? 1 : 0;
  return n;
}

ConvEncoder::ConvEncoder(EncoderSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  params_.assign(spec_.total_params(), 0.0);
  running_.assign(static_cast<std::size_t>(spec_.num_batch_norm()) * 2 * spec_.channels, 0.0);
  for (int b = 0; b < spec_.num_batch_norm(); ++b) {
    for (int c = 0; c < spec_.channels; ++c) {
      running_[static_cast<std::size_t>(b) * 2 * spec_.channels + spec_.channels + c] = 1.0;
    }
  }
}

ConvEncoder ConvEncoder::init(EncoderSpec spec, Rng& rng) {
  ConvEncoder enc(std::move(spec));
  const EncoderSpec& s = enc.spec_;
  for (int k = 0; k < s.num_conv(); ++k) {
    const int cin = k == 0 ? s.in_channels : s.channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * kTaps));
    const std::size_t n = static_cast<std::size_t>(s.channels) * cin * kTaps;
    for (std::size_t i = 0; i < n; ++i) enc.params_[s.conv_weight_offset(k) + i] = uniform(rng, -bound, bound);
    if (s.batch_norm[k]) {
      for (int c = 0; c < s.channels; ++c) enc.params_[s.bn_gamma_offset(k) + c] = 1.0;
    }
  }
  init_params(s.head(), rng,
              std::span<double>(enc.params_).subspan(s.head_offset(), s.head().total_params()));
  return enc;
}

Matrix ConvEncoder::forward(const Matrix& fields, BatchNormMode mode, EncoderTape* tape,
                            bool update_running) {
  return forward_impl(fields, mode, tape,
                      mode == BatchNormMode::train && update_running ? &running_ : nullptr);
}

Matrix ConvEncoder::infer(const Matrix& fields) const {
  return forward_impl(fields, BatchNormMode::inference, nullptr, nullptr);
}

Matrix ConvEncoder::forward_impl(const Matrix& fields, BatchNormMode mode, EncoderTape* tape,
                                 std::vector<double>* running) const {
  const EncoderSpec& s = spec_;
  if (fields.rows() != s.input_dim()) {
    throw DimensionError("encoder expects fields of " + std::to_string(s.input_dim()) +
                         " entries, got " + std::to_string(fields.rows()));
  }
  const int batch = static_cast<int>(fields.cols());
  if (mode == BatchNormMode::train && batch * s.out_height(0) * s.out_width(0) < 2) {
    throw DimensionError("training-mode batch-norm needs more than one value per channel");
  }
  if (tape) {
    tape->mode = mode;
    tape->batch = batch;
    tape->layers.assign(s.num_conv(), {});
  }

  // Environment layout (HWC per column) -> C x (B * H * W).
  const int hw = s.height * s.width;
  Matrix x(s.in_channels, static_cast<Eigen::Index>(batch) * hw);
  for (int b = 0; b < batch; ++b) {
    for (int p = 0; p < hw; ++p) {
      for (int c = 0; c < s.in_channels; ++c) {
        x(c, static_cast<Eigen::Index>(b) * hw + p) = fields(p * s.in_channels + c, b);
      }
    }
  }

  int h = s.height, w = s.width, cin = s.in_channels;
  int bn_index = 0;
  for (int k = 0; k < s.num_conv(); ++k) {
    const Geometry g{cin, h, w, s.channels, s.out_height(k), s.out_width(k), s.strides[k]};
    RowMajorMap weights(params_.data() + s.conv_weight_offset(k), s.channels, cin * kTaps);
    Eigen::Map<const Vector> bias(params_.data() + s.conv_bias_offset(k), s.channels);
    Matrix z = weights * im2col(x, g, batch);
    z.colwise() += bias;
    if (tape) tape->layers[k].input = x;

    if (s.batch_norm[k]) {
      Eigen::Map<const Vector> gamma(params_.data() + s.bn_gamma_offset(k), s.channels);
      Eigen::Map<const Vector> beta(params_.data() + s.bn_beta_offset(k), s.channels);
      const std::size_t rs = static_cast<std::size_t>(bn_index) * 2 * s.channels;
      Vector mean(s.channels), var(s.channels);
      if (mode == BatchNormMode::train) {
        const double count = static_cast<double>(z.cols());
        mean = z.rowwise().mean();
        var = (z.colwise() - mean).array().square().rowwise().sum().matrix() / count;
        if (running) {
          const double m = s.bn_momentum;
          for (int c = 0; c < s.channels; ++c) {
            (*running)[rs + c] = m * (*running)[rs + c] + (1.0 - m) * mean(c);
            (*running)[rs + s.channels + c] =
                m * (*running)[rs + s.channels + c] + (1.0 - m) * var(c) * count / (count - 1.0);
          }
        }
      } else {
        for (int c = 0; c < s.channels; ++c) {
          mean(c) = running_[rs + c];
          var(c) = running_[rs + s.channels + c];
        }
      }
      Vector inv_std = (var.array() + s.bn_epsilon).rsqrt().matrix();
      Matrix xhat = (z.colwise() - mean).array().colwise() * inv_std.array();
      z = (xhat.array().colwise() * gamma.array()).matrix();
      z.colwise() += beta;
      if (tape) {
        tape->layers[k].normalized = std::move(xhat);
        tape->layers[k].inv_std = inv_std;
      }
      ++bn_index;
    }
    z = z.cwiseMax(0.0);
    if (tape) tape->layers[k].output = z;
    x = std::move(z);
    h = g.h_out;
    w = g.w_out;
    cin = s.channels;
  }

  // C x (B * H * W) -> (C * H * W) x B.
  const int hw_last = h * w;
  Matrix flat(static_cast<Eigen::Index>(cin) * hw_last, batch);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < cin; ++c) {
      for (int p = 0; p < hw_last; ++p) {
        flat(static_cast<Eigen::Index>(c) * hw_last + p, b) = x(c, static_cast<Eigen::Index>(b) * hw_last + p);
      }
    }
  }
  const MlpSpec head = s.head();
  std::span<const double> head_params(params_.data() + s.head_offset(), head.total_params());
  return mlp_forward_batch(head, head_params, flat, tape ? &tape->head : nullptr);
}

void ConvEncoder::backward(const EncoderTape& tape, const Matrix& upstream,
                           std::span<double> grad_params, Matrix* grad_fields) const {
  const EncoderSpec& s = spec_;
  if (grad_params.size() != s.total_params()) throw DimensionError("encoder gradient buffer size mismatch");
  if (static_cast<int>(tape.layers.size()) != s.num_conv()) throw DimensionError("tape/spec mismatch");
  const int batch = tape.batch;
  if (upstream.rows() != s.output_dim || upstream.cols() != batch) {
    throw DimensionError("encoder upstream gradient must be " + std::to_string(s.output_dim) + "x" +
                         std::to_string(batch));
  }
  const MlpSpec head = s.head();
  std::span<const double> head_params(params_.data() + s.head_offset(), head.total_params());
  Matrix g_flat;
  mlp_backward_batch(head, head_params, tape.head, upstream,
                     grad_params.subspan(s.head_offset(), head.total_params()), &g_flat);

  const int last = s.num_conv() - 1;
  const int hw_last = s.out_height(last) * s.out_width(last);
  Matrix delta(s.channels, static_cast<Eigen::Index>(batch) * hw_last);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < s.channels; ++c) {
      for (int p = 0; p < hw_last; ++p) {
        delta(c, static_cast<Eigen::Index>(b) * hw_last + p) = g_flat(static_cast<Eigen::Index>(c) * hw_last + p, b);
      }
    }
  }

  for (int k = last; k >= 0; --k) {
    const auto& layer = tape.layers[k];
    const int cin = k == 0 ? s.in_channels : s.channels;
    const int h_in = k == 0 ? s.height : s.out_height(k - 1);
    const int w_in = k == 0 ? s.width : s.out_width(k - 1);
    const Geometry g{cin, h_in, w_in, s.channels, s.out_height(k), s.out_width(k), s.strides[k]};

    delta = (layer.output.array() > 0.0).select(delta, 0.0);
    if (s.batch_norm[k]) {
      Eigen::Map<const Vector> gamma(params_.data() + s.bn_gamma_offset(k), s.channels);
      Eigen::Map<Vector> g_gamma(grad_params.data() + s.bn_gamma_offset(k), s.channels);
      Eigen::Map<Vector> g_beta(grad_params.data() + s.bn_beta_offset(k), s.channels);
      // Reductions land in owned vectors before touching the mapped buffer.
      const Vector gamma_grad = (delta.array() * layer.normalized.array()).rowwise().sum().matrix();
      const Vector beta_grad = delta.rowwise().sum();
      g_gamma += gamma_grad;
      g_beta += beta_grad;
      Matrix dxhat = delta.array().colwise() * gamma.array();
      if (tape.mode == BatchNormMode::train) {
        const double count = static_cast<double>(dxhat.cols());
        Vector sum_d = dxhat.rowwise().sum();
        Vector sum_dx = (dxhat.array() * layer.normalized.array()).rowwise().sum().matrix();
        Matrix t = (count * dxhat).colwise() - sum_d;
        t -= (layer.normalized.array().colwise() * sum_dx.array()).matrix();
        delta = (t.array().colwise() * (layer.inv_std.array() / count)).matrix();
      } else {
        delta = (dxhat.array().colwise() * layer.inv_std.array()).matrix();
      }
    }

    RowMajorMutMap g_w(grad_params.data() + s.conv_weight_offset(k), s.channels, cin * kTaps);
    Eigen::Map<Vector> g_b(grad_params.data() + s.conv_bias_offset(k), s.channels);
    const Matrix cols = im2col(layer.input, g, batch);
    g_w.noalias() += delta * cols.transpose();
    const Vector bias_grad = delta.rowwise().sum();
    g_b += bias_grad;

    if (k > 0 || grad_fields) {
      RowMajorMap weights(params_.data() + s.conv_weight_offset(k), s.channels, cin * kTaps);
      const Matrix g_cols = weights.transpose() * delta;
      Matrix g_in = Matrix::Zero(cin, static_cast<Eigen::Index>(batch) * h_in * w_in);
      col2im_add(g_cols, g, batch, g_in);
      delta = std::move(g_in);
    }
  }

  if (grad_fields) {
    const int hw = s.height * s.width;
    grad_fields->resize(s.input_dim(), batch);
    for (int b = 0; b < batch; ++b) {
      for (int p = 0; p < hw; ++p) {
        for (int c = 0; c < s.in_channels; ++c) {
          (*grad_fields)(p * s.in_channels + c, b) = delta(c, static_cast<Eigen::Index>(b) * hw + p);
        }
      }
    }
  }
}

std::vector<double> encode(const ConvEncoder& enc, std::span<const double> field) {
  if (field.size() != static_cast<std::size_t>(enc.spec().input_dim())) {
    throw DimensionError("field has " + std::to_string(field.size()) + " entries, encoder expects " +
                         std::to_string(enc.spec().input_dim()));
  }
  Matrix f = Eigen::Map<const Vector>(field.data(), static_cast<Eigen::Index>(field.size()));
  Matrix out = enc.infer(f);
  return std::vector<double>(out.data(), out.data() + out.size());
}

EncoderGradient encode_backward(const ConvEncoder& enc, std::span<const double> field,
                                std::span<const double> upstream) {
  if (field.size() != static_cast<std::size_t>(enc.spec().input_dim())) {
    throw DimensionError("field shape mismatch");
  }
  if (upstream.size() != static_cast<std::size_t>(enc.spec().output_dim)) {
    throw DimensionError("upstream gradient shape mismatch");
  }
  ConvEncoder copy = enc;
  Matrix f = Eigen::Map<const Vector>(field.data(), static_cast<Eigen::Index>(field.size()));
  EncoderTape tape;
  copy.forward(f, BatchNormMode::inference, &tape, false);
  Matrix up = Eigen::Map<const Vector>(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  EncoderGradient g;
  g.params.assign(enc.spec().total_params(), 0.0);
  Matrix gf;
  enc.backward(tape, up, g.params, &gf);
  g.field.assign(gf.data(), gf.data() + gf.size());
  return g;
}

}  // namespace hyperl
