#ifndef BLOTCHECK_LAYERS_HPP
#define BLOTCHECK_LAYERS_HPP

#include <cmath>
#include <vector>

#include "blotcheck/tensor.hpp"

namespace blotcheck {

/// Valid (no padding), stride-1 cross-correlation layer.
template <typename Scalar>
struct ConvLayer {
  Tensor<Scalar> weights;  ///< (out_ch, in_ch, kh, kw)
  Tensor<Scalar> bias;     ///< (out_ch)

  static ConvLayer zeros(Index out_ch, Index in_ch, Index kh, Index kw) {
    if (kh % 2 == 0 || kw % 2 == 0) {
      throw Error(ErrorCode::InvalidArgument, "conv kernel sides must be odd");
    }
    return {Tensor<Scalar>({out_ch, in_ch, kh, kw}), Tensor<Scalar>({out_ch})};
  }

  Index out_channels() const { return weights.dim(0); }
  Index in_channels() const { return weights.dim(1); }
  Index kernel_h() const { return weights.dim(2); }
  Index kernel_w() const { return weights.dim(3); }
  Index fan_in() const { return in_channels() * kernel_h() * kernel_w(); }

  auto weight_matrix() const { return weights.matrix(out_channels(), fan_in()); }
};

/// Fully connected layer y = W x + b.
template <typename Scalar>
struct DenseLayer {
  Tensor<Scalar> weights;  ///< (out, in)
  Tensor<Scalar> bias;     ///< (out)

  static DenseLayer zeros(Index out, Index in) { return {Tensor<Scalar>({out, in}), Tensor<Scalar>({out})}; }

  Index out_features() const { return weights.dim(0); }
  Index in_features() const { return weights.dim(1); }
};

namespace detail {

template <typename Scalar>
void check_conv_input(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer) {
  if (input.rank() != 3 || input.dim(0) != layer.in_channels()) {
    throw Error(ErrorCode::ShapeMismatch, "conv input " + input.shape_string() + " vs layer " +
                                              layer.weights.shape_string());
  }
  if (input.dim(1) < layer.kernel_h() || input.dim(2) < layer.kernel_w()) {
    throw Error(ErrorCode::ShapeMismatch, "conv input " + input.shape_string() + " smaller than kernel");
  }
}

}  // namespace detail

/// Unfolds (C,H,W) into a (C*kh*kw, Ho*Wo) matrix whose column j holds the receptive field of
/// output pixel j.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& input, Index kh, Index kw) {
  const Index c_in = input.dim(0);
  const Index h = input.dim(1);
  const Index w = input.dim(2);
  const Index ho = h - kh + 1;
  const Index wo = w - kw + 1;
  RowMatrix<Scalar> cols(c_in * kh * kw, ho * wo);
  for (Index c = 0; c < c_in; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        Scalar* row = cols.row((c * kh + i) * kw + j).data();
        for (Index y = 0; y < ho; ++y) {
          const Scalar* src = input.data() + (c * h + y + i) * w + j;
          std::copy(src, src + wo, row + y * wo);
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters column gradients back onto a (C,H,W) tensor.
template <typename Scalar>
Tensor<Scalar> col2im(const RowMatrix<Scalar>& cols, const std::vector<Index>& input_shape, Index kh, Index kw) {
  Tensor<Scalar> out(input_shape);
  const Index c_in = input_shape[0];
  const Index h = input_shape[1];
  const Index w = input_shape[2];
  const Index ho = h - kh + 1;
  const Index wo = w - kw + 1;
  for (Index c = 0; c < c_in; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Scalar* row = cols.row((c * kh + i) * kw + j).data();
        for (Index y = 0; y < ho; ++y) {
          Scalar* dst = out.data() + (c * h + y + i) * w + j;
          for (Index x = 0; x < wo; ++x) {
            dst[x] += row[y * wo + x];
          }
        }
      }
    }
  }
  return out;
}

/// Convolution from precomputed columns; `columns` is what im2col(input) returns.
template <typename Scalar>
Tensor<Scalar> conv2d_from_columns(const RowMatrix<Scalar>& columns, Index ho, Index wo,
                                   const ConvLayer<Scalar>& layer) {
  Tensor<Scalar> out({layer.out_channels(), ho, wo});
  auto result = out.matrix(layer.out_channels(), ho * wo);
  result.noalias() = layer.weight_matrix() * columns;
  result.colwise() += layer.bias.values();
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer) {
  detail::check_conv_input(input, layer);
  const Index ho = input.dim(1) - layer.kernel_h() + 1;
  const Index wo = input.dim(2) - layer.kernel_w() + 1;
  return conv2d_from_columns(im2col(input, layer.kernel_h(), layer.kernel_w()), ho, wo, layer);
}

template <typename Scalar>
struct ConvGradients {
  Tensor<Scalar> grad_input;
  Tensor<Scalar> grad_weights;
  Tensor<Scalar> grad_bias;
};

/// Backward pass given the forward columns. Parameter gradients are accumulated into
/// `grad_weights` / `grad_bias`; the returned tensor is the input gradient (skipped when
/// `need_input_grad` is false, e.g. for the first layer).
template <typename Scalar>
Tensor<Scalar> conv2d_backward_accumulate(const Tensor<Scalar>& grad_out, const RowMatrix<Scalar>& columns,
                                          const std::vector<Index>& input_shape, const ConvLayer<Scalar>& layer,
                                          Tensor<Scalar>& grad_weights, Tensor<Scalar>& grad_bias,
                                          bool need_input_grad = true) {
  const Index c_out = layer.out_channels();
  if (grad_out.rank() != 3 || grad_out.dim(0) != c_out || grad_out.dim(1) * grad_out.dim(2) != columns.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "conv grad_out " + grad_out.shape_string() + " inconsistent with forward");
  }
  const auto g = grad_out.matrix(c_out, columns.cols());
  grad_weights.matrix(c_out, layer.fan_in()).noalias() += g * columns.transpose();
  grad_bias.values() += g.rowwise().sum();
  if (!need_input_grad) {
    return {};
  }
  const RowMatrix<Scalar> grad_cols = layer.weight_matrix().transpose() * g;
  return col2im(grad_cols, input_shape, layer.kernel_h(), layer.kernel_w());
}

template <typename Scalar>
ConvGradients<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& input,
                                      const ConvLayer<Scalar>& layer) {
  detail::check_conv_input(input, layer);
  const Index ho = input.dim(1) - layer.kernel_h() + 1;
  const Index wo = input.dim(2) - layer.kernel_w() + 1;
  if (grad_out.rank() != 3 || grad_out.dim(1) != ho || grad_out.dim(2) != wo) {
    throw Error(ErrorCode::ShapeMismatch, "conv grad_out " + grad_out.shape_string() + " inconsistent with forward");
  }
  ConvGradients<Scalar> grads{{}, Tensor<Scalar>(layer.weights.shape()), Tensor<Scalar>(layer.bias.shape())};
  grads.grad_input = conv2d_backward_accumulate(grad_out, im2col(input, layer.kernel_h(), layer.kernel_w()),
                                                input.shape(), layer, grads.grad_weights, grads.grad_bias);
  return grads;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& t) {
  return Tensor<Scalar>(t.shape(), t.values().cwiseMax(Scalar(0)));
}

/// Passes the gradient where the forward input was strictly positive.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad, const Tensor<Scalar>& forward_input) {
  if (grad.shape() != forward_input.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "relu grad shape mismatch");
  }
  return Tensor<Scalar>(grad.shape(),
                        (forward_input.values().array() > Scalar(0)).select(grad.values(), Scalar(0)).matrix());
}

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  ///< flat input index feeding each output element
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped. Ties go to the first
/// element of the window in row-major order.
template <typename Scalar>
PoolResult<Scalar> maxpool2(const Tensor<Scalar>& t) {
  if (t.rank() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "maxpool2 expects (C,H,W)");
  }
  const Index c_n = t.dim(0);
  const Index h = t.dim(1);
  const Index w = t.dim(2);
  if (h < 2 || w < 2) {
    throw Error(ErrorCode::InputTooSmall, "maxpool2 needs H, W >= 2, got " + t.shape_string());
  }
  const Index ho = h / 2;
  const Index wo = w / 2;
  PoolResult<Scalar> r{Tensor<Scalar>({c_n, ho, wo}), std::vector<Index>(static_cast<std::size_t>(c_n * ho * wo))};
  Index o = 0;
  for (Index c = 0; c < c_n; ++c) {
    for (Index y = 0; y < ho; ++y) {
      for (Index x = 0; x < wo; ++x, ++o) {
        Index best = (c * h + 2 * y) * w + 2 * x;
        for (Index dy = 0; dy < 2; ++dy) {
          for (Index dx = 0; dx < 2; ++dx) {
            const Index idx = (c * h + 2 * y + dy) * w + 2 * x + dx;
            if (t[idx] > t[best]) {
              best = idx;
            }
          }
        }
        r.output[o] = t[best];
        r.argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2_backward(const Tensor<Scalar>& grad_out, const std::vector<Index>& argmax,
                                 const std::vector<Index>& input_shape) {
  if (grad_out.size() != static_cast<Index>(argmax.size())) {
    throw Error(ErrorCode::ShapeMismatch, "maxpool grad/argmax length mismatch");
  }
  Tensor<Scalar> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    g[argmax[i]] += grad_out[static_cast<Index>(i)];
  }
  return g;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
  }
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace blotcheck

#endif  // BLOTCHECK_LAYERS_HPP
