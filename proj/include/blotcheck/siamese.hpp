#ifndef BLOTCHECK_SIAMESE_HPP
#define BLOTCHECK_SIAMESE_HPP

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "blotcheck/layers.hpp"

namespace blotcheck {

enum class MergeMode { AbsDiff, SignedDiff };

std::string to_string(MergeMode mode);
MergeMode merge_mode_from_string(const std::string& text);

inline constexpr std::size_t kBranchDepth = 4;

struct Architecture {
  Index input_size = 64;
  std::array<Index, kBranchDepth> channels{8, 16, 32, 64};
  Index kernel = 3;
  MergeMode merge = MergeMode::AbsDiff;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Spatial side after each conv and each pool: {S, conv1, pool1, ..., conv4, pool4}.
/// Throws ShapeMismatch when the stack collapses below 1x1.
inline std::vector<Index> spatial_trace(const Architecture& arch) {
  std::vector<Index> sides{arch.input_size};
  Index s = arch.input_size;
  for (std::size_t l = 0; l < kBranchDepth; ++l) {
    s = s - arch.kernel + 1;
    if (s < 2) {
      throw Error(ErrorCode::ShapeMismatch, "input_size " + std::to_string(arch.input_size) +
                                                " too small for the conv/pool stack");
    }
    sides.push_back(s);
    s /= 2;
    sides.push_back(s);
  }
  return sides;
}

inline Index feature_dim(const Architecture& arch) {
  const Index side = spatial_trace(arch).back();
  return arch.channels.back() * side * side;
}

/// Twin-branch classifier. There is one branch parameter set: both inputs run through the same
/// `branch` layers, so weight sharing holds by construction.
template <typename Scalar>
struct SiameseModel {
  Architecture arch;
  std::array<ConvLayer<Scalar>, kBranchDepth> branch;
  DenseLayer<Scalar> head;

  static SiameseModel zeros(const Architecture& arch) {
    SiameseModel m;
    m.arch = arch;
    Index in_ch = 1;
    for (std::size_t l = 0; l < kBranchDepth; ++l) {
      m.branch[l] = ConvLayer<Scalar>::zeros(arch.channels[l], in_ch, arch.kernel, arch.kernel);
      in_ch = arch.channels[l];
    }
    m.head = DenseLayer<Scalar>::zeros(1, feature_dim(arch));
    return m;
  }

  /// Visits parameters in declaration order: conv{1..4}.weights, conv{1..4}.bias interleaved
  /// per layer, then head.weights, head.bias.
  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& layer : branch) {
      f(layer.weights);
      f(layer.bias);
    }
    f(head.weights);
    f(head.bias);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto& layer : branch) {
      f(layer.weights);
      f(layer.bias);
    }
    f(head.weights);
    f(head.bias);
  }

  Index parameter_count() const {
    Index n = 0;
    for_each_parameter([&](const Tensor<Scalar>& t) { n += t.size(); });
    return n;
  }

  template <typename To>
  SiameseModel<To> cast() const {
    SiameseModel<To> out;
    out.arch = arch;
    for (std::size_t l = 0; l < kBranchDepth; ++l) {
      out.branch[l] = {branch[l].weights.template cast<To>(), branch[l].bias.template cast<To>()};
    }
    out.head = {head.weights.template cast<To>(), head.bias.template cast<To>()};
    return out;
  }

  void set_zero() {
    for_each_parameter([](Tensor<Scalar>& t) { t.set_zero(); });
  }
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases, drawn from a seeded engine.
template <typename Scalar>
SiameseModel<Scalar> init_model(const Architecture& arch, std::uint64_t seed) {
  auto m = SiameseModel<Scalar>::zeros(arch);
  std::mt19937_64 rng(seed);
  auto fill = [&](Tensor<Scalar>& w, Index fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index i = 0; i < w.size(); ++i) {
      w[i] = static_cast<Scalar>(dist(rng));
    }
  };
  for (auto& layer : m.branch) {
    fill(layer.weights, layer.fan_in());
  }
  fill(m.head.weights, m.head.in_features());
  return m;
}

/// Intermediate values of one branch pass, retained for backpropagation.
template <typename Scalar>
struct BranchTrace {
  std::array<std::vector<Index>, kBranchDepth> input_shapes;
  std::array<RowMatrix<Scalar>, kBranchDepth> columns;
  std::array<Tensor<Scalar>, kBranchDepth> pre_activations;
  std::array<std::vector<Index>, kBranchDepth> argmax;
  std::array<std::vector<Index>, kBranchDepth> pooled_shapes;
};

namespace detail {

template <typename Scalar>
void check_panel(const Tensor<Scalar>& panel, const Architecture& arch) {
  if (panel.rank() != 3 || panel.dim(0) != 1 || panel.dim(1) != arch.input_size || panel.dim(2) != arch.input_size) {
    throw Error(ErrorCode::ShapeMismatch, "panel " + panel.shape_string() + " does not match input size " +
                                              std::to_string(arch.input_size));
  }
}

}  // namespace detail

/// [conv -> relu -> maxpool2] x 4, flattened to a feature vector of feature_dim(arch).
template <typename Scalar>
Tensor<Scalar> branch_forward(const Tensor<Scalar>& panel, const SiameseModel<Scalar>& model,
                              BranchTrace<Scalar>* trace = nullptr) {
  detail::check_panel(panel, model.arch);
  Tensor<Scalar> x = panel;
  for (std::size_t l = 0; l < kBranchDepth; ++l) {
    const auto& layer = model.branch[l];
    detail::check_conv_input(x, layer);
    const Index ho = x.dim(1) - layer.kernel_h() + 1;
    const Index wo = x.dim(2) - layer.kernel_w() + 1;
    RowMatrix<Scalar> cols = im2col(x, layer.kernel_h(), layer.kernel_w());
    Tensor<Scalar> pre = conv2d_from_columns(cols, ho, wo, layer);
    auto pooled = maxpool2(relu(pre));
    if (trace) {
      trace->input_shapes[l] = x.shape();
      trace->columns[l] = std::move(cols);
      trace->pooled_shapes[l] = pooled.output.shape();
      trace->argmax[l] = std::move(pooled.argmax);
      trace->pre_activations[l] = std::move(pre);
    }
    x = std::move(pooled.output);
  }
  const Index n = x.size();
  return Tensor<Scalar>({n}, std::move(x.values()));
}

/// Accumulates parameter gradients of one branch pass into `grads`.
template <typename Scalar>
void branch_backward(const Tensor<Scalar>& grad_feature, const BranchTrace<Scalar>& trace,
                     const SiameseModel<Scalar>& model, SiameseModel<Scalar>& grads) {
  Tensor<Scalar> g(trace.pooled_shapes[kBranchDepth - 1], grad_feature.values());
  for (std::size_t l = kBranchDepth; l-- > 0;) {
    const auto& pre = trace.pre_activations[l];
    Tensor<Scalar> g_act = maxpool2_backward(g, trace.argmax[l], pre.shape());
    Tensor<Scalar> g_pre = relu_backward(g_act, pre);
    g = conv2d_backward_accumulate(g_pre, trace.columns[l], trace.input_shapes[l], model.branch[l],
                                   grads.branch[l].weights, grads.branch[l].bias, /*need_input_grad=*/l > 0);
  }
}

template <typename Scalar>
struct PairForward {
  BranchTrace<Scalar> trace_a;
  BranchTrace<Scalar> trace_b;
  Tensor<Scalar> feature_a;
  Tensor<Scalar> feature_b;
  Tensor<Scalar> merged;
  Scalar logit = 0;
  Scalar probability = 0;
};

template <typename Scalar>
Tensor<Scalar> merge_features(const Tensor<Scalar>& fa, const Tensor<Scalar>& fb, MergeMode mode) {
  if (fa.shape() != fb.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "feature shapes differ");
  }
  Vector<Scalar> d = fa.values() - fb.values();
  if (mode == MergeMode::AbsDiff) {
    d = d.cwiseAbs();
  }
  return Tensor<Scalar>(fa.shape(), std::move(d));
}

template <typename Scalar>
Scalar head_logit(const Tensor<Scalar>& merged, const DenseLayer<Scalar>& head) {
  if (merged.size() != head.in_features()) {
    throw Error(ErrorCode::ShapeMismatch, "head expects " + std::to_string(head.in_features()) + " features");
  }
  return head.weights.values().dot(merged.values()) + head.bias[0];
}

/// Full pair pass with traces kept for siamese_backward.
template <typename Scalar>
PairForward<Scalar> siamese_forward_traced(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                                           const SiameseModel<Scalar>& model, MergeMode mode) {
  PairForward<Scalar> f;
  f.feature_a = branch_forward(a, model, &f.trace_a);
  f.feature_b = branch_forward(b, model, &f.trace_b);
  f.merged = merge_features(f.feature_a, f.feature_b, mode);
  f.logit = head_logit(f.merged, model.head);
  f.probability = sigmoid(f.logit);
  return f;
}

/// Probability that the pair is a copy: sigmoid(head(merge(f(a), f(b)))).
template <typename Scalar>
Scalar siamese_forward(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const SiameseModel<Scalar>& model,
                       MergeMode mode) {
  const auto fa = branch_forward(a, model);
  const auto fb = branch_forward(b, model);
  return sigmoid(head_logit(merge_features(fa, fb, mode), model.head));
}

template <typename Scalar>
Scalar siamese_forward(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const SiameseModel<Scalar>& model) {
  return siamese_forward(a, b, model, model.arch.merge);
}

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(probability).
template <typename Scalar>
void siamese_backward(const PairForward<Scalar>& f, Scalar grad_probability, MergeMode mode,
                      const SiameseModel<Scalar>& model, SiameseModel<Scalar>& grads) {
  const Scalar grad_logit = grad_probability * f.probability * (Scalar(1) - f.probability);
  grads.head.weights.values() += grad_logit * f.merged.values();
  grads.head.bias[0] += grad_logit;
  Vector<Scalar> grad_merged = grad_logit * model.head.weights.values();
  Vector<Scalar> grad_a;
  if (mode == MergeMode::AbsDiff) {
    const Vector<Scalar> diff = f.feature_a.values() - f.feature_b.values();
    // d|x|/dx taken as 0 at x == 0.
    grad_a = grad_merged.cwiseProduct(
        diff.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); }));
  } else {
    grad_a = grad_merged;
  }
  const Tensor<Scalar> ga(f.feature_a.shape(), grad_a);
  const Tensor<Scalar> gb(f.feature_b.shape(), Vector<Scalar>(-grad_a));
  branch_backward(ga, f.trace_a, model, grads);
  branch_backward(gb, f.trace_b, model, grads);
}

}  // namespace blotcheck

#endif  // BLOTCHECK_SIAMESE_HPP
