#ifndef BLOTCHECK_GRADCHECK_HPP
#define BLOTCHECK_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>

#include "blotcheck/loss.hpp"
#include "blotcheck/siamese.hpp"

namespace blotcheck {

struct GradCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  /// Coordinates whose +/-h stencil crossed a ReLU, max-pool or |.| switch point; the central
  /// difference is not a derivative estimate there, so they are redrawn.
  int skipped_nonsmooth = 0;
  /// Coordinates whose reference derivative was recomputed in extended precision.
  int extended = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates drawn per parameter tensor (capped by its size).
  int samples_per_tensor = 30;
  std::uint64_t seed = 0;
  MergeMode merge = MergeMode::AbsDiff;
};

/// Relative error denominator floor.
inline constexpr double kGradFloor = 1e-8;

/// An f64 central difference carries about ulp(loss) / 2h ~ 1e-11 of round-off. Exactly-zero
/// gradients occur (e.g. a last-layer bias that shifts both branch features equally), so below
/// this magnitude the reference derivative is recomputed in long double.
inline constexpr double kExtendedBelow = 1e-6;

namespace detail {

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  return (h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

/// One branch pass that a probe can resume at any layer.
template <typename Scalar>
struct StagedBranch {
  std::array<Tensor<Scalar>, kBranchDepth + 1> inputs;  ///< inputs[l] feeds layer l; the last is the feature map
  std::array<RowMatrix<Scalar>, kBranchDepth> columns;  ///< im2col(inputs[l]), unperturbed pass only
  std::array<Tensor<Scalar>, kBranchDepth> pre;         ///< conv outputs, unperturbed pass only
  std::array<std::uint64_t, kBranchDepth> pattern{};    ///< ReLU signs and pool winners per layer
};

/// Runs layers [from, depth). Without `base` the pass is recorded as the unperturbed one. With
/// `base`, only output channel `channel` of layer `from` is recomputed; the rest of that layer's
/// conv output is taken from `base`.
template <typename Scalar>
void run_layers(StagedBranch<Scalar>& s, const SiameseModel<Scalar>& model, std::size_t from, Index channel,
                const StagedBranch<Scalar>* base) {
  const bool record = base == nullptr;
  for (std::size_t l = from; l < kBranchDepth; ++l) {
    const auto& layer = model.branch[l];
    const auto& x = s.inputs[l];
    const Index ho = x.dim(1) - layer.kernel_h() + 1;
    const Index wo = x.dim(2) - layer.kernel_w() + 1;
    Tensor<Scalar> pre;
    if (l == from && base) {
      pre = base->pre[l];
      auto out = pre.matrix(layer.out_channels(), ho * wo);
      out.row(channel).noalias() = layer.weight_matrix().row(channel) * base->columns[l];
      out.row(channel).array() += layer.bias[channel];
    } else {
      RowMatrix<Scalar> cols = im2col(x, layer.kernel_h(), layer.kernel_w());
      pre = conv2d_from_columns(cols, ho, wo, layer);
      if (record) {
        s.columns[l] = std::move(cols);
      }
    }
    auto pooled = maxpool2(relu(pre));
    std::uint64_t h = 1469598103934665603ULL;
    for (Index i = 0; i < pre.size(); ++i) {
      h = mix(h, pre[i] > Scalar(0));
    }
    for (Index idx : pooled.argmax) {
      h = mix(h, static_cast<std::uint64_t>(idx));
    }
    s.pattern[l] = h;
    if (record) {
      s.pre[l] = std::move(pre);
    }
    s.inputs[l + 1] = std::move(pooled.output);
  }
}

template <typename Scalar>
struct StagedPair {
  StagedBranch<Scalar> a;
  StagedBranch<Scalar> b;
  std::uint64_t merge_pattern = 0;
  Scalar probability = 0;
};

/// Same arithmetic as merge_features + head_logit + sigmoid.
template <typename Scalar>
void finish(StagedPair<Scalar>& p, const SiameseModel<Scalar>& model, MergeMode mode) {
  const Vector<Scalar> d = p.a.inputs[kBranchDepth].values() - p.b.inputs[kBranchDepth].values();
  std::uint64_t h = 1469598103934665603ULL;
  for (Index i = 0; i < d.size(); ++i) {
    h = mix(h, d[i] > Scalar(0) ? 2u : (d[i] < Scalar(0) ? 1u : 0u));
  }
  p.merge_pattern = h;
  const Vector<Scalar> merged = mode == MergeMode::AbsDiff ? Vector<Scalar>(d.cwiseAbs()) : d;
  p.probability = sigmoid(Scalar(model.head.weights.values().dot(merged) + model.head.bias[0]));
}

template <typename Scalar>
Scalar bce_single(Scalar p, Scalar y) {
  const auto eps = static_cast<Scalar>(kProbabilityClamp);
  p = std::clamp(p, eps, Scalar(1) - eps);
  return -(y * std::log(p) + (Scalar(1) - y) * std::log(Scalar(1) - p));
}

/// Evaluates the pair loss with one parameter replaced, recomputing only the layers it feeds.
template <typename Scalar>
class Prober {
 public:
  Prober(SiameseModel<Scalar> model, const Tensor<Scalar>& a, const Tensor<Scalar>& b, Scalar label, MergeMode mode)
      : model_(std::move(model)), label_(label), mode_(mode) {
    model_.for_each_parameter([&](Tensor<Scalar>& t) { params_.push_back(&t); });
    base_.a.inputs[0] = a;
    base_.b.inputs[0] = b;
    run_layers<Scalar>(base_.a, model_, 0, -1, nullptr);
    run_layers<Scalar>(base_.b, model_, 0, -1, nullptr);
    finish(base_, model_, mode_);
  }

  /// Loss at parameter (tensor t, index idx) = value. `smooth` is false when any branch decision
  /// differs from the unperturbed pass.
  Scalar loss_at(std::size_t t, Index idx, Scalar value, bool& smooth) {
    Tensor<Scalar>& param = *params_[t];
    const Scalar original = param[idx];
    param[idx] = value;
    StagedPair<Scalar> p;
    p.a.inputs = base_.a.inputs;
    p.b.inputs = base_.b.inputs;
    p.a.pattern = base_.a.pattern;
    p.b.pattern = base_.b.pattern;
    const std::size_t layer = t / 2;  // weights, bias per conv layer, then the head
    if (layer < kBranchDepth) {
      // Weight (c, ...) and bias (c) both feed output channel c only.
      const Index per_channel = param.size() / model_.branch[layer].out_channels();
      const Index channel = idx / per_channel;
      run_layers(p.a, model_, layer, channel, &base_.a);
      run_layers(p.b, model_, layer, channel, &base_.b);
    }
    finish(p, model_, mode_);
    param[idx] = original;
    smooth = p.merge_pattern == base_.merge_pattern && p.a.pattern == base_.a.pattern && p.b.pattern == base_.b.pattern;
    return bce_single(p.probability, label_);
  }

 private:
  SiameseModel<Scalar> model_;
  std::vector<Tensor<Scalar>*> params_;
  StagedPair<Scalar> base_;
  Scalar label_;
  MergeMode mode_;
};

}  // namespace detail

/// Analytic gradients of bce_loss(siamese_forward(a, b)) against central differences on a random
/// subset of parameters drawn from every tensor. Returns the max of
/// |g_a - g_n| / max(|g_a|, |g_n|, kGradFloor).
inline GradCheckResult grad_check(const SiameseModel<double>& model, const Tensor<double>& a, const Tensor<double>& b,
                                  double label, const GradCheckOptions& options = {}) {
  const auto base = siamese_forward_traced(a, b, model, options.merge);
  const double p = base.probability;
  const auto loss = bce_loss<double>(std::span<const double>(&p, 1), std::span<const double>(&label, 1));
  auto analytic = SiameseModel<double>::zeros(model.arch);
  siamese_backward(base, loss.grads[0], options.merge, model, analytic);
  std::vector<const Tensor<double>*> analytic_params;
  analytic.for_each_parameter([&](const Tensor<double>& t) { analytic_params.push_back(&t); });

  std::vector<const Tensor<double>*> params;
  model.for_each_parameter([&](const Tensor<double>& t) { params.push_back(&t); });
  detail::Prober<double> probe(model, a, b, label, options.merge);
  std::optional<detail::Prober<long double>> extended;

  const double h = options.step;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const Tensor<double>& param = *params[t];
    const int wanted = static_cast<int>(std::min<Index>(options.samples_per_tensor, param.size()));
    std::vector<Index> order(static_cast<std::size_t>(param.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    int taken = 0;
    for (Index idx : order) {
      if (taken == wanted) {
        break;
      }
      const double original = param[idx];
      const double exact = (*analytic_params[t])[idx];
      bool smooth_plus = false;
      bool smooth_minus = false;
      double numeric = 0.0;
      bool use_extended = std::abs(exact) < kExtendedBelow;
      if (!use_extended) {
        const double plus = probe.loss_at(t, idx, original + h, smooth_plus);
        const double minus = probe.loss_at(t, idx, original - h, smooth_minus);
        numeric = (plus - minus) / (2.0 * h);
        use_extended = smooth_plus && smooth_minus && std::abs(numeric) < kExtendedBelow;
      }
      if (use_extended) {
        if (!extended) {
          extended.emplace(model.cast<long double>(), a.cast<long double>(), b.cast<long double>(),
                           static_cast<long double>(label), options.merge);
        }
        const long double x0 = original;
        const long double step = h;
        const long double plus = extended->loss_at(t, idx, x0 + step, smooth_plus);
        const long double minus = extended->loss_at(t, idx, x0 - step, smooth_minus);
        numeric = static_cast<double>((plus - minus) / (2 * step));
        result.extended += smooth_plus && smooth_minus;
      }
      if (!smooth_plus || !smooth_minus) {
        ++result.skipped_nonsmooth;
        continue;
      }
      const double denom = std::max({std::abs(exact), std::abs(numeric), kGradFloor});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(exact - numeric) / denom);
      ++result.checked;
      ++taken;
    }
  }
  return result;
}

}  // namespace blotcheck

#endif  // BLOTCHECK_GRADCHECK_HPP
