#ifndef BLOTCHECK_LOSS_HPP
#define BLOTCHECK_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "blotcheck/error.hpp"

namespace blotcheck {

inline constexpr double kProbabilityClamp = 1e-7;

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  std::vector<Scalar> grads;  ///< d(loss)/d(prediction_i)
};

/// Mean binary cross-entropy, -(1/N) sum [y log p + (1-y) log(1-p)], with p clamped to
/// [eps, 1-eps]. Gradients are evaluated at the clamped p, so a saturated wrong prediction
/// still receives a corrective signal.
template <typename Scalar>
LossResult<Scalar> bce_loss(std::span<const Scalar> predictions, std::span<const Scalar> labels,
                            double eps = kProbabilityClamp) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  }
  if (predictions.empty()) {
    throw Error(ErrorCode::EmptyBatch, "bce_loss over an empty batch");
  }
  const double n = static_cast<double>(predictions.size());
  LossResult<Scalar> out;
  out.grads.resize(predictions.size());
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(static_cast<double>(predictions[i]), eps, 1.0 - eps);
    const double y = static_cast<double>(labels[i]);
    total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grads[i] = static_cast<Scalar>(-(y / p - (1.0 - y) / (1.0 - p)) / n);
  }
  out.loss = static_cast<Scalar>(-total / n);
  return out;
}

template <typename Scalar>
LossResult<Scalar> bce_loss(const std::vector<Scalar>& predictions, const std::vector<Scalar>& labels,
                            double eps = kProbabilityClamp) {
  return bce_loss<Scalar>(std::span<const Scalar>(predictions), std::span<const Scalar>(labels), eps);
}

}  // namespace blotcheck

#endif  // BLOTCHECK_LOSS_HPP
