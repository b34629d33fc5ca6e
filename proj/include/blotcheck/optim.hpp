#ifndef BLOTCHECK_OPTIM_HPP
#define BLOTCHECK_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "blotcheck/siamese.hpp"

namespace blotcheck {

enum class OptimizerKind { SGD, Adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  MergeMode merge_mode = MergeMode::AbsDiff;
  int threads = 1;
};

/// Throws InvalidArgument.
void validate(const TrainConfig& config);

template <typename Scalar>
struct OptimizerState {
  SiameseModel<Scalar> first_moment;
  SiameseModel<Scalar> second_moment;
  long step = 0;

  static OptimizerState for_model(const SiameseModel<Scalar>& model) {
    return {SiameseModel<Scalar>::zeros(model.arch), SiameseModel<Scalar>::zeros(model.arch), 0};
  }
};

namespace detail {

/// Applies f(param, grad, m, v) to aligned parameter tensors of four same-shaped models.
template <typename Scalar, typename F>
void zip_parameters(SiameseModel<Scalar>& model, const SiameseModel<Scalar>& grads, SiameseModel<Scalar>& m,
                    SiameseModel<Scalar>& v, F&& f) {
  for (std::size_t l = 0; l < kBranchDepth; ++l) {
    f(model.branch[l].weights, grads.branch[l].weights, m.branch[l].weights, v.branch[l].weights);
    f(model.branch[l].bias, grads.branch[l].bias, m.branch[l].bias, v.branch[l].bias);
  }
  f(model.head.weights, grads.head.weights, m.head.weights, v.head.weights);
  f(model.head.bias, grads.head.bias, m.head.bias, v.head.bias);
}

}  // namespace detail

/// SGD: theta -= lr * g. Adam: bias-corrected moment recursion. Throws NonFiniteGradient
/// before touching any parameter.
template <typename Scalar>
void optimizer_step(SiameseModel<Scalar>& model, const SiameseModel<Scalar>& grads, const TrainConfig& config,
                    OptimizerState<Scalar>& state) {
  bool finite = true;
  grads.for_each_parameter([&](const Tensor<Scalar>& g) { finite = finite && g.values().allFinite(); });
  if (!finite) {
    throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
  }
  if (state.first_moment.head.weights.size() == 0) {
    state = OptimizerState<Scalar>::for_model(model);
  }
  ++state.step;
  const Scalar lr = static_cast<Scalar>(config.learning_rate);
  if (config.optimizer == OptimizerKind::SGD) {
    detail::zip_parameters(model, grads, state.first_moment, state.second_moment,
                           [&](Tensor<Scalar>& p, const Tensor<Scalar>& g, Tensor<Scalar>&, Tensor<Scalar>&) {
                             p.values() -= lr * g.values();
                           });
    return;
  }
  const Scalar b1 = static_cast<Scalar>(config.beta1);
  const Scalar b2 = static_cast<Scalar>(config.beta2);
  const Scalar eps = static_cast<Scalar>(config.epsilon);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta1, static_cast<double>(state.step)));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config.beta2, static_cast<double>(state.step)));
  detail::zip_parameters(model, grads, state.first_moment, state.second_moment,
                         [&](Tensor<Scalar>& p, const Tensor<Scalar>& g, Tensor<Scalar>& m, Tensor<Scalar>& v) {
                           m.values() = b1 * m.values() + (Scalar(1) - b1) * g.values();
                           v.values() = b2 * v.values() + (Scalar(1) - b2) * g.values().cwiseAbs2();
                           const auto m_hat = (m.values() / c1).array();
                           const auto v_hat = (v.values() / c2).array();
                           p.values().array() -= lr * m_hat / (v_hat.sqrt() + eps);
                         });
}

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& text);

}  // namespace blotcheck

#endif  // BLOTCHECK_OPTIM_HPP
