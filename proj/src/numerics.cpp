#include "cxr/numerics.hpp"

#include <cmath>
#include <string>

namespace cxr {

Scalar binary_entropy(Scalar p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw DomainError("binary_entropy: p must lie in [0,1]");
  // canonicalize on the larger of {p, 1-p}; its complement is exact, so
  // H(p) and H(1-p) evaluate the identical expression
  const Scalar big = std::max(p, 1.0 - p);
  const Scalar small = 1.0 - big;
  if (small == 0.0) return 0.0;
  return -(small * std::log2(small) + big * std::log2(big));
}

Scalar sigmoid(Scalar x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

AdamState AdamState::make(Index n_params, Scalar learning_rate, Scalar beta1,
                          Scalar beta2, Scalar epsilon) {
  AdamState s;
  s.first_moment = Vector::Zero(n_params);
  s.second_moment = Vector::Zero(n_params);
  s.step_count = 0;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void adam_step(Vector& params, const Vector& grads, AdamState& state) {
  const Index n = params.size();
  if (grads.size() != n || state.first_moment.size() != n ||
      state.second_moment.size() != n) {
    throw StructuralError("adam_step: parameter/gradient/state shape mismatch");
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at parameter index " +
                         std::to_string(i));
    }
  }
  state.step_count += 1;
  const Scalar t = static_cast<Scalar>(state.step_count);
  state.first_moment =
      state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * grads.array().square().matrix();
  const Scalar bias1 = 1.0 - std::pow(state.beta1, t);
  const Scalar bias2 = 1.0 - std::pow(state.beta2, t);
  params.array() -=
      state.learning_rate * (state.first_moment.array() / bias1) /
      ((state.second_moment.array() / bias2).sqrt() + state.epsilon);
}

}  // namespace cxr
