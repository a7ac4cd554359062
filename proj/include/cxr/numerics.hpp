#pragma once

#include "cxr/errors.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Shannon entropy of a Bernoulli(p) variable in bits, with 0*log2(0) = 0.
/// Symmetric in p <-> 1-p, maximal (1.0) at p = 0.5.
Scalar binary_entropy(Scalar p);

Scalar sigmoid(Scalar x);

/// Adam optimizer state over a flat parameter vector.
struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  Scalar learning_rate = 7.5e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-7;

  static AdamState make(Index n_params, Scalar learning_rate,
                        Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                        Scalar epsilon = 1e-7);
};

/// One bias-corrected Adam update, in place. Shapes of params, grads and the
/// moment vectors must agree; a non-finite gradient entry is a NumericError
/// naming the offending index.
void adam_step(Vector& params, const Vector& grads, AdamState& state);

}  // namespace cxr
