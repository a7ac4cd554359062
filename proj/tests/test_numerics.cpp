#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cxr/numerics.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

TEST_CASE("binary entropy endpoints and midpoint") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == 1.0);
  // -0.25 log2 0.25 - 0.75 log2 0.75
  CHECK(binary_entropy(0.25) ==
        doctest::Approx(0.8112781244591328).epsilon(1e-12));
}

TEST_CASE("binary entropy symmetry and monotonicity") {
  for (int i = 0; i <= 1000; ++i) {
    const Scalar p = i / 1000.0;
    CHECK(binary_entropy(p) == binary_entropy(1.0 - p));
  }
  Scalar prev = -1.0;
  for (int i = 0; i <= 500; ++i) {
    const Scalar h = binary_entropy(i / 1000.0);
    CHECK(h > prev);
    prev = h;
  }
}

TEST_CASE("binary entropy rejects out-of-range input") {
  CHECK_THROWS_AS(binary_entropy(-1e-9), DomainError);
  CHECK_THROWS_AS(binary_entropy(1.0 + 1e-9), DomainError);
}

TEST_CASE("sigmoid is stable and symmetric") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  for (Scalar x : {-5.0, -1.0, 0.3, 2.0, 10.0})
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("adam first step is close to -lr * sign(g)") {
  // At t=1, m-hat = g and v-hat = g^2, so the step is lr * g/(|g|+eps).
  AdamState state = AdamState::make(1, 0.1);
  Vector params(1);
  params << 0.0;
  Vector grads(1);
  grads << 3.0;
  adam_step(params, grads, state);
  CHECK(params[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam with zero gradients leaves params bitwise unchanged") {
  AdamState state = AdamState::make(4, 0.01);
  RngStream rng(3);
  Vector params = rng.standard_normal_vector(4);
  const Vector before = params;
  Vector grads = Vector::Zero(4);
  for (int i = 0; i < 5; ++i) adam_step(params, grads, state);
  for (Index j = 0; j < 4; ++j) CHECK(params[j] == before[j]);
}

TEST_CASE("adam converges on a quadratic") {
  AdamState state = AdamState::make(1, 0.05);
  Vector params(1);
  params << 4.0;
  Vector grads(1);
  for (int i = 0; i < 2000; ++i) {
    grads[0] = 2.0 * (params[0] - 1.5);
    adam_step(params, grads, state);
  }
  CHECK(params[0] == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("adam rejects non-finite gradients with the offending index") {
  AdamState state = AdamState::make(3, 0.01);
  Vector params = Vector::Zero(3);
  Vector grads = Vector::Zero(3);
  grads[2] = std::nan("");
  CHECK_THROWS_AS(adam_step(params, grads, state), NumericError);
  try {
    adam_step(params, grads, state);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("adam rejects shape mismatch") {
  AdamState state = AdamState::make(3, 0.01);
  Vector params = Vector::Zero(4);
  Vector grads = Vector::Zero(4);
  CHECK_THROWS_AS(adam_step(params, grads, state), StructuralError);
}
