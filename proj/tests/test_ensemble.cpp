#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "cxr/ensemble.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

std::vector<PredictionMatrix> random_members(RngStream& rng, int m, Index n,
                                             Index k) {
  std::vector<PredictionMatrix> members;
  for (int i = 0; i < m; ++i) {
    PredictionMatrix pm;
    pm.values.resize(n, k);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < k; ++c) pm.values(r, c) = rng.uniform(0.0, 1.0);
    pm.source_tag = "member" + std::to_string(i);
    members.push_back(std::move(pm));
  }
  return members;
}

}  // namespace

TEST_CASE("simple average of identical members is the member, bitwise") {
  RngStream rng(1);
  auto members = random_members(rng, 1, 6, 3);
  for (int i = 0; i < 4; ++i) {
    PredictionMatrix copy = members[0];
    copy.source_tag = "copy" + std::to_string(i);
    members.push_back(copy);
  }
  const EnsembleOutput out = simple_average(members);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 3; ++c)
      CHECK(out.values(r, c) == members[0].values(r, c));
  CHECK(out.member_tags.size() == 5);
}

TEST_CASE("simple average equals the elementwise mean") {
  RngStream rng(2);
  const auto members = random_members(rng, 4, 5, 2);
  const EnsembleOutput out = simple_average(members);
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 2; ++c) {
      Scalar sum = 0;
      for (const auto& m : members) sum += m.values(r, c);
      CHECK(out.values(r, c) == doctest::Approx(sum / 4.0).epsilon(1e-15));
    }
}

TEST_CASE("literal entropy average never exceeds the simple average") {
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    RngStream t = rng.split(static_cast<std::uint64_t>(trial));
    const int m = 1 + static_cast<int>(t.next_u64() % 6);
    const auto members = random_members(t, m, 8, 3);
    const RowMatrix simple = simple_average(members).values;
    const RowMatrix weighted = entropy_weighted_average(members, false).values;
    for (Index r = 0; r < 8; ++r)
      for (Index c = 0; c < 3; ++c) {
        CHECK(weighted(r, c) <= simple(r, c) + 1e-15);
        CHECK(weighted(r, c) >= 0.0);
        CHECK(weighted(r, c) <= 1.0);
      }
  }
}

TEST_CASE("all-binary members make the entropy average exact") {
  RngStream rng(4);
  std::vector<PredictionMatrix> members;
  for (int i = 0; i < 3; ++i) {
    PredictionMatrix pm;
    pm.values.resize(4, 2);
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 2; ++c)
        pm.values(r, c) = rng.next_u64() % 2 ? 1.0 : 0.0;
    members.push_back(std::move(pm));
  }
  const RowMatrix simple = simple_average(members).values;
  const RowMatrix weighted = entropy_weighted_average(members, false).values;
  CHECK((weighted - simple).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-member {0.5, 1.0} cell resolves to 0.5") {
  PredictionMatrix a, b;
  a.values.resize(1, 1);
  a.values(0, 0) = 0.5;
  b.values.resize(1, 1);
  b.values(0, 0) = 1.0;
  const EnsembleOutput out = entropy_weighted_average({a, b}, false);
  CHECK(out.values(0, 0) == 0.5);
}

TEST_CASE("all members certain at 1.0 stays 1.0") {
  PredictionMatrix a;
  a.values = RowMatrix::Constant(3, 2, 1.0);
  const EnsembleOutput out = entropy_weighted_average({a, a, a}, false);
  CHECK((out.values.array() == 1.0).all());
}

TEST_CASE("member order does not matter") {
  RngStream rng(5);
  auto members = random_members(rng, 5, 6, 2);
  const RowMatrix simple = simple_average(members).values;
  const RowMatrix weighted = entropy_weighted_average(members, false).values;
  const RowMatrix weighted_norm = entropy_weighted_average(members, true).values;
  std::reverse(members.begin(), members.end());
  CHECK((simple_average(members).values - simple).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((entropy_weighted_average(members, false).values - weighted)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK((entropy_weighted_average(members, true).values - weighted_norm)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("normalized variant: identical members pass through, 0.5 falls back") {
  PredictionMatrix a;
  a.values.resize(2, 1);
  a.values << 0.9, 0.5;
  const EnsembleOutput out = entropy_weighted_average({a, a}, true);
  CHECK(out.values(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
  // H(0.5) = 1 zeroes every weight: fall back to the simple average
  CHECK(out.values(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("shape mismatches and empty member lists are rejected") {
  PredictionMatrix a, b;
  a.values = RowMatrix::Constant(2, 2, 0.5);
  b.values = RowMatrix::Constant(2, 3, 0.5);
  CHECK_THROWS_AS(simple_average({}), StructuralError);
  CHECK_THROWS_AS(simple_average({a, b}), StructuralError);
  CHECK_THROWS_AS(entropy_weighted_average({a, b}, false), StructuralError);
}
