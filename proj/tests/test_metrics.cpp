#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

// O(N^2) pair counting, ties half-counted
Scalar auroc_oracle(const ScoredLabels& data) {
  Scalar wins = 0;
  long pairs = 0;
  for (Index i = 0; i < data.scores.size(); ++i) {
    if (!data.labels[static_cast<std::size_t>(i)]) continue;
    for (Index j = 0; j < data.scores.size(); ++j) {
      if (data.labels[static_cast<std::size_t>(j)]) continue;
      ++pairs;
      if (data.scores[i] > data.scores[j]) {
        wins += 1.0;
      } else if (data.scores[i] == data.scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<Scalar>(pairs);
}

ScoredLabels random_instance(RngStream& rng, Index n, bool force_ties) {
  ScoredLabels data;
  data.scores.resize(n);
  data.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    // coarse grid when ties are wanted
    data.scores[i] = force_ties ? std::floor(rng.uniform(0.0, 5.0))
                                : rng.uniform(0.0, 1.0);
    data.labels[static_cast<std::size_t>(i)] = rng.uniform(0.0, 1.0) < 0.4;
  }
  // guarantee both classes
  data.labels[0] = true;
  data.labels[static_cast<std::size_t>(n - 1)] = false;
  return data;
}

}  // namespace

TEST_CASE("perfect and inverted rankings") {
  ScoredLabels data;
  data.scores.resize(4);
  data.scores << 0.9, 0.8, 0.2, 0.1;
  data.labels = {true, true, false, false};
  CHECK(auroc(data) == 1.0);
  data.labels = {false, false, true, true};
  CHECK(auroc(data) == 0.0);
}

TEST_CASE("all-tied scores give 0.5") {
  ScoredLabels data;
  data.scores = Vector::Constant(6, 0.3);
  data.labels = {true, false, true, false, true, false};
  CHECK(auroc(data) == 0.5);
}

TEST_CASE("single-class input raises DomainError with counts") {
  ScoredLabels data;
  data.scores = Vector::Constant(3, 0.3);
  data.labels = {true, true, true};
  CHECK_THROWS_AS(auroc(data), DomainError);
  try {
    auroc(data);
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3") != std::string::npos);
    CHECK(msg.find("0") != std::string::npos);
  }
}

TEST_CASE("sort-based auroc equals pair counting on random instances") {
  RngStream rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    RngStream t = rng.split(static_cast<std::uint64_t>(trial));
    const Index n = 2 + static_cast<Index>(t.next_u64() % 99);
    const ScoredLabels data = random_instance(t, n, trial % 2 == 0);
    CHECK(auroc(data) == doctest::Approx(auroc_oracle(data)).epsilon(1e-12));
  }
}

TEST_CASE("auroc is invariant under strictly monotone score transforms") {
  RngStream rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    RngStream t = rng.split(static_cast<std::uint64_t>(trial));
    ScoredLabels data = random_instance(t, 40, true);
    const Scalar base = auroc(data);
    ScoredLabels warped = data;
    for (Index i = 0; i < warped.scores.size(); ++i)
      warped.scores[i] = std::exp(3.0 * warped.scores[i]) - 2.0;
    CHECK(auroc(warped) == base);
  }
}

TEST_CASE("bands follow the 0.7 / 0.8 / 0.9 cutoffs") {
  CHECK(auroc_band(0.65) == AurocBand::Below);
  CHECK(auroc_band(0.7) == AurocBand::Below);
  CHECK(auroc_band(0.75) == AurocBand::Acceptable);
  CHECK(auroc_band(0.8) == AurocBand::Acceptable);
  CHECK(auroc_band(0.85) == AurocBand::VeryGood);
  CHECK(auroc_band(0.9) == AurocBand::VeryGood);
  CHECK(auroc_band(0.95) == AurocBand::Outstanding);
  CHECK(band_name(AurocBand::Outstanding) == "outstanding");
}

TEST_CASE("report mean matches the row used in the published table") {
  // 5 per-class scores whose rounded mean is printed as 0.816
  const std::vector<Scalar> row = {0.805, 0.796, 0.862, 0.746, 0.872};
  Scalar mean = 0;
  for (Scalar v : row) mean += v;
  mean /= static_cast<Scalar>(row.size());
  CHECK(std::abs(mean - 0.816) < 0.0005);
}

TEST_CASE("auroc_report skips single-valued classes and averages the rest") {
  RowMatrix pred(4, 2);
  pred << 0.9, 0.1, 0.8, 0.2, 0.2, 0.3, 0.1, 0.4;
  BoolMatrix targets(4, 2);
  targets << true, true, true, true, false, true, false, true;
  const AurocReport report =
      auroc_report(pred, targets, {"alpha", "beta"});
  CHECK_FALSE(report.excluded[0]);
  CHECK(report.excluded[1]);
  CHECK(std::isnan(report.per_class[1]));
  CHECK(report.per_class[0] == 1.0);
  CHECK(report.mean == 1.0);
}

TEST_CASE("csv row formatting") {
  RowMatrix pred(4, 1);
  pred << 0.9, 0.8, 0.2, 0.1;
  BoolMatrix targets(4, 1);
  targets << true, true, false, false;
  const AurocReport report = auroc_report(pred, targets, {"alpha"});
  CHECK(report_csv_header({"alpha"}) == "model,alpha,Mean");
  const std::string row = report_csv_row("m1", report);
  CHECK(row.substr(0, 3) == "m1,");
  CHECK(row.find("1") != std::string::npos);
}
