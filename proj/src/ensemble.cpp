#include "cxr/ensemble.hpp"

#include "cxr/numerics.hpp"

namespace cxr {

namespace {

void check_members(const std::vector<PredictionMatrix>& members) {
  if (members.empty())
    throw StructuralError("ensemble: needs at least one member");
  const Index n = members.front().values.rows();
  const Index k = members.front().values.cols();
  for (const auto& m : members) {
    if (m.values.rows() != n || m.values.cols() != k)
      throw StructuralError("ensemble: member shape mismatch (" +
                            m.source_tag + ")");
  }
}

std::vector<std::string> tags_of(const std::vector<PredictionMatrix>& members) {
  std::vector<std::string> tags;
  tags.reserve(members.size());
  for (const auto& m : members) tags.push_back(m.source_tag);
  return tags;
}

}  // namespace

EnsembleOutput simple_average(const std::vector<PredictionMatrix>& members) {
  check_members(members);
  EnsembleOutput out;
  out.method = EnsembleMethod::SimpleAvg;
  out.member_tags = tags_of(members);
  // incremental mean: identical members pass through bitwise unchanged
  out.values = members.front().values;
  for (std::size_t i = 1; i < members.size(); ++i)
    out.values += (members[i].values - out.values) / static_cast<Scalar>(i + 1);
  return out;
}

EnsembleOutput entropy_weighted_average(
    const std::vector<PredictionMatrix>& members, bool normalized) {
  check_members(members);
  EnsembleOutput out;
  out.method = normalized ? EnsembleMethod::EntropyAvgNormalized
                          : EnsembleMethod::EntropyAvg;
  out.member_tags = tags_of(members);
  const Index n = members.front().values.rows();
  const Index k = members.front().values.cols();
  RowMatrix weighted = RowMatrix::Zero(n, k);   // running mean of w*y
  RowMatrix weight_sum = RowMatrix::Zero(n, k);
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < k; ++c) {
        const Scalar y = members[i].values(r, c);
        const Scalar w = 1.0 - binary_entropy(y);
        // same incremental form as simple_average: all-binary members (w = 1)
        // reproduce it bitwise
        weighted(r, c) += (w * y - weighted(r, c)) / static_cast<Scalar>(i + 1);
        weight_sum(r, c) += w;
      }
    }
  }
  if (!normalized) {
    out.values = std::move(weighted);
    return out;
  }
  out.values = RowMatrix::Zero(n, k);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < k; ++c) {
      if (weight_sum(r, c) > 0.0) {
        out.values(r, c) = weighted(r, c) * static_cast<Scalar>(members.size()) /
                           weight_sum(r, c);
      } else {
        // all members maximally uncertain here: plain mean of the cell
        Scalar mean = 0.0;
        for (const auto& m : members) mean += m.values(r, c);
        out.values(r, c) = mean / static_cast<Scalar>(members.size());
      }
    }
  }
  return out;
}

}  // namespace cxr
