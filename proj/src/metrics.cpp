#include "cxr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cxr {

Scalar auroc(const ScoredLabels& data) {
  const Index n = data.scores.size();
  if (static_cast<Index>(data.labels.size()) != n)
    throw StructuralError("auroc: scores/labels length mismatch");
  if (n < 1) throw StructuralError("auroc: empty input");

  long n_pos = 0;
  for (bool l : data.labels) n_pos += l ? 1 : 0;
  const long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DomainError("auroc: needs both classes, got " +
                      std::to_string(n_pos) + " positives and " +
                      std::to_string(n_neg) + " negatives");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return data.scores[a] < data.scores[b];
  });

  // Rank sum of positives with average ranks over tied score runs.
  Scalar pos_rank_sum = 0.0;
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j < n && data.scores[order[j]] == data.scores[order[i]]) ++j;
    const Scalar avg_rank = static_cast<Scalar>(i + j + 1) / 2.0;  // 1-based
    for (Index k = i; k < j; ++k) {
      if (data.labels[static_cast<std::size_t>(order[k])])
        pos_rank_sum += avg_rank;
    }
    i = j;
  }
  const Scalar u = pos_rank_sum -
                   static_cast<Scalar>(n_pos) * (static_cast<Scalar>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<Scalar>(n_pos) * static_cast<Scalar>(n_neg));
}

AurocBand auroc_band(Scalar value) {
  if (value > 0.9) return AurocBand::Outstanding;
  if (value > 0.8) return AurocBand::VeryGood;
  if (value > 0.7) return AurocBand::Acceptable;
  return AurocBand::Below;
}

std::string band_name(AurocBand band) {
  switch (band) {
    case AurocBand::Below: return "below";
    case AurocBand::Acceptable: return "acceptable";
    case AurocBand::VeryGood: return "very-good";
    case AurocBand::Outstanding: return "outstanding";
  }
  return "below";
}

AurocReport auroc_report(const RowMatrix& predictions,
                         const BoolMatrix& targets,
                         const std::vector<std::string>& class_names) {
  const Index n = predictions.rows();
  const Index k = predictions.cols();
  if (targets.rows() != n || targets.cols() != k ||
      static_cast<Index>(class_names.size()) != k) {
    throw StructuralError("auroc_report: shape mismatch");
  }
  AurocReport report;
  report.class_names = class_names;
  Scalar sum = 0.0;
  Index included = 0;
  for (Index c = 0; c < k; ++c) {
    ScoredLabels column;
    column.scores = predictions.col(c);
    column.labels.resize(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r)
      column.labels[static_cast<std::size_t>(r)] = targets(r, c);
    try {
      const Scalar value = auroc(column);
      report.per_class.push_back(value);
      report.excluded.push_back(false);
      report.bands.push_back(auroc_band(value));
      sum += value;
      ++included;
    } catch (const DomainError&) {
      report.per_class.push_back(std::nan(""));
      report.excluded.push_back(true);
      report.bands.push_back(AurocBand::Below);
    }
  }
  report.mean = included > 0 ? sum / static_cast<Scalar>(included) : std::nan("");
  return report;
}

std::string report_csv_header(const std::vector<std::string>& class_names) {
  std::string header = "model";
  for (const auto& name : class_names) header += ',' + name;
  header += ",Mean";
  return header;
}

std::string report_csv_row(const std::string& tag, const AurocReport& report) {
  std::ostringstream row;
  row << tag;
  row.precision(6);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    row << ',';
    if (!report.excluded[c]) row << report.per_class[c];
  }
  row << ',' << report.mean;
  return row.str();
}

}  // namespace cxr
