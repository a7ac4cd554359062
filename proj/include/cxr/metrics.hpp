#pragma once

#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/labels.hpp"
#include "cxr/types.hpp"

namespace cxr {

struct ScoredLabels {
  Vector scores;
  std::vector<bool> labels;
};

/// One-vs-all AUROC, Mann-Whitney form: the fraction of (positive, negative)
/// pairs where the positive outranks the negative, ties counted 0.5.
/// Computed by a sort with average-rank tie handling. Needs both classes
/// present, else DomainError carrying the class counts.
Scalar auroc(const ScoredLabels& data);

enum class AurocBand : std::uint8_t { Below, Acceptable, VeryGood, Outstanding };

/// Qualitative banding: >0.7 acceptable, >0.8 very good, >0.9 outstanding.
AurocBand auroc_band(Scalar value);
std::string band_name(AurocBand band);

struct AurocReport {
  std::vector<std::string> class_names;
  std::vector<Scalar> per_class;    // NaN where the class was single-valued
  std::vector<bool> excluded;       // true: class skipped (single-valued)
  std::vector<AurocBand> bands;
  Scalar mean = 0.0;                // unweighted mean over included classes
};

/// Per-class one-vs-all AUROC over the evaluation classes plus their
/// unweighted mean. predictions is N x K with K = classes.size(); targets is
/// aligned row-wise.
AurocReport auroc_report(const RowMatrix& predictions,
                         const BoolMatrix& targets,
                         const std::vector<std::string>& class_names);

/// CSV row mirroring the report tables: tag, per-class columns, mean.
std::string report_csv_header(const std::vector<std::string>& class_names);
std::string report_csv_row(const std::string& tag, const AurocReport& report);

}  // namespace cxr
