#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/rng.hpp"
#include "cxr/types.hpp"

namespace cxr {

inline constexpr int kNumFindings = 14;
inline constexpr int kNumEvalClasses = 5;

enum class FindingState : std::uint8_t {
  Positive,
  Negative,
  Uncertain,
  Unmentioned,
};

/// Finding names, in the frozen column order used by every file and matrix.
const std::array<std::string, kNumFindings>& finding_names();

/// Indices of the evaluated classes within the 14 findings:
/// Cardiomegaly, Edema, Consolidation, Atelectasis, Pleural Effusion.
const std::array<int, kNumEvalClasses>& eval_class_indices();
const std::array<std::string, kNumEvalClasses>& eval_class_names();

struct LabelRecord {
  std::string image_path;
  std::array<FindingState, kNumFindings> findings;
};

enum class UncertaintyPolicyKind : std::uint8_t { UOnes, UZeros, Lsr };

struct UncertaintyPolicy {
  UncertaintyPolicyKind kind = UncertaintyPolicyKind::UOnes;
  Scalar lsr_alpha = 0.55;  // only used by Lsr; requires 0.5 < alpha < beta <= 1
  Scalar lsr_beta = 0.85;
  // Blank label cells resolve to this value (0.0 = treat as negative).
  Scalar unmentioned_value = 0.0;

  static UncertaintyPolicy u_ones() { return {UncertaintyPolicyKind::UOnes}; }
  static UncertaintyPolicy u_zeros() { return {UncertaintyPolicyKind::UZeros}; }
  static UncertaintyPolicy lsr(Scalar alpha, Scalar beta);
};

struct ResolvedTargets {
  std::array<Scalar, kNumFindings> values;
  UncertaintyPolicyKind policy;
};

/// Parse one CSV row (path + 14 finding cells). Cells: "1.0"/"1" positive,
/// "0.0"/"0" negative, "-1.0"/"-1" uncertain, "" unmentioned.
LabelRecord parse_label_row(const std::string& row);

std::string format_label_row(const LabelRecord& record);

/// Full label CSV: header + one row per record.
std::vector<LabelRecord> read_label_csv(const std::string& path);
void write_label_csv(const std::string& path,
                     const std::vector<LabelRecord>& records);
std::string label_csv_header();

ResolvedTargets apply_uncertainty_policy(const LabelRecord& record,
                                         const UncertaintyPolicy& policy,
                                         RngStream& rng);

/// Hard labels for the tree/KNN classifiers. Requires 0 < threshold < 1.
std::array<bool, kNumFindings> binarize_targets(const ResolvedTargets& targets,
                                                Scalar threshold = 0.5);

}  // namespace cxr
