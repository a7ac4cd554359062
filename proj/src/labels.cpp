#include "cxr/labels.hpp"

#include <fstream>
#include <sstream>

namespace cxr {

const std::array<std::string, kNumFindings>& finding_names() {
  static const std::array<std::string, kNumFindings> names = {
      "No Finding",       "Enlarged Cardiomediastinum",
      "Cardiomegaly",     "Lung Opacity",
      "Lung Lesion",      "Edema",
      "Consolidation",    "Pneumonia",
      "Atelectasis",      "Pneumothorax",
      "Pleural Effusion", "Pleural Other",
      "Fracture",         "Support Devices"};
  return names;
}

const std::array<int, kNumEvalClasses>& eval_class_indices() {
  static const std::array<int, kNumEvalClasses> idx = {2, 5, 6, 8, 10};
  return idx;
}

const std::array<std::string, kNumEvalClasses>& eval_class_names() {
  static const std::array<std::string, kNumEvalClasses> names = {
      "Cardiomegaly", "Edema", "Consolidation", "Atelectasis",
      "Pleural Effusion"};
  return names;
}

UncertaintyPolicy UncertaintyPolicy::lsr(Scalar alpha, Scalar beta) {
  if (!(alpha > 0.5 && beta > alpha && beta <= 1.0))
    throw ConfigError("LSR policy requires 0.5 < alpha < beta <= 1");
  UncertaintyPolicy p;
  p.kind = UncertaintyPolicyKind::Lsr;
  p.lsr_alpha = alpha;
  p.lsr_beta = beta;
  return p;
}

namespace {

std::vector<std::string> split_csv_cells(const std::string& row) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(row);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!row.empty() && row.back() == ',') cells.emplace_back();
  return cells;
}

FindingState parse_cell(const std::string& cell, int column) {
  if (cell.empty()) return FindingState::Unmentioned;
  if (cell == "1.0" || cell == "1") return FindingState::Positive;
  if (cell == "0.0" || cell == "0") return FindingState::Negative;
  if (cell == "-1.0" || cell == "-1") return FindingState::Uncertain;
  throw DataError("parse_label_row: unrecognized cell \"" + cell +
                  "\" in column \"" + finding_names()[column] + "\"");
}

void check_lsr(const UncertaintyPolicy& policy) {
  if (!(policy.lsr_alpha > 0.5 && policy.lsr_beta > policy.lsr_alpha &&
        policy.lsr_beta <= 1.0)) {
    throw ConfigError("LSR policy requires 0.5 < alpha < beta <= 1");
  }
}

}  // namespace

LabelRecord parse_label_row(const std::string& row) {
  const auto cells = split_csv_cells(row);
  if (cells.size() != 1 + kNumFindings) {
    throw DataError("parse_label_row: expected path + " +
                    std::to_string(kNumFindings) + " finding columns, got " +
                    std::to_string(cells.size()) + " cells");
  }
  LabelRecord record;
  record.image_path = cells[0];
  for (int i = 0; i < kNumFindings; ++i) {
    record.findings[i] = parse_cell(cells[i + 1], i);
  }
  return record;
}

std::string format_label_row(const LabelRecord& record) {
  std::string row = record.image_path;
  for (const FindingState state : record.findings) {
    row += ',';
    switch (state) {
      case FindingState::Positive: row += "1.0"; break;
      case FindingState::Negative: row += "0.0"; break;
      case FindingState::Uncertain: row += "-1.0"; break;
      case FindingState::Unmentioned: break;
    }
  }
  return row;
}

std::string label_csv_header() {
  std::string header = "path";
  for (const auto& name : finding_names()) header += ',' + name;
  return header;
}

std::vector<LabelRecord> read_label_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty label CSV: " + path);
  std::vector<LabelRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_label_row(line));
  }
  return records;
}

void write_label_csv(const std::string& path,
                     const std::vector<LabelRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label CSV: " + path);
  out << label_csv_header() << '\n';
  for (const auto& record : records) out << format_label_row(record) << '\n';
}

ResolvedTargets apply_uncertainty_policy(const LabelRecord& record,
                                         const UncertaintyPolicy& policy,
                                         RngStream& rng) {
  if (policy.kind == UncertaintyPolicyKind::Lsr) check_lsr(policy);
  ResolvedTargets out;
  out.policy = policy.kind;
  for (int i = 0; i < kNumFindings; ++i) {
    switch (record.findings[i]) {
      case FindingState::Positive:
        out.values[i] = 1.0;
        break;
      case FindingState::Negative:
        out.values[i] = 0.0;
        break;
      case FindingState::Unmentioned:
        out.values[i] = policy.unmentioned_value;
        break;
      case FindingState::Uncertain:
        switch (policy.kind) {
          case UncertaintyPolicyKind::UOnes: out.values[i] = 1.0; break;
          case UncertaintyPolicyKind::UZeros: out.values[i] = 0.0; break;
          case UncertaintyPolicyKind::Lsr:
            out.values[i] = rng.uniform(policy.lsr_alpha, policy.lsr_beta);
            break;
        }
        break;
    }
  }
  return out;
}

std::array<bool, kNumFindings> binarize_targets(const ResolvedTargets& targets,
                                                Scalar threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw DomainError("binarize_targets: threshold must lie in (0,1)");
  std::array<bool, kNumFindings> out;
  for (int i = 0; i < kNumFindings; ++i) out[i] = targets.values[i] >= threshold;
  return out;
}

}  // namespace cxr
