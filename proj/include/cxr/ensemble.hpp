#pragma once

#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Per-class probabilities from one classifier/VAE pair, rows aligned with
/// the evaluation split.
struct PredictionMatrix {
  RowMatrix values;       // N x K, entries in [0,1]
  std::string source_tag; // e.g. "vae-s3-d16-rf"
};

enum class EnsembleMethod : std::uint8_t {
  SimpleAvg,
  EntropyAvg,            // literal form: (1/N) sum (1-H(y)) * y
  EntropyAvgNormalized,  // sum (1-H) y / sum (1-H), simple-average fallback
};

struct EnsembleOutput {
  RowMatrix values;
  EnsembleMethod method;
  std::vector<std::string> member_tags;
};

/// Elementwise mean over members. Requires >= 1 member, identical shapes.
EnsembleOutput simple_average(const std::vector<PredictionMatrix>& members);

/// Confidence-weighted average with weight 1 - H(y) per cell. The default
/// keeps the literal 1/N normalization (output attenuated toward 0, fine for
/// rank metrics); normalized=true divides by the weight sum instead, falling
/// back to the simple average of a cell when all its weights vanish.
EnsembleOutput entropy_weighted_average(
    const std::vector<PredictionMatrix>& members, bool normalized = false);

}  // namespace cxr
