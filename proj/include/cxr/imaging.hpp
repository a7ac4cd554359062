#pragma once

#include <array>
#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/labels.hpp"
#include "cxr/rng.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Single-channel image, intensities in [0,1], pixels(row, col).
struct GrayImage {
  Matrix pixels;

  GrayImage() = default;
  GrayImage(Index height, Index width) : pixels(Matrix::Zero(height, width)) {}
  explicit GrayImage(Matrix p) : pixels(std::move(p)) {}

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
};

using MultiChannelImage = std::vector<GrayImage>;

/// Bilinear resize with corner-aligned sampling (an output axis of length 1
/// samples the input axis center). Requires all dimensions >= 1.
GrayImage resize_bilinear(const GrayImage& img, Index out_width,
                          Index out_height);

/// Zero-mean normalized cross-correlation of tpl over every placement in img.
/// Entry (r,c) scores the placement with top-left (r,c); placements whose
/// search window is constant are scored below any valid correlation.
Matrix ncc_map(const GrayImage& img, const GrayImage& tpl);

struct TemplateMatchResult {
  GrayImage crop;
  Index match_row = 0;  // top-left of the best template placement
  Index match_col = 0;
  Scalar score = 0.0;
  bool degenerate_fallback = false;  // constant image: center crop used
};

/// Crop a crop_size x crop_size window centered on the best NCC placement,
/// clamped to image bounds. Ties break to the smallest (row, col).
TemplateMatchResult template_match_crop(const GrayImage& img,
                                        const GrayImage& tpl, Index crop_size);

/// channels copies of the input plane. Requires channels >= 1.
MultiChannelImage replicate_channels(const GrayImage& img, int channels);

struct SyntheticSpec {
  std::array<Scalar, kNumFindings> class_marginals;  // defaults: see below
  Index image_size = 32;
  Scalar noise_level = 0.05;        // Gaussian pixel noise sigma
  Scalar uncertain_fraction = 0.0;  // chance a finding is remapped to Uncertain
  Scalar background = 0.1;

  SyntheticSpec();
};

/// Deterministic localized pattern for one class, as (center, sigma, amplitude)
/// of a Gaussian blob inside an image_size x image_size frame.
struct ClassPattern {
  Scalar center_row;
  Scalar center_col;
  Scalar sigma;
  Scalar amplitude;
};

ClassPattern class_pattern(int class_index, Index image_size);

/// Label vectors only (same draws the image generator uses); handy for
/// checking marginal calibration without rendering pixels.
std::vector<LabelRecord> sample_synthetic_labels(const SyntheticSpec& spec,
                                                 Index n, const RngStream& rng);

std::pair<std::vector<GrayImage>, std::vector<LabelRecord>>
generate_synthetic_dataset(const SyntheticSpec& spec, Index n,
                           const RngStream& rng);

}  // namespace cxr
