#include "cxr/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace cxr {

namespace {

// Score placed below any valid correlation; marks constant search windows.
constexpr Scalar kDegenerateScore = -2.0;

Scalar sample_coord(Index out_i, Index out_n, Index in_n) {
  if (out_n == 1) return static_cast<Scalar>(in_n - 1) / 2.0;
  return static_cast<Scalar>(out_i) * static_cast<Scalar>(in_n - 1) /
         static_cast<Scalar>(out_n - 1);
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, Index out_width,
                          Index out_height) {
  if (img.width() < 1 || img.height() < 1 || out_width < 1 || out_height < 1)
    throw DomainError("resize_bilinear: all dimensions must be >= 1");
  GrayImage out(out_height, out_width);
  for (Index r = 0; r < out_height; ++r) {
    const Scalar sr = sample_coord(r, out_height, img.height());
    const Index r0 = static_cast<Index>(std::floor(sr));
    const Index r1 = std::min(r0 + 1, img.height() - 1);
    const Scalar fr = sr - static_cast<Scalar>(r0);
    for (Index c = 0; c < out_width; ++c) {
      const Scalar sc = sample_coord(c, out_width, img.width());
      const Index c0 = static_cast<Index>(std::floor(sc));
      const Index c1 = std::min(c0 + 1, img.width() - 1);
      const Scalar fc = sc - static_cast<Scalar>(c0);
      const Scalar top = img.pixels(r0, c0) * (1.0 - fc) + img.pixels(r0, c1) * fc;
      const Scalar bot = img.pixels(r1, c0) * (1.0 - fc) + img.pixels(r1, c1) * fc;
      out.pixels(r, c) = top * (1.0 - fr) + bot * fr;
    }
  }
  return out;
}

Matrix ncc_map(const GrayImage& img, const GrayImage& tpl) {
  const Index th = tpl.height(), tw = tpl.width();
  if (th > img.height() || tw > img.width())
    throw DomainError("ncc_map: template must fit inside the image");
  const Scalar tpl_mean = tpl.pixels.mean();
  const Matrix tpl_zm = tpl.pixels.array() - tpl_mean;
  const Scalar tpl_norm2 = tpl_zm.squaredNorm();
  if (tpl_norm2 <= 0.0)
    throw DomainError("ncc_map: template must be non-constant");

  const Index n_rows = img.height() - th + 1;
  const Index n_cols = img.width() - tw + 1;
  Matrix scores(n_rows, n_cols);
  for (Index r = 0; r < n_rows; ++r) {
    for (Index c = 0; c < n_cols; ++c) {
      const auto window = img.pixels.block(r, c, th, tw);
      const Scalar window_mean = window.mean();
      const Matrix window_zm = window.array() - window_mean;
      const Scalar window_norm2 = window_zm.squaredNorm();
      if (window_norm2 <= 0.0) {
        scores(r, c) = kDegenerateScore;
        continue;
      }
      scores(r, c) = window_zm.cwiseProduct(tpl_zm).sum() /
                     std::sqrt(window_norm2 * tpl_norm2);
    }
  }
  return scores;
}

TemplateMatchResult template_match_crop(const GrayImage& img,
                                        const GrayImage& tpl,
                                        Index crop_size) {
  if (crop_size < 1 || crop_size > img.height() || crop_size > img.width())
    throw DomainError("template_match_crop: crop size exceeds image");
  const Matrix scores = ncc_map(img, tpl);

  TemplateMatchResult result;
  Scalar best = kDegenerateScore;
  // Row-major scan with strict improvement breaks ties to smallest (row, col).
  for (Index r = 0; r < scores.rows(); ++r) {
    for (Index c = 0; c < scores.cols(); ++c) {
      if (scores(r, c) > best) {
        best = scores(r, c);
        result.match_row = r;
        result.match_col = c;
      }
    }
  }

  Scalar center_row, center_col;
  if (best <= kDegenerateScore) {
    result.degenerate_fallback = true;
    result.match_row = 0;
    result.match_col = 0;
    result.score = 0.0;
    center_row = static_cast<Scalar>(img.height()) / 2.0;
    center_col = static_cast<Scalar>(img.width()) / 2.0;
  } else {
    result.score = best;
    center_row = static_cast<Scalar>(result.match_row) +
                 static_cast<Scalar>(tpl.height()) / 2.0;
    center_col = static_cast<Scalar>(result.match_col) +
                 static_cast<Scalar>(tpl.width()) / 2.0;
  }

  auto clamp_origin = [crop_size](Scalar center, Index extent) {
    Index origin = static_cast<Index>(
        std::lround(center - static_cast<Scalar>(crop_size) / 2.0));
    return std::clamp<Index>(origin, 0, extent - crop_size);
  };
  const Index r0 = clamp_origin(center_row, img.height());
  const Index c0 = clamp_origin(center_col, img.width());
  result.crop = GrayImage(img.pixels.block(r0, c0, crop_size, crop_size));
  return result;
}

MultiChannelImage replicate_channels(const GrayImage& img, int channels) {
  if (channels < 1)
    throw DomainError("replicate_channels: channels must be >= 1");
  return MultiChannelImage(static_cast<std::size_t>(channels), img);
}

SyntheticSpec::SyntheticSpec()
    : class_marginals{0.0889, 0.1622, 0.1224, 0.7201, 0.0369, 0.2600, 0.0883,
                      0.0245, 0.1556, 0.0926, 0.4026, 0.0131, 0.0389, 0.5610} {}

ClassPattern class_pattern(int class_index, Index image_size) {
  // One blob per cell of a 4x4 grid; amplitude varies deterministically by
  // class so patterns are distinguishable in pixel statistics.
  const int grid_row = class_index / 4;
  const int grid_col = class_index % 4;
  const Scalar cell = static_cast<Scalar>(image_size) / 4.0;
  ClassPattern p;
  p.center_row = (static_cast<Scalar>(grid_row) + 0.5) * cell;
  p.center_col = (static_cast<Scalar>(grid_col) + 0.5) * cell;
  p.sigma = static_cast<Scalar>(image_size) / 12.0;
  p.amplitude = 0.40 + 0.30 * static_cast<Scalar>((class_index * 5) % 14) / 13.0;
  return p;
}

namespace {

// Truth is sampled first; the Uncertain remap degrades the label only, the
// rendered image still shows the sampled findings.
LabelRecord sample_record(const SyntheticSpec& spec, Index image_index,
                          RngStream& rng,
                          std::array<bool, kNumFindings>* truth_out = nullptr) {
  LabelRecord record;
  record.image_path = "synthetic_" + std::to_string(image_index) + ".png";
  std::array<bool, kNumFindings> truth;
  for (int k = 0; k < kNumFindings; ++k) {
    truth[k] = rng.uniform(0.0, 1.0) < spec.class_marginals[k];
    record.findings[k] =
        truth[k] ? FindingState::Positive : FindingState::Negative;
  }
  if (spec.uncertain_fraction > 0.0) {
    for (int k = 0; k < kNumFindings; ++k) {
      if (rng.uniform(0.0, 1.0) < spec.uncertain_fraction)
        record.findings[k] = FindingState::Uncertain;
    }
  }
  if (truth_out) *truth_out = truth;
  return record;
}

GrayImage render_record(const SyntheticSpec& spec,
                        const std::array<bool, kNumFindings>& truth,
                        RngStream& rng) {
  const Index s = spec.image_size;
  GrayImage img(s, s);
  img.pixels.setConstant(spec.background);
  for (int k = 0; k < kNumFindings; ++k) {
    if (!truth[k]) continue;
    const ClassPattern p = class_pattern(k, s);
    const Scalar inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
    for (Index r = 0; r < s; ++r) {
      for (Index c = 0; c < s; ++c) {
        const Scalar dr = static_cast<Scalar>(r) - p.center_row;
        const Scalar dc = static_cast<Scalar>(c) - p.center_col;
        img.pixels(r, c) += p.amplitude * std::exp(-(dr * dr + dc * dc) * inv2s2);
      }
    }
  }
  if (spec.noise_level > 0.0) {
    for (Index r = 0; r < s; ++r) {
      for (Index c = 0; c < s; ++c) {
        img.pixels(r, c) += spec.noise_level * rng.standard_normal();
      }
    }
  }
  img.pixels = img.pixels.cwiseMax(0.0).cwiseMin(1.0);
  return img;
}

}  // namespace

std::vector<LabelRecord> sample_synthetic_labels(const SyntheticSpec& spec,
                                                 Index n,
                                                 const RngStream& rng) {
  if (n < 1) throw DomainError("sample_synthetic_labels: n must be >= 1");
  std::vector<LabelRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    RngStream item_rng = rng.split(static_cast<std::uint64_t>(i));
    records.push_back(sample_record(spec, i, item_rng));
  }
  return records;
}

std::pair<std::vector<GrayImage>, std::vector<LabelRecord>>
generate_synthetic_dataset(const SyntheticSpec& spec, Index n,
                           const RngStream& rng) {
  if (n < 1) throw DomainError("generate_synthetic_dataset: n must be >= 1");
  std::vector<GrayImage> images;
  std::vector<LabelRecord> records;
  images.reserve(static_cast<std::size_t>(n));
  records.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    RngStream item_rng = rng.split(static_cast<std::uint64_t>(i));
    std::array<bool, kNumFindings> truth;
    LabelRecord record = sample_record(spec, i, item_rng, &truth);
    images.push_back(render_record(spec, truth, item_rng));
    records.push_back(std::move(record));
  }
  return {std::move(images), std::move(records)};
}

}  // namespace cxr
