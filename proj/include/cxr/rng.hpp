#pragma once

#include <cstdint>
#include <string_view>

#include "cxr/errors.hpp"
#include "cxr/types.hpp"

namespace cxr {

/// Splittable, counter-seeded random stream (xoshiro256** core).
///
/// A stream is fully determined by (seed, stream_id); the same pair yields
/// the same sequence on every platform. Streams must not be shared between
/// concurrent tasks; split() a child per task instead.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Child stream derived from (seed, stream_id, child_id). Independent of
  /// how many draws the parent has made.
  RngStream split(std::uint64_t child_id) const;
  /// Named split; the name is hashed (FNV-1a) into a child id.
  RngStream split(std::string_view name) const;

  std::uint64_t next_u64();

  /// Uniform draw in [a, b). Requires a < b.
  Scalar uniform(Scalar a, Scalar b);

  /// One N(0,1) draw (Box-Muller; second value cached).
  Scalar standard_normal();

  /// n i.i.d. N(0,1) draws. Requires n >= 1.
  Vector standard_normal_vector(Index n);

  /// Deterministic Fisher-Yates shuffle of [0, n) indices.
  std::vector<Index> shuffled_indices(Index n);

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t state_[4] = {0, 0, 0, 0};
  bool has_cached_normal_ = false;
  Scalar cached_normal_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view text);

}  // namespace cxr
