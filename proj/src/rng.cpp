#include "cxr/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace cxr {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t x = seed ^ (stream_id * 0x9e3779b97f4a7c15ull + 1);
  for (auto& s : state_) s = splitmix64(x);
}

RngStream RngStream::split(std::uint64_t child_id) const {
  std::uint64_t x = stream_id_;
  std::uint64_t mixed = splitmix64(x) ^ (child_id * 0xd1342543de82ef95ull + 1);
  return RngStream(seed_, mixed);
}

RngStream RngStream::split(std::string_view name) const {
  return split(fnv1a64(name));
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256**
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

Scalar RngStream::uniform(Scalar a, Scalar b) {
  if (!(a < b)) throw DomainError("uniform: requires a < b");
  const Scalar u = static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  Scalar v = a + u * (b - a);
  if (v >= b) v = std::nextafter(b, a);
  return v;
}

Scalar RngStream::standard_normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; u1 kept away from 0 so log(u1) is finite.
  Scalar u1;
  do {
    u1 = static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  const Scalar u2 = static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  const Scalar r = std::sqrt(-2.0 * std::log(u1));
  const Scalar theta = 2.0 * std::numbers::pi_v<Scalar> * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

Vector RngStream::standard_normal_vector(Index n) {
  if (n < 1) throw DomainError("standard_normal_vector: n must be >= 1");
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = standard_normal();
  return out;
}

std::vector<Index> RngStream::shuffled_indices(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(next_u64() %
                                      static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

}  // namespace cxr
