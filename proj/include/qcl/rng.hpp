#pragma once

#include <cmath>
#include <cstdint>

namespace qcl {

// Counter-based 64-bit generator (SplitMix64).  The state is a plain counter
// advanced by a fixed odd constant and every output is a bijective hash of the
// counter, so draw k is a pure function of (seed, k).  No platform-dependent
// state, identical sequences on every compiler and OS.
//
// Stream splitting: substream(seed, k) remixes (seed, k) through the output
// hash twice, giving unrelated sequences for adjacent k.  Batches key one
// substream per run index, so results do not depend on scheduling order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // the derived 64-bit seed substream(seed, stream) starts from, for bookkeeping
  static std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed + golden_ * (stream + 1)));
  }

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(substream_seed(seed, stream));
  }

  std::uint64_t next_u64() {
    state_ += golden_;
    return mix(state_);
  }

  // uniform on [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal (Box-Muller, fresh pair each call)
  double normal() {
    double u = 0.0;
    do { u = uniform(); } while (u == 0.0);
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
  }

 private:
  static constexpr std::uint64_t golden_ = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace qcl
