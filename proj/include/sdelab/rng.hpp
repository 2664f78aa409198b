#pragma once

#include "sdelab/geometry.hpp"

#include <array>
#include <cstdint>

namespace sdelab {

// Counter-derived stream identity: the generator state is a hash of
// (master seed, path index), so distinct indices give independent streams
// and the same pair is bit-reproducible.
struct RngStreamSpec {
  uint64_t master_seed = 0;
  uint64_t path_index = 0;
};

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64; normals by the Marsaglia polar
// method with an explicit spare so draws do not depend on any library
// distribution implementation.
class RngStream {
 public:
  explicit RngStream(RngStreamSpec spec);

  uint64_t next_u64();
  double uniform();  // in [0, 1)
  double normal();
  Vec normal_vec(int d);

  const RngStreamSpec& spec() const { return spec_; }

 private:
  RngStreamSpec spec_;
  std::array<uint64_t, 4> s_{};
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace sdelab
