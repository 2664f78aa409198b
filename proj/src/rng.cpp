#include "sdelab/rng.hpp"

#include <cmath>

namespace sdelab {

namespace {
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

RngStream::RngStream(RngStreamSpec spec) : spec_(spec) {
  uint64_t seed = spec.master_seed;
  // fold the path index in before expanding the state
  seed ^= splitmix64(seed) + 0x9E3779B97F4A7C15ull * (spec.path_index + 1);
  uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

uint64_t RngStream::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

Vec RngStream::normal_vec(int d) {
  Vec out(d);
  for (int i = 0; i < d; ++i) out(i) = normal();
  return out;
}

}  // namespace sdelab
