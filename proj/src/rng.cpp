#include "safempc/rng.hpp"

namespace safempc {

namespace {

// splitmix64 finalizer; good avalanche, cheap.
uint64_t mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t stream_key(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t k = mix(seed);
  k = mix(k ^ a);
  k = mix(k ^ b);
  k = mix(k ^ c);
  return k;
}

double RngStream::truncated_normal(double stddev, double bound) {
  if (stddev == 0.0) return 0.0;
  double w = stddev * normal();
  if (bound > 0.0) {
    while (std::abs(w) > bound) w = stddev * normal();
  }
  return w;
}

}  // namespace safempc
