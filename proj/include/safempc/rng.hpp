#pragma once

#include <cstdint>
#include <random>

namespace safempc {

/// Mixes a seed with up to three stream indices into a generator seed.
/// Samplers key their streams as (run_seed, mpc_step, sample_index) so
/// every sample draws from its own stream and results do not depend on
/// how work is scheduled across threads.
uint64_t stream_key(uint64_t seed, uint64_t a = 0, uint64_t b = 0,
                    uint64_t c = 0);

/// A seeded random stream with a fixed draw order. One instance per
/// logical stream; never shared across threads.
class RngStream {
public:
  explicit RngStream(uint64_t key) : gen_(key) {}

  RngStream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0)
      : gen_(stream_key(seed, a, b, c)) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Gaussian with the given standard deviation, optionally rejection
  /// sampled until |draw| <= bound (bound <= 0 means unbounded).
  double truncated_normal(double stddev, double bound);

  uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace safempc
