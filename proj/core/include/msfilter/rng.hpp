#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace msf {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based splittable stream. The k-th output is mix64(key + k*gamma),
// so a stream is fully determined by its key: draws in one stream never
// depend on how much any other stream has been consumed. Children are named
// by 64-bit ids; the same (root seed, id path) always denotes the same
// stream, which is what makes per-particle / per-replication seeding stable
// under any execution order or worker count.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream root(std::uint64_t seed) {
    return RngStream(mix64(seed ^ 0x8BADF00D5EEDULL));
  }

  RngStream child(std::uint64_t id) const {
    // Feistel-ish: decorrelate the id before folding it into the key.
    return RngStream(mix64(key_ ^ (0x9E3779B97F4A7C15ULL + mix64(id ^ 0xA5A5A5A5A5A5A5A5ULL))));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return mix64(key_ + counter_);
  }

  // Uniform on (0,1]; never 0, so log() is safe.
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; second member of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(th);
    has_cached_ = true;
    return r * std::cos(th);
  }

  void fill_normal(Eigen::Ref<Eigen::VectorXd> out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Fixed ids for named top-level streams.
namespace stream_id {
inline constexpr std::uint64_t signal_w = 1;
inline constexpr std::uint64_t fast_v = 2;
inline constexpr std::uint64_t obs_u = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t particle = 5;
inline constexpr std::uint64_t resample = 6;
inline constexpr std::uint64_t stationary = 7;
inline constexpr std::uint64_t semigroup = 8;
inline constexpr std::uint64_t poisson = 9;
inline constexpr std::uint64_t dictionary = 10;
inline constexpr std::uint64_t experiment = 11;
inline constexpr std::uint64_t averaging = 12;
}  // namespace stream_id

}  // namespace msf
