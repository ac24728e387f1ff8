#pragma once

// Deterministic, addressable random streams.
//
// Every random quantity in the library is drawn from a Stream addressed by
// (master seed, lane, node, iteration). Streams are derived with a
// splitmix64-based hash, so any (node, iteration) cell can be opened
// independently of execution order — serial and multi-threaded runs consume
// identical randomness and therefore produce bit-identical trajectories.
//
// Normal deviates use an explicit Box-Muller transform instead of
// std::normal_distribution (whose algorithm is implementation-defined and
// thus not reproducible across standard libraries).

#include <cmath>
#include <cstdint>
#include <random>

namespace dmgda::rng {

// Stream lanes: disjoint randomness families hanging off one master seed.
enum class Lane : std::uint64_t {
  step_sample = 2,   // per-(node, iteration) gradient sample; iteration 0 = init
  init_spread = 3,   // optional heterogeneous-init offsets
  generator = 4,     // synthetic problem-instance generation
  certificate = 5,   // sampled certificate checks
};

inline std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive combination of stream coordinates into a 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t lane,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= lane * 0xd1342543de82ef95ULL;
  h ^= splitmix64(s);
  s ^= a * 0xaf251af3b0f025b5ULL + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(s);
  s ^= b * 0xb564ef22ec7aece5ULL + 0x632be59bd9b4e019ULL;
  h ^= splitmix64(s);
  return h;
}

// A self-contained random stream (value type; copying forks the stream).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; caches the paired deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);  // log(0) guard
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream make_stream(std::uint64_t master, Lane lane, std::uint64_t a = 0,
                          std::uint64_t b = 0) {
  return Stream(derive_seed(master, static_cast<std::uint64_t>(lane), a, b));
}

// The per-(node, iteration) sample stream used by the optimizer.
inline Stream node_stream(std::uint64_t master, std::uint64_t node,
                          std::uint64_t iteration) {
  return make_stream(master, Lane::step_sample, node, iteration);
}

}  // namespace dmgda::rng
