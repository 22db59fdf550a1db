#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace qdgf {

/// Reproducible random stream. The engine is mt19937_64 seeded through
/// std::seed_seq from the 32-bit halves of (seed, stream); both are fully
/// specified by the standard, so a given (seed, stream, draw index) yields
/// the same uniforms everywhere.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal, Marsaglia polar method (the second variate is cached).
  double normal();
  /// Real and imaginary parts independent N(0, 1/2): E|z|^2 = 1, E z^2 = 0.
  std::complex<double> complex_normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qdgf
