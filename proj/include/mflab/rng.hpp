#pragma once

#include <array>
#include <cstdint>

namespace mflab {

// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key);

// Stream keyed by (seed, stream id); draw i of a stream depends only on
// (seed, stream, i), so any partition of streams over workers gives the same
// numbers.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream);

  uint32_t next_u32();
  uint64_t next_u64();
  // Uniform on (0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<uint32_t, 2> key_;
  uint64_t stream_;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace mflab
