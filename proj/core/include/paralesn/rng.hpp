#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "paralesn/tensor.hpp"

namespace paralesn {

/// Seed plus the identity of the generator that expands it. Two equal specs
/// produce bit-identical draw sequences on any machine and thread count.
struct RngSpec {
  static constexpr std::string_view kAlgorithm = "philox4x32-10";

  std::uint64_t seed = 0;

  bool operator==(const RngSpec&) const = default;
};

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// The key is the seed; the high half of the counter carries a stream id so
/// independent streams can be split off without coordination.
class RngStream {
 public:
  explicit RngStream(RngSpec spec, std::uint64_t stream_id = 0);

  /// Stream for a sub-task (sweep point, repeat, trial). Deterministic in
  /// (spec, stream_id) only.
  static RngStream split(RngSpec spec, std::uint64_t stream_id) { return RngStream(spec, stream_id); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double next_unit();
  /// Uniform on [lo, hi].
  double uniform(double lo, double hi);

  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return draws_; }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_id_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;  // 64-bit words still available in buffer_
  std::uint64_t draws_ = 0;
};

/// rows x cols complex matrix with real and imaginary parts i.i.d. on [-1, 1].
/// Consumes 2*rows*cols draws in row-major order, real part first.
ComplexMatrix sample_uniform_complex(std::size_t rows, std::size_t cols, RngStream& rng);

}  // namespace paralesn
