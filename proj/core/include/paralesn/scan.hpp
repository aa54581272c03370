#pragma once

#include <cstddef>
#include <span>

#include "paralesn/tensor.hpp"

namespace paralesn {

/// One step h -> gain (.) h + drive of an elementwise affine recurrence.
/// Composition of these maps is the monoid every linear recurrence in the
/// library is scanned over.
struct AffineElement {
  ComplexVector gain;
  ComplexVector drive;

  std::size_t width() const noexcept { return gain.size(); }
  bool operator==(const AffineElement&) const = default;
};

/// A length-T run of affine steps stored as two T x N matrices. When the
/// transition is time invariant, `gains` may hold a single row that is
/// broadcast over every step.
struct AffineSequence {
  ComplexMatrix gains;
  ComplexMatrix drives;

  std::size_t length() const noexcept { return drives.rows(); }
  std::size_t width() const noexcept { return drives.cols(); }
  bool broadcast_gain() const noexcept { return gains.rows() == 1 && drives.rows() != 1; }
  std::span<const Complex> gain(std::size_t t) const noexcept {
    return gains.row(gains.rows() == 1 ? 0 : t);
  }
  AffineElement element(std::size_t t) const;

  static AffineSequence from_elements(std::span<const AffineElement> elements);
  /// Checks the gain/drive shapes agree; throws ShapeError otherwise.
  void validate() const;
};

/// Neutral element: gain 1, drive 0.
AffineElement scan_identity(std::size_t width);

/// Map equal to applying `first` then `second`.
AffineElement scan_combine(const AffineElement& first, const AffineElement& second);

/// Plain left-to-right recurrence; row t = gain_t (.) row_{t-1} + drive_t with
/// row_{-1} = h0. h0 itself is not part of the output.
StateSequence scan_sequential(const AffineSequence& seq, std::span<const Complex> h0);

/// Two-pass chunked scan: each chunk is scanned locally, the chunk summaries
/// are combined left to right, then every chunk is corrected with its carry.
/// Chunk boundaries depend on `chunk_size` only, so the result is identical
/// for every worker count. The first chunk starts from h0 directly and
/// therefore matches scan_sequential bit for bit.
StateSequence scan_parallel(const AffineSequence& seq, std::span<const Complex> h0,
                            std::size_t chunk_size, int workers = 0);

/// Chunk size used by forward passes in parallel mode; a function of T only.
std::size_t default_chunk_size(std::size_t length);

/// Worker count used when `workers` <= 0.
int default_workers();

}  // namespace paralesn
