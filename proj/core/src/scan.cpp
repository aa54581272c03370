#include "paralesn/scan.hpp"

#include <omp.h>

#include <algorithm>
#include <string>

namespace paralesn {

namespace {

void require_width(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ShapeError(std::string(what) + ": width " + std::to_string(got) + " != " +
                     std::to_string(expected));
  }
}

}  // namespace

AffineElement AffineSequence::element(std::size_t t) const {
  const auto g = gain(t);
  const auto d = drives.row(t);
  return {ComplexVector(g.begin(), g.end()), ComplexVector(d.begin(), d.end())};
}

AffineSequence AffineSequence::from_elements(std::span<const AffineElement> elements) {
  if (elements.empty()) return {};
  const std::size_t n = elements.front().width();
  AffineSequence seq{ComplexMatrix(elements.size(), n), ComplexMatrix(elements.size(), n)};
  for (std::size_t t = 0; t < elements.size(); ++t) {
    const auto& e = elements[t];
    require_width(n, e.gain.size(), "affine element gain");
    require_width(n, e.drive.size(), "affine element drive");
    std::copy(e.gain.begin(), e.gain.end(), seq.gains.row(t).begin());
    std::copy(e.drive.begin(), e.drive.end(), seq.drives.row(t).begin());
  }
  return seq;
}

void AffineSequence::validate() const {
  if (drives.rows() == 0) return;
  require_width(drives.cols(), gains.cols(), "affine sequence gains");
  if (gains.rows() != 1 && gains.rows() != drives.rows()) {
    throw ShapeError("affine sequence: gains must have 1 or T rows");
  }
}

AffineElement scan_identity(std::size_t width) {
  if (width == 0) throw InvalidArgument("scan_identity: width must be >= 1");
  return {ComplexVector(width, Complex{1.0, 0.0}), ComplexVector(width, Complex{0.0, 0.0})};
}

AffineElement scan_combine(const AffineElement& first, const AffineElement& second) {
  const std::size_t n = first.width();
  require_width(n, first.drive.size(), "scan_combine first");
  require_width(n, second.gain.size(), "scan_combine second");
  require_width(n, second.drive.size(), "scan_combine second");
  AffineElement out{ComplexVector(n), ComplexVector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.gain[i] = second.gain[i] * first.gain[i];
    out.drive[i] = second.gain[i] * first.drive[i] + second.drive[i];
  }
  return out;
}

StateSequence scan_sequential(const AffineSequence& seq, std::span<const Complex> h0) {
  seq.validate();
  const std::size_t T = seq.length();
  if (T == 0) return {};
  const std::size_t n = seq.width();
  require_width(n, h0.size(), "scan_sequential h0");

  StateSequence out(T, n);
  const Complex* prev = h0.data();
  for (std::size_t t = 0; t < T; ++t) {
    const Complex* g = seq.gain(t).data();
    const Complex* d = seq.drives.row(t).data();
    Complex* h = out.row(t).data();
    for (std::size_t i = 0; i < n; ++i) h[i] = g[i] * prev[i] + d[i];
    prev = h;
  }
  return out;
}

StateSequence scan_parallel(const AffineSequence& seq, std::span<const Complex> h0,
                            std::size_t chunk_size, int workers) {
  if (chunk_size == 0) throw InvalidArgument("scan_parallel: chunk size must be positive");
  seq.validate();
  const std::size_t T = seq.length();
  if (T == 0) return {};
  const std::size_t n = seq.width();
  require_width(n, h0.size(), "scan_parallel h0");

  const std::size_t chunks = (T + chunk_size - 1) / chunk_size;
  const int threads = workers > 0 ? workers : default_workers();
  StateSequence out(T, n);
  ComplexMatrix chunk_gain(chunks, n, Complex{1.0, 0.0});

  // Pass 1: local scans. Chunk 0 starts from h0, the rest from zero.
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(T, begin + chunk_size);
    Complex* prod = chunk_gain.row(c).data();
    for (std::size_t t = begin; t < end; ++t) {
      const Complex* g = seq.gain(t).data();
      const Complex* d = seq.drives.row(t).data();
      Complex* h = out.row(t).data();
      if (t == begin) {
        if (c == 0) {
          for (std::size_t i = 0; i < n; ++i) h[i] = g[i] * h0[i] + d[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) h[i] = d[i];
        }
      } else {
        const Complex* prev = out.row(t - 1).data();
        for (std::size_t i = 0; i < n; ++i) h[i] = g[i] * prev[i] + d[i];
      }
      for (std::size_t i = 0; i < n; ++i) prod[i] *= g[i];
    }
  }

  if (chunks == 1) return out;

  // Pass 2: carries entering each chunk, left to right over chunk summaries.
  ComplexMatrix carry(chunks, n);
  {
    const auto first_last = out.row(std::min(T, chunk_size) - 1);
    std::copy(first_last.begin(), first_last.end(), carry.row(1).begin());
    for (std::size_t c = 1; c + 1 < chunks; ++c) {
      const std::size_t last = std::min(T, (c + 1) * chunk_size) - 1;
      const Complex* a = chunk_gain.row(c).data();
      const Complex* b = out.row(last).data();
      const Complex* in = carry.row(c).data();
      Complex* next = carry.row(c + 1).data();
      for (std::size_t i = 0; i < n; ++i) next[i] = a[i] * in[i] + b[i];
    }
  }

  // Pass 3: fold each carry into its chunk.
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::ptrdiff_t ci = 1; ci < static_cast<std::ptrdiff_t>(chunks); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(T, begin + chunk_size);
    ComplexVector running(carry.row(c).begin(), carry.row(c).end());
    for (std::size_t t = begin; t < end; ++t) {
      const Complex* g = seq.gain(t).data();
      Complex* h = out.row(t).data();
      for (std::size_t i = 0; i < n; ++i) {
        running[i] *= g[i];
        h[i] += running[i];
      }
    }
  }
  return out;
}

std::size_t default_chunk_size(std::size_t length) {
  return std::clamp<std::size_t>(length / 64, 64, 4096);
}

int default_workers() { return omp_get_max_threads(); }

}  // namespace paralesn
