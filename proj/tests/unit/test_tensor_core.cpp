#include <doctest.h>

#include <cmath>
#include <numbers>

#include "paralesn/rng.hpp"
#include "paralesn/scan.hpp"
#include "paralesn/tensor.hpp"

using namespace paralesn;

namespace {

AffineSequence random_sequence(std::size_t T, std::size_t n, RngStream& rng, double max_mod = 0.99) {
  AffineSequence seq{ComplexMatrix(T, n), ComplexMatrix(T, n)};
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      seq.gains(t, i) = std::polar(rng.uniform(0.0, max_mod), rng.uniform(-std::numbers::pi, std::numbers::pi));
      seq.drives(t, i) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    }
  }
  return seq;
}

AffineElement random_element(std::size_t n, RngStream& rng) {
  AffineElement e{ComplexVector(n), ComplexVector(n)};
  for (std::size_t i = 0; i < n; ++i) {
    e.gain[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    e.drive[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  }
  return e;
}

double rel_diff(const ComplexVector& a, const ComplexVector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-12));
  }
  return worst;
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  // Reference outputs of Philox4x32-10 from the Random123 distribution.
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(RngStream::philox(A4{0, 0, 0, 0}, A2{0, 0}) ==
        A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(RngStream::philox(A4{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          A2{0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(RngStream::philox(A4{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          A2{0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("rng streams are deterministic and distinct") {
  RngStream a(RngSpec{42}), b(RngSpec{42}), c(RngSpec{42}, 1), d(RngSpec{43});
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
  CHECK(a.position() == 100);
  RngStream u(RngSpec{7});
  for (int i = 0; i < 10000; ++i) {
    const double v = u.next_unit();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("sample_uniform_complex support, determinism and mean") {
  RngStream r1(RngSpec{3}), r2(RngSpec{3});
  const auto m1 = sample_uniform_complex(7, 5, r1);
  const auto m2 = sample_uniform_complex(7, 5, r2);
  CHECK(m1 == m2);
  CHECK(r1.position() == 2 * 7 * 5);

  RngStream big(RngSpec{11});
  const auto m = sample_uniform_complex(1000, 1000, big);
  double sum_abs_re = 0.0;
  for (const auto& z : m.flat()) {
    REQUIRE(std::abs(z.real()) <= 1.0);
    REQUIRE(std::abs(z.imag()) <= 1.0);
    sum_abs_re += std::abs(z.real());
  }
  CHECK(sum_abs_re / 1e6 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("scan identity and combine by hand") {
  CHECK_THROWS_AS(scan_identity(0), InvalidArgument);
  const auto id = scan_identity(2);
  CHECK(id.gain == ComplexVector{1.0, 1.0});
  CHECK(id.drive == ComplexVector{0.0, 0.0});

  // h2 = 5 (2 h0 + 3) + 7 = 10 h0 + 22
  const AffineElement first{{2.0}, {3.0}}, second{{5.0}, {7.0}};
  const auto c = scan_combine(first, second);
  CHECK(c.gain[0] == Complex(10.0));
  CHECK(c.drive[0] == Complex(22.0));

  RngStream rng(RngSpec{5});
  const auto e = random_element(3, rng);
  CHECK(scan_combine(scan_identity(3), e) == e);
  CHECK(scan_combine(e, scan_identity(3)) == e);
  CHECK_THROWS_AS(scan_combine(scan_identity(2), scan_identity(3)), ShapeError);
}

TEST_CASE("scan combine is associative") {
  RngStream rng(RngSpec{9});
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_element(4, rng), b = random_element(4, rng), c = random_element(4, rng);
    const auto left = scan_combine(scan_combine(a, b), c);
    const auto right = scan_combine(a, scan_combine(b, c));
    REQUIRE(rel_diff(left.gain, right.gain) <= 1e-12);
    REQUIRE(rel_diff(left.drive, right.drive) <= 1e-12);
    // Applying the composite equals stepping three times.
    ComplexVector h{{0.3, -0.2}, {1.0, 0.0}, {0.0, 0.5}, {-1.0, 1.0}}, step = h;
    for (const auto* e : {&a, &b, &c}) {
      for (std::size_t i = 0; i < 4; ++i) step[i] = e->gain[i] * step[i] + e->drive[i];
    }
    for (std::size_t i = 0; i < 4; ++i) h[i] = left.gain[i] * h[i] + left.drive[i];
    REQUIRE(rel_diff(h, step) <= 1e-12);
  }
}

TEST_CASE("scan_sequential special cases") {
  SUBCASE("zero gain is memoryless") {
    RngStream rng(RngSpec{1});
    auto seq = random_sequence(10, 3, rng);
    for (auto& g : seq.gains.flat()) g = 0.0;
    const ComplexVector h0{1.0, 2.0, 3.0};
    CHECK(scan_sequential(seq, h0) == seq.drives);
  }
  SUBCASE("unit gain is a cumulative sum") {
    const Complex c{0.5, -0.25};
    AffineSequence seq{ComplexMatrix(1, 2, 1.0), ComplexMatrix(8, 2, c)};
    const ComplexVector h0{1.0, Complex(0.0, 1.0)};
    const auto out = scan_sequential(seq, h0);
    for (std::size_t t = 0; t < 8; ++t) {
      for (std::size_t i = 0; i < 2; ++i) CHECK(out(t, i) == h0[i] + static_cast<double>(t + 1) * c);
    }
  }
  SUBCASE("empty input") {
    AffineSequence seq{ComplexMatrix(0, 2), ComplexMatrix(0, 2)};
    CHECK(scan_sequential(seq, ComplexVector(2)).rows() == 0);
  }
}

TEST_CASE("scan_sequential matches the closed-form power sum") {
  RngStream rng(RngSpec{21});
  for (std::size_t T : {1u, 16u, 64u}) {
    // Time-invariant gain: h_t = lambda^t h0 + sum_s lambda^(t-s) d_s.
    auto seq = random_sequence(T, 4, rng);
    seq.gains = seq.gains.slice_rows(0, 1);
    if (T == 1) seq.gains = ComplexMatrix(1, 4, Complex(0.9, 0.1));
    const ComplexVector h0{{0.2, 0.1}, {-0.4, 0.0}, {0.0, 1.0}, {0.7, -0.7}};
    const auto out = scan_sequential(seq, h0);
    ComplexMatrix oracle(T, 4);
    for (std::size_t t = 1; t <= T; ++t) {
      for (std::size_t i = 0; i < 4; ++i) {
        const Complex lam = seq.gains(0, i);
        Complex acc = std::pow(lam, static_cast<double>(t)) * h0[i];
        for (std::size_t s = 1; s <= t; ++s) {
          acc += std::pow(lam, static_cast<double>(t - s)) * seq.drives(s - 1, i);
        }
        oracle(t - 1, i) = acc;
      }
    }
    CHECK(max_relative_error(out, oracle) <= 1e-10);
  }
}

TEST_CASE("scan_parallel agrees with scan_sequential") {
  RngStream rng(RngSpec{33});
  const auto seq = random_sequence(4096, 64, rng);
  const ComplexVector h0(64, Complex(0.5, -0.5));
  const auto ref = scan_sequential(seq, h0);
  for (std::size_t chunk : {1u, 7u, 64u, 4096u, 10000u}) {
    CAPTURE(chunk);
    const auto par = scan_parallel(seq, h0, chunk);
    CHECK(max_relative_error(par, ref) <= 1e-10);
    if (chunk >= 4096) CHECK(par == ref);
  }
  const auto one = random_sequence(1, 8, rng);
  CHECK(scan_parallel(one, ComplexVector(8), 3) == scan_sequential(one, ComplexVector(8)));
  CHECK_THROWS_AS(scan_parallel(seq, h0, 0), InvalidArgument);
}

TEST_CASE("scan_parallel is independent of the worker count") {
  RngStream rng(RngSpec{44});
  auto seq = random_sequence(3000, 16, rng);
  seq.gains = seq.gains.slice_rows(0, 1);
  const ComplexVector h0(16);
  const auto base = scan_parallel(seq, h0, 97, 1);
  for (int w : {2, 8}) CHECK(scan_parallel(seq, h0, 97, w) == base);
}

TEST_CASE("shape validation") {
  AffineSequence bad{ComplexMatrix(3, 2), ComplexMatrix(4, 2)};
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  AffineSequence ok{ComplexMatrix(4, 2), ComplexMatrix(4, 2)};
  CHECK_THROWS_AS(scan_sequential(ok, ComplexVector(3)), ShapeError);
  CHECK_THROWS_AS(RealMatrix(2, 2, std::vector<double>(3)), ShapeError);
}
