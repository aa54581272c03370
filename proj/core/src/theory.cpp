#include "paralesn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "paralesn/error.hpp"

namespace paralesn::theory {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

RealMatrix random_inputs(std::size_t T, std::size_t n_in, RngStream& rng) {
  RealMatrix x(T, n_in);
  for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
  return x;
}

double slope_of_log(std::span<const double> d) {
  // Fit only the stretch before d_t reaches the rounding floor.
  const double floor = d.empty() ? 0.0 : 1e-8 * d[0];
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < d.size(); ++t) {
    if (!(d[t] > floor) || !std::isfinite(d[t])) break;
    const double x = static_cast<double>(t);
    const double y = std::log(d[t]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

}  // namespace

ParalEsnLayer linear_layer(ComplexVector lambda_bar, std::size_t n_in, RngStream& rng) {
  const std::size_t n = lambda_bar.size();
  ComplexMatrix w_in = sample_uniform_complex(n, n_in, rng);
  return ParalEsnLayer(std::move(lambda_bar), 1.0, DenseInput{std::move(w_in)}, n_in,
                       ComplexVector(n, Complex{}), ComplexVector{Complex{1.0, 0.0}}, Complex{});
}

ContractionTrace contraction_trace(const ParalEsnLayer& layer, const RealMatrix& inputs,
                                   std::span<const Complex> h0, std::span<const Complex> h0_prime) {
  const std::size_t n = layer.units();
  if (h0.size() != n || h0_prime.size() != n) throw ShapeError("contraction_trace: h0 width");
  const StateSequence a = layer_states(layer, inputs, {}, h0);
  const StateSequence b = layer_states(layer, inputs, {}, h0_prime);

  ContractionTrace tr;
  tr.max_modulus = layer.max_modulus();
  tr.distances.resize(inputs.rows() + 1);
  ComplexVector diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = h0[i] - h0_prime[i];
  tr.distances[0] = norm2(diff);
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    for (std::size_t i = 0; i < n; ++i) diff[i] = a(t, i) - b(t, i);
    const double d = norm2(diff);
    tr.distances[t + 1] = d;
    const double prev = tr.distances[t];
    const double slack = 8.0 * kEps * (norm2(a.row(t)) + norm2(b.row(t)));
    if (d > tr.max_modulus * prev + slack) ++tr.violations;
    if (prev > 1e6 * slack) tr.worst_ratio = std::max(tr.worst_ratio, d / prev);
  }
  tr.log_slope = slope_of_log(tr.distances);
  return tr;
}

ContractionSummary esp_contraction_test(const ParalEsnLayer& layer, std::size_t T,
                                        std::size_t trials, RngStream& rng) {
  ContractionSummary s;
  s.max_modulus = layer.max_modulus();
  for (std::size_t k = 0; k < trials; ++k) {
    const RealMatrix x = random_inputs(T, layer.input_width(), rng);
    const ComplexMatrix h = sample_uniform_complex(2, layer.units(), rng);
    auto tr = contraction_trace(layer, x, h.row(0), h.row(1));
    s.violations += tr.violations;
    s.worst_ratio = std::max(s.worst_ratio, tr.worst_ratio);
    s.mean_log_slope += tr.log_slope / static_cast<double>(trials);
    s.trials.push_back(std::move(tr));
  }
  return s;
}

// ------------------------------------------------------------------ equivalence

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Complex aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

double norm1(const ComplexMatrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

double frobenius(const ComplexMatrix& a) { return norm2(a.flat()); }

ComplexMatrix invert(const ComplexMatrix& a) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw ShapeError("invert: matrix must be square and non-empty");
  double scale = 0.0;
  for (const auto& v : a.flat()) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0)) throw SingularMatrixError("invert: zero matrix");

  ComplexMatrix m = a;
  ComplexMatrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    }
    if (std::abs(m(piv, col)) < 1e-12 * scale) {
      throw SingularMatrixError("invert: pivot below threshold in column " + std::to_string(col));
    }
    if (piv != col) {
      std::swap_ranges(m.row(col).begin(), m.row(col).end(), m.row(piv).begin());
      std::swap_ranges(inv.row(col).begin(), inv.row(col).end(), inv.row(piv).begin());
    }
    const Complex p = m(col, col);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const Complex f = m(r, col) / p;
      if (f == Complex{}) continue;
      for (std::size_t c = 0; c < n; ++c) {
        m(r, c) -= f * m(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const Complex p = m(r, r);
    for (std::size_t c = 0; c < n; ++c) inv(r, c) /= p;
  }
  return inv;
}

EquivalencePair make_equivalence_pair(ComplexVector lambda, ComplexMatrix v, ComplexMatrix w_in) {
  const std::size_t n = lambda.size();
  if (v.rows() != n || v.cols() != n || w_in.rows() != n) {
    throw ShapeError("make_equivalence_pair: V must be N_h x N_h and W_in N_h x N_in");
  }
  EquivalencePair p;
  p.v_inv = invert(v);
  ComplexMatrix v_lambda = v;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) v_lambda(i, j) *= lambda[j];
  }
  p.w_h = matmul(v_lambda, p.v_inv);
  p.w_in_diag = matmul(p.v_inv, w_in);
  p.condition = norm1(v) * norm1(p.v_inv);

  ComplexMatrix resid = matmul(p.w_h, v);
  for (std::size_t k = 0; k < resid.size(); ++k) resid.flat()[k] -= v_lambda.flat()[k];
  const double denom = frobenius(p.w_h) * frobenius(v);
  p.reconstruction_error = denom > 0.0 ? frobenius(resid) / denom : frobenius(resid);

  p.lambda = std::move(lambda);
  p.v = std::move(v);
  p.w_in = std::move(w_in);
  return p;
}

EquivalencePair build_equivalence_pair(std::size_t n_h, std::size_t n_in, RngStream& rng) {
  if (n_h == 0 || n_in == 0) throw InvalidArgument("build_equivalence_pair: N_h and N_in must be >= 1");
  ComplexVector lambda(n_h);
  for (auto& l : lambda) {
    const double r = rng.uniform(0.0, 0.95);
    const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    l = std::polar(std::min(r, 0.95 - 1e-12), th);
  }
  ComplexMatrix w_in = sample_uniform_complex(n_h, n_in, rng);
  for (int attempt = 0; attempt < kMaxConditionRejections; ++attempt) {
    ComplexMatrix v = sample_uniform_complex(n_h, n_h, rng);
    try {
      EquivalencePair p = make_equivalence_pair(lambda, std::move(v), w_in);
      if (p.condition <= kMaxCondition) return p;
    } catch (const SingularMatrixError&) {
    }
  }
  throw Error("build_equivalence_pair: " + std::to_string(kMaxConditionRejections) +
              " consecutive eigenbases exceeded the condition limit");
}

EquivalenceReport verify_equivalence(const EquivalencePair& pair, const RealMatrix& inputs) {
  const std::size_t n = pair.lambda.size();
  const std::size_t n_in = pair.w_in.cols();
  if (inputs.cols() != n_in) throw ShapeError("verify_equivalence: input width");
  EquivalenceReport rep;
  rep.tolerance = 1e-8 * pair.condition;

  ComplexVector h(n), hd(n), next(n), mapped(n);
  for (std::size_t t = 0; t < inputs.rows(); ++t) {
    const auto x = inputs.row(t);
    for (std::size_t i = 0; i < n; ++i) {
      Complex acc{};
      for (std::size_t j = 0; j < n; ++j) acc += pair.w_h(i, j) * h[j];
      Complex drive{}, drive_d{};
      for (std::size_t c = 0; c < n_in; ++c) {
        drive += pair.w_in(i, c) * x[c];
        drive_d += pair.w_in_diag(i, c) * x[c];
      }
      next[i] = acc + drive;
      hd[i] = pair.lambda[i] * hd[i] + drive_d;
    }
    h.swap(next);
    for (std::size_t i = 0; i < n; ++i) {
      Complex acc{};
      for (std::size_t j = 0; j < n; ++j) acc += pair.v(i, j) * hd[j];
      mapped[i] = acc - h[i];
    }
    const double ref = norm2(h);
    const double err = norm2(mapped);
    const double dev = ref > 0.0 ? err / ref : err;
    if (t == 0 || dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.worst_step = t + 1;
    }
  }
  rep.passed = rep.max_deviation <= rep.tolerance;
  return rep;
}

}  // namespace paralesn::theory
