#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "paralesn/reservoir.hpp"

using namespace paralesn;

namespace {

RealMatrix random_inputs(std::size_t T, std::size_t n, RngStream& rng) {
  RealMatrix x(T, n);
  for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
  return x;
}

ParalEsnLayer simple_layer(ComplexVector kernel, Complex mix_bias, std::size_t n_h = 4) {
  return ParalEsnLayer(ComplexVector(n_h, 0.5), 1.0, DenseInput{ComplexMatrix(n_h, 1, 1.0)}, 1,
                       ComplexVector(n_h), std::move(kernel), mix_bias);
}

// Straight transcription of the layer equations, one loop per index.
RealMatrix reference_layer(const ParalEsnLayer& layer, const RealMatrix& x) {
  const std::size_t n = layer.units(), T = x.rows(), k = layer.kernel_size();
  ComplexVector h(n);
  RealMatrix z(T, n);
  for (std::size_t t = 0; t < T; ++t) {
    ComplexVector u(n);
    layer.project_input(x.row(t), u);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = layer.lambda_bar()[i] * h[i] + layer.tau() * (u[i] + layer.bias()[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      Complex acc = layer.mix_bias();
      for (std::size_t m = 0; m < k; ++m) {
        const auto src = static_cast<std::ptrdiff_t>(j + m) - static_cast<std::ptrdiff_t>(k / 2);
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(n)) acc += layer.mix_kernel()[m] * h[src];
      }
      z(t, j) = std::clamp(std::tanh(acc.real()), -kMixBound, kMixBound);
    }
  }
  return z;
}

}  // namespace

TEST_CASE("hyperparameter validation") {
  LayerHyperparams hp;
  CHECK_NOTHROW(hp.validate());
  auto bad = hp;
  bad.k = 4;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = hp;
  bad.rho_min = 0.95;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = hp;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = hp;
  bad.n_h = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = hp;
  bad.k = 9;
  bad.n_h = 5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("init_diag_transition") {
  LayerHyperparams hp;
  hp.n_h = 64;
  SUBCASE("tau 1 keeps the raw eigenvalues inside the annulus") {
    hp.rho_min = 0.5;
    RngStream rng(RngSpec{1});
    for (const auto& l : init_diag_transition(hp, rng)) {
      CHECK(std::abs(l) >= 0.5 - 1e-15);
      CHECK(std::abs(l) <= 0.9 + 1e-15);
    }
  }
  SUBCASE("zero radius gives 1 - tau") {
    hp.rho_max = 0.0;
    hp.tau = 0.3;
    RngStream rng(RngSpec{2});
    for (const auto& l : init_diag_transition(hp, rng)) CHECK(l == Complex(0.7, 0.0));
  }
  SUBCASE("triangle bound over many draws") {
    RngStream rng(RngSpec{3});
    hp.n_h = 10000;
    for (double tau : {0.1, 0.5, 0.9, 1.0}) {
      hp.tau = tau;
      const auto lam = init_diag_transition(hp, rng);
      double worst = 0.0;
      for (const auto& l : lam) worst = std::max(worst, std::abs(l));
      CHECK(worst <= (1.0 - tau) + 0.9 * tau + 1e-15);
      CHECK(worst < 1.0);
    }
  }
}

TEST_CASE("init_input_weights scaling") {
  LayerHyperparams hp;
  hp.n_h = 3;
  RngStream r1(RngSpec{4}), r2(RngSpec{4});
  const auto raw = std::get<DenseInput>(init_input_weights(hp, ComplexVector(3), 2, r1));
  const auto raw_again = sample_uniform_complex(3, 2, r2);
  CHECK(raw.weights == raw_again);

  RngStream r3(RngSpec{4});
  const ComplexVector lam{0.0, Complex(0.99995, 0.0), Complex(0.0, 0.6)};
  const auto scaled = std::get<DenseInput>(init_input_weights(hp, lam, 2, r3));
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(scaled.weights(0, c) == raw.weights(0, c));
    CHECK(std::abs(scaled.weights(1, c)) ==
          doctest::Approx(std::abs(raw.weights(1, c)) * std::sqrt(1.0 - 0.99995 * 0.99995)));
    CHECK(std::abs(scaled.weights(2, c)) == doctest::Approx(std::abs(raw.weights(2, c)) * 0.8));
  }
  CHECK(std::sqrt(1.0 - 0.99995 * 0.99995) == doctest::Approx(0.01).epsilon(0.001));

  RngStream r4(RngSpec{4});
  CHECK_THROWS_AS(init_input_weights(hp, ComplexVector{0.0, 1.0, 0.0}, 2, r4), DomainError);
}

TEST_CASE("ring input maps index i-1 to i") {
  const Complex w1{1.0, 0.5}, w2{-2.0, 0.0}, w3{0.0, 3.0};
  ParalEsnLayer layer(ComplexVector(3, 0.5), 1.0, RingInput{{w1, w2, w3}}, 3, ComplexVector(3),
                      ComplexVector{1.0}, 0.0);
  const double p = 0.25, q = -1.5, r = 2.0;
  const std::vector<double> x{p, q, r};
  ComplexVector out(3);
  layer.project_input(x, out);
  CHECK(out[0] == w1 * r);
  CHECK(out[1] == w2 * p);
  CHECK(out[2] == w3 * q);
}

TEST_CASE("layer drive and states") {
  RngStream rng(RngSpec{5});
  LayerHyperparams hp;
  hp.n_h = 6;
  hp.tau = 0.5;
  hp.omega_b = 0.3;
  const auto layer = ParalEsnLayer::sample(hp, 2, rng);

  SUBCASE("zero input and bias decay as lambda^t h0") {
    LayerHyperparams z = hp;
    z.omega_b = 0.0;
    RngStream r(RngSpec{6});
    const auto quiet = ParalEsnLayer::sample(z, 2, r);
    ComplexVector h0(6, Complex(1.0, -0.5));
    const auto states = layer_states(quiet, RealMatrix(5, 2), {}, std::span<const Complex>(h0));
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t i = 0; i < 6; ++i) {
        const auto expect = std::pow(quiet.lambda_bar()[i], static_cast<double>(t + 1)) * h0[i];
        CHECK(std::abs(states(t, i) - expect) <= 1e-14);
      }
    }
  }
  SUBCASE("scan equals the step loop") {
    const auto x = random_inputs(3, 2, rng);
    const auto states = layer_states(layer, x);
    ComplexVector h(6);
    for (std::size_t t = 0; t < 3; ++t) {
      ComplexVector u(6);
      layer.project_input(x.row(t), u);
      for (std::size_t i = 0; i < 6; ++i) {
        h[i] = layer.lambda_bar()[i] * h[i] + 0.5 * (u[i] + layer.bias()[i]);
        CHECK(std::abs(states(t, i) - h[i]) <= 1e-14);
      }
    }
  }
  SUBCASE("tau 1 and zero radius are memoryless") {
    LayerHyperparams m = hp;
    m.tau = 1.0;
    m.rho_max = 0.0;
    RngStream r(RngSpec{7});
    const auto mem = ParalEsnLayer::sample(m, 2, r);
    const auto x = random_inputs(4, 2, rng);
    const auto states = layer_states(mem, x);
    for (std::size_t t = 0; t < 4; ++t) {
      ComplexVector u(6);
      mem.project_input(x.row(t), u);
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(states(t, i) - (u[i] + mem.bias()[i])) <= 1e-15);
    }
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_AS(layer_drive(layer, RealMatrix(3, 3)), ShapeError);
  }
}

TEST_CASE("mixing") {
  SUBCASE("zero kernel gives tanh of the bias") {
    const auto layer = simple_layer(ComplexVector(3), Complex(0.4, 7.0));
    ComplexMatrix h(2, 4, Complex(3.0, -1.0));
    const auto z = mix(layer, h);
    for (const auto v : z.flat()) CHECK(v == std::tanh(0.4));
  }
  SUBCASE("unit kernel is pointwise") {
    const auto layer = simple_layer(ComplexVector{1.0}, 0.0);
    ComplexMatrix h(1, 4);
    for (std::size_t i = 0; i < 4; ++i) h(0, i) = Complex(0.3 * static_cast<double>(i) - 0.5, 1.0);
    const auto z = mix(layer, h);
    for (std::size_t i = 0; i < 4; ++i) CHECK(z(0, i) == std::tanh(h(0, i).real()));
  }
  SUBCASE("k 3 sliding window with zero padding") {
    const auto layer = simple_layer(ComplexVector{1.0, 2.0, 3.0}, 0.0);
    ComplexMatrix h(1, 4);
    h(0, 0) = 1.0;
    const auto z = mix(layer, h);
    const double pre[4] = {2.0, 1.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 4; ++i) CHECK(z(0, i) == doctest::Approx(std::tanh(pre[i])));
  }
  SUBCASE("output stays strictly inside the unit interval") {
    const auto layer = simple_layer(ComplexVector{1e6, 1e6, 1e6}, 0.0);
    ComplexMatrix h(1, 4, Complex(1e3, 0.0));
    const auto z = mix(layer, h);
    for (const auto v : z.flat()) CHECK(std::abs(v) <= kMixBound);
  }
  SUBCASE("kernel wider than the layer") {
    CHECK_THROWS(mix(simple_layer(ComplexVector(5, 1.0), 0.0, 3), ComplexMatrix(1, 3)));
  }
}

TEST_CASE("parameter count") {
  RngStream rng(RngSpec{8});
  LayerHyperparams hp;
  hp.n_h = 128;
  hp.k = 5;
  const auto dense = ParalEsnLayer::sample(hp, 3, rng);
  CHECK(dense.parameter_count() == 128 + 128 * 3 + 128 + 5 + 1);
  hp.input = InputKind::kRing;
  const auto ring = ParalEsnLayer::sample(hp, 128, rng);
  CHECK(ring.parameter_count() == 128 + 128 + 128 + 5 + 1);
}

TEST_CASE("split_units") {
  CHECK(split_units(128, 3, true) == std::vector<std::size_t>{44, 42, 42});
  CHECK(split_units(128, 3, false) == std::vector<std::size_t>{128, 128, 128});
  CHECK(split_units(10, 1, true) == std::vector<std::size_t>{10});
  CHECK_THROWS_AS(split_units(2, 3, true), InvalidArgument);
}

TEST_CASE("deep forward") {
  DeepHyperparams hp;
  hp.total_units = 4;
  hp.layers = 2;
  hp.first.omega_b = 0.5;
  hp.first.tau = 0.7;
  hp.inter.omega_mix = 0.5;
  hp.inter.omega_mixb = 0.1;
  RngStream rng(RngSpec{9});
  const auto model = DeepParalEsn::sample(hp, 2, rng);
  REQUIRE(model.layers().size() == 2);
  CHECK(std::holds_alternative<DenseInput>(model.layers()[0].input()));
  CHECK(std::holds_alternative<RingInput>(model.layers()[1].input()));

  const auto x = random_inputs(8, 2, rng);
  SUBCASE("matches a nested reference loop") {
    const auto out = model.forward(x);
    const auto z1 = reference_layer(model.layers()[0], x);
    const auto z2 = reference_layer(model.layers()[1], z1);
    CHECK(max_relative_error(out.mixed[0], z1) <= 1e-12);
    CHECK(max_relative_error(out.features, z2) <= 1e-12);
  }
  SUBCASE("parallel matches sequential") {
    const auto longx = random_inputs(5000, 2, rng);
    const auto seq = model.forward(longx);
    const auto par = model.forward(longx, {ScanMode::kParallel, 4, 64});
    CHECK(max_relative_error(par.features, seq.features) <= 1e-10);
  }
  SUBCASE("concat stacks the layers") {
    DeepHyperparams c = hp;
    c.concat = true;
    c.total_units = 7;
    RngStream r(RngSpec{10});
    const auto cm = DeepParalEsn::sample(c, 2, r);
    CHECK(cm.layers()[0].units() == 4);
    const auto out = cm.forward(x);
    CHECK(cm.feature_width() == 7);
    CHECK(out.features.cols() == 7);
    CHECK(out.features(3, 0) == out.mixed[0](3, 0));
    CHECK(out.features(3, 4) == out.mixed[1](3, 0));
  }
  SUBCASE("one layer ignores concat") {
    DeepHyperparams a = hp, b = hp;
    a.layers = b.layers = 1;
    b.concat = true;
    RngStream ra(RngSpec{11}), rb(RngSpec{11});
    CHECK(DeepParalEsn::sample(a, 2, ra).forward(x).features ==
          DeepParalEsn::sample(b, 2, rb).forward(x).features);
  }
  SUBCASE("same seed, same model") {
    RngStream again(RngSpec{9});
    CHECK(DeepParalEsn::sample(hp, 2, again) == model);
  }
}
