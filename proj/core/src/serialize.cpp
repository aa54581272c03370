#include "paralesn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "paralesn/error.hpp"

namespace paralesn::io {

namespace {

constexpr std::string_view kMagic = "PESNMODL";

class Writer {
 public:
  explicit Writer(RecordKind kind) {
    bytes_.insert(bytes_.end(), kMagic.begin(), kMagic.end());
    u32(kFormatVersion);
    u32(static_cast<std::uint32_t>(kind));
  }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void c128(Complex v) {
    f64(v.real());
    f64(v.imag());
  }
  void reals(std::span<const double> v) {
    size(v.size());
    for (double x : v) f64(x);
  }
  void complexes(std::span<const Complex> v) {
    size(v.size());
    for (const Complex& x : v) c128(x);
  }
  void matrix(const RealMatrix& m) {
    size(m.rows());
    size(m.cols());
    for (double x : m.flat()) f64(x);
  }
  void matrix(const ComplexMatrix& m) {
    size(m.rows());
    size(m.cols());
    for (const Complex& x : m.flat()) c128(x);
  }

  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, RecordKind expected) : bytes_(bytes) {
    if (peek_kind(bytes) != expected) throw ParseError("record kind mismatch");
    pos_ = kMagic.size() + 8;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::size_t size() {
    const std::uint64_t v = u64();
    if (v > bytes_.size()) throw ParseError("record length field out of range");
    return static_cast<std::size_t>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Complex c128() {
    const double re = f64();
    return {re, f64()};
  }
  RealVector reals() {
    RealVector v(size());
    for (auto& x : v) x = f64();
    return v;
  }
  ComplexVector complexes() {
    ComplexVector v(size());
    for (auto& x : v) x = c128();
    return v;
  }
  RealMatrix real_matrix() {
    const std::size_t r = size(), c = size();
    RealMatrix m(r, c);
    for (auto& x : m.flat()) x = f64();
    return m;
  }
  ComplexMatrix complex_matrix() {
    const std::size_t r = size(), c = size();
    ComplexMatrix m(r, c);
    for (auto& x : m.flat()) x = c128();
    return m;
  }

  void finish() const {
    if (pos_ != bytes_.size()) throw ParseError("trailing bytes after record payload");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("record truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put(Writer& w, const LayerHyperparams& hp) {
  w.size(hp.n_h);
  w.f64(hp.rho_min);
  w.f64(hp.rho_max);
  w.f64(hp.theta_min);
  w.f64(hp.theta_max);
  w.f64(hp.tau);
  w.f64(hp.omega_b);
  w.f64(hp.omega_mix);
  w.f64(hp.omega_mixb);
  w.size(hp.k);
  w.u32(static_cast<std::uint32_t>(hp.input));
}

LayerHyperparams get_layer_hp(Reader& r) {
  LayerHyperparams hp;
  hp.n_h = r.size();
  hp.rho_min = r.f64();
  hp.rho_max = r.f64();
  hp.theta_min = r.f64();
  hp.theta_max = r.f64();
  hp.tau = r.f64();
  hp.omega_b = r.f64();
  hp.omega_mix = r.f64();
  hp.omega_mixb = r.f64();
  hp.k = r.size();
  hp.input = static_cast<InputKind>(r.u32());
  return hp;
}

void put(Writer& w, const EsnHyperparams& hp) {
  w.size(hp.n_h);
  w.f64(hp.rho);
  w.f64(hp.omega_in);
  w.f64(hp.omega_b);
  w.f64(hp.tau);
}

EsnHyperparams get_esn_hp(Reader& r) {
  EsnHyperparams hp;
  hp.n_h = r.size();
  hp.rho = r.f64();
  hp.omega_in = r.f64();
  hp.omega_b = r.f64();
  hp.tau = r.f64();
  return hp;
}

void put(Writer& w, const Standardizer& s) {
  w.reals(s.mean());
  w.reals(s.scale());
}

Standardizer get_standardizer(Reader& r) {
  RealVector mean = r.reals();
  RealVector scale = r.reals();
  return Standardizer(std::move(mean), std::move(scale));
}

}  // namespace

RecordKind peek_kind(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ParseError("not a paralesn model record");
  }
  auto word = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  const std::uint32_t version = word(kMagic.size());
  if (version != kFormatVersion) {
    throw ParseError("unsupported record version " + std::to_string(version));
  }
  const std::uint32_t kind = word(kMagic.size() + 4);
  if (kind < 1 || kind > 4) throw ParseError("unknown record kind " + std::to_string(kind));
  return static_cast<RecordKind>(kind);
}

Bytes encode(const ParalEsnRecord& rec) {
  Writer w(RecordKind::kParalEsn);
  w.size(rec.hyperparams.total_units);
  w.size(rec.hyperparams.layers);
  w.u32(rec.hyperparams.concat ? 1 : 0);
  put(w, rec.hyperparams.first);
  put(w, rec.hyperparams.inter);
  w.u64(rec.rng.seed);
  w.u32(rec.model.concat() ? 1 : 0);
  w.size(rec.model.layers().size());
  for (const auto& layer : rec.model.layers()) {
    w.complexes(layer.lambda_bar());
    w.f64(layer.tau());
    w.size(layer.input_width());
    if (const auto* dense = std::get_if<DenseInput>(&layer.input())) {
      w.u32(static_cast<std::uint32_t>(InputKind::kDense));
      w.matrix(dense->weights);
    } else {
      w.u32(static_cast<std::uint32_t>(InputKind::kRing));
      w.complexes(std::get<RingInput>(layer.input()).weights);
    }
    w.complexes(layer.bias());
    w.complexes(layer.mix_kernel());
    w.c128(layer.mix_bias());
  }
  return w.take();
}

ParalEsnRecord decode_paralesn(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, RecordKind::kParalEsn);
  DeepHyperparams hp;
  hp.total_units = r.size();
  hp.layers = r.size();
  hp.concat = r.u32() != 0;
  hp.first = get_layer_hp(r);
  hp.inter = get_layer_hp(r);
  const RngSpec spec{r.u64()};
  const bool concat = r.u32() != 0;
  const std::size_t count = r.size();
  std::vector<ParalEsnLayer> layers;
  for (std::size_t l = 0; l < count; ++l) {
    ComplexVector lambda_bar = r.complexes();
    const double tau = r.f64();
    const std::size_t width = r.size();
    const auto kind = static_cast<InputKind>(r.u32());
    InputWeights input = kind == InputKind::kDense ? InputWeights{DenseInput{r.complex_matrix()}}
                                                   : InputWeights{RingInput{r.complexes()}};
    ComplexVector bias = r.complexes();
    ComplexVector kernel = r.complexes();
    const Complex mix_bias = r.c128();
    layers.emplace_back(std::move(lambda_bar), tau, std::move(input), width, std::move(bias),
                        std::move(kernel), mix_bias);
  }
  r.finish();
  return {hp, spec, DeepParalEsn(std::move(layers), concat)};
}

Bytes encode(const BaselineRecord& rec) {
  Writer w(RecordKind::kBaseline);
  w.u32(static_cast<std::uint32_t>(rec.hyperparams.kind));
  w.size(rec.hyperparams.total_units);
  w.size(rec.hyperparams.layers);
  w.u32(rec.hyperparams.concat ? 1 : 0);
  put(w, rec.hyperparams.first);
  put(w, rec.hyperparams.inter);
  w.u64(rec.rng.seed);
  w.u32(rec.model.concat() ? 1 : 0);
  w.size(rec.model.layers().size());
  for (const auto& layer : rec.model.layers()) {
    if (const auto* esn = std::get_if<EsnLayer>(&layer)) {
      w.u32(static_cast<std::uint32_t>(BaselineKind::kEsn));
      w.matrix(esn->w_h);
      w.matrix(esn->w_in);
      w.reals(esn->bias);
      w.f64(esn->tau);
    } else {
      const auto& scr = std::get<ScrLayer>(layer);
      w.u32(static_cast<std::uint32_t>(BaselineKind::kScr));
      w.f64(scr.rho);
      w.matrix(scr.w_in);
      w.reals(scr.bias);
      w.f64(scr.tau);
    }
  }
  return w.take();
}

BaselineRecord decode_baseline(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, RecordKind::kBaseline);
  DeepBaselineHyperparams hp;
  hp.kind = static_cast<BaselineKind>(r.u32());
  hp.total_units = r.size();
  hp.layers = r.size();
  hp.concat = r.u32() != 0;
  hp.first = get_esn_hp(r);
  hp.inter = get_esn_hp(r);
  const RngSpec spec{r.u64()};
  const bool concat = r.u32() != 0;
  const std::size_t count = r.size();
  std::vector<BaselineLayer> layers;
  for (std::size_t l = 0; l < count; ++l) {
    if (static_cast<BaselineKind>(r.u32()) == BaselineKind::kEsn) {
      EsnLayer esn;
      esn.w_h = r.real_matrix();
      esn.w_in = r.real_matrix();
      esn.bias = r.reals();
      esn.tau = r.f64();
      layers.emplace_back(std::move(esn));
    } else {
      ScrLayer scr;
      scr.rho = r.f64();
      scr.w_in = r.real_matrix();
      scr.bias = r.reals();
      scr.tau = r.f64();
      layers.emplace_back(std::move(scr));
    }
  }
  r.finish();
  return {hp, spec, DeepBaseline(std::move(layers), concat)};
}

Bytes encode(const RidgeRecord& rec) {
  Writer w(RecordKind::kRidge);
  put(w, rec.standardizer);
  w.matrix(rec.readout.w_out);
  w.reals(rec.readout.b_out);
  w.f64(rec.readout.lambda_reg);
  return w.take();
}

RidgeRecord decode_ridge(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, RecordKind::kRidge);
  RidgeRecord rec;
  rec.standardizer = get_standardizer(r);
  rec.readout.w_out = r.real_matrix();
  rec.readout.b_out = r.reals();
  rec.readout.lambda_reg = r.f64();
  r.finish();
  return rec;
}

Bytes encode(const MlpRecord& rec) {
  Writer w(RecordKind::kMlp);
  put(w, rec.standardizer);
  w.u32(static_cast<std::uint32_t>(rec.loss));
  w.matrix(rec.params.w1);
  w.reals(rec.params.b1);
  w.matrix(rec.params.w2);
  w.reals(rec.params.b2);
  return w.take();
}

MlpRecord decode_mlp(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, RecordKind::kMlp);
  MlpRecord rec;
  rec.standardizer = get_standardizer(r);
  rec.loss = static_cast<MlpLoss>(r.u32());
  rec.params.w1 = r.real_matrix();
  rec.params.b1 = r.reals();
  rec.params.w2 = r.real_matrix();
  rec.params.b2 = r.reals();
  r.finish();
  return rec;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace paralesn::io
