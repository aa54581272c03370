#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "paralesn/baselines.hpp"
#include "paralesn/readout.hpp"
#include "paralesn/reservoir.hpp"
#include "paralesn/rng.hpp"

namespace paralesn::io {

/// Binary records: 8-byte magic "PESNMODL", u32 format version, u32 record
/// kind, then the payload. Integers and IEEE doubles are little-endian, so a
/// decode of an encode reproduces every bit.
inline constexpr std::uint32_t kFormatVersion = 1;

enum class RecordKind : std::uint32_t { kParalEsn = 1, kBaseline = 2, kRidge = 3, kMlp = 4 };

struct ParalEsnRecord {
  DeepHyperparams hyperparams;
  RngSpec rng;
  DeepParalEsn model;
};

struct BaselineRecord {
  DeepBaselineHyperparams hyperparams;
  RngSpec rng;
  DeepBaseline model;
};

struct RidgeRecord {
  Standardizer standardizer;
  RidgeReadout readout;
};

struct MlpRecord {
  Standardizer standardizer;
  MlpParams params;
  MlpLoss loss = MlpLoss::kMeanSquaredError;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode(const ParalEsnRecord& record);
Bytes encode(const BaselineRecord& record);
Bytes encode(const RidgeRecord& record);
Bytes encode(const MlpRecord& record);

/// Kind stored in a record header. Throws ParseError on a bad magic or an
/// unsupported version.
RecordKind peek_kind(std::span<const std::uint8_t> bytes);

/// Throw ParseError on truncation, trailing bytes or a kind mismatch.
ParalEsnRecord decode_paralesn(std::span<const std::uint8_t> bytes);
BaselineRecord decode_baseline(std::span<const std::uint8_t> bytes);
RidgeRecord decode_ridge(std::span<const std::uint8_t> bytes);
MlpRecord decode_mlp(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
Bytes read_file(const std::filesystem::path& path);

}  // namespace paralesn::io
