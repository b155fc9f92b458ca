#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segbench {

enum class Errc {
  // volume I/O
  IoFailure,
  BadMagic,
  UnsupportedEncoding,
  UnsupportedFormat,
  MissingHeaderField,
  DimensionMismatch,
  NonPositiveSpacing,
  FactorExceedsDim,
  // geometry / masks
  GeometryMismatch,
  EmptyMask,
  DegenerateTruth,
  // quality
  DegenerateContrast,
  EmptyBackground,
  EmptyInput,
  // preprocess
  ConstantVolume,
  TooManyTiles,
  InvalidSpec,
  NoBaseData,
  // pipeline
  NoForeground,
  BoxInconsistent,
  // statistics
  EmptyCases,
  DegenerateSample,
  DegeneratePartition,
  ConstantSample,
  CaseSetMismatch,
  // phantom
  GeometryOutOfBounds,
  InfeasibleTier,
  // tables / CLI
  ParseFailure,
  UnpairedCases,
  InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

/// The single exception type thrown by the library. `code()` identifies the
/// failure class; `what()` carries a human-readable detail line.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace segbench
