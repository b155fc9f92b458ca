#include "segbench/error.hpp"

namespace segbench {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::IoFailure: return "IoFailure";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedEncoding: return "UnsupportedEncoding";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::MissingHeaderField: return "MissingHeaderField";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonPositiveSpacing: return "NonPositiveSpacing";
    case Errc::FactorExceedsDim: return "FactorExceedsDim";
    case Errc::GeometryMismatch: return "GeometryMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::DegenerateTruth: return "DegenerateTruth";
    case Errc::DegenerateContrast: return "DegenerateContrast";
    case Errc::EmptyBackground: return "EmptyBackground";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ConstantVolume: return "ConstantVolume";
    case Errc::TooManyTiles: return "TooManyTiles";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::NoBaseData: return "NoBaseData";
    case Errc::NoForeground: return "NoForeground";
    case Errc::BoxInconsistent: return "BoxInconsistent";
    case Errc::EmptyCases: return "EmptyCases";
    case Errc::DegenerateSample: return "DegenerateSample";
    case Errc::DegeneratePartition: return "DegeneratePartition";
    case Errc::ConstantSample: return "ConstantSample";
    case Errc::CaseSetMismatch: return "CaseSetMismatch";
    case Errc::GeometryOutOfBounds: return "GeometryOutOfBounds";
    case Errc::InfeasibleTier: return "InfeasibleTier";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::UnpairedCases: return "UnpairedCases";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace segbench
