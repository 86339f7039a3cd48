#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wfdiff {

enum class Errc {
  NotAGenerator,
  DegenerateStationary,
  ComplexSpectrum,
  InvalidPsi,
  InvalidPi,
  InvalidArgument,
  NumericalBreakdown,
  NonRealEigenspace,
  RankZero,
  NotInjective,
  NoValidMu,
  BisectionFailure,
  InvalidRate,
  ZeroProbability,
  InvalidC,
  Unconverged,
  EnvelopeStall,
  NonPositiveG,
  StateSpaceTooLarge,
  TableTooLarge,
  Config,
};

std::string_view errc_name(Errc code);

/// Library-wide exception. The code lets callers (the CLI in particular)
/// separate configuration mistakes from numerical failures.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Unconverged series, stalled envelopes and similar failures of the
  /// numerics, as opposed to invalid input.
  bool is_numerical() const noexcept {
    return code_ == Errc::Unconverged || code_ == Errc::EnvelopeStall ||
           code_ == Errc::NonPositiveG || code_ == Errc::NumericalBreakdown ||
           code_ == Errc::BisectionFailure;
  }

 private:
  Errc code_;
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NotAGenerator: return "NotAGenerator";
    case Errc::DegenerateStationary: return "DegenerateStationary";
    case Errc::ComplexSpectrum: return "ComplexSpectrum";
    case Errc::InvalidPsi: return "InvalidPsi";
    case Errc::InvalidPi: return "InvalidPi";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::NonRealEigenspace: return "NonRealEigenspace";
    case Errc::RankZero: return "RankZero";
    case Errc::NotInjective: return "NotInjective";
    case Errc::NoValidMu: return "NoValidMu";
    case Errc::BisectionFailure: return "BisectionFailure";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::ZeroProbability: return "ZeroProbability";
    case Errc::InvalidC: return "InvalidC";
    case Errc::Unconverged: return "Unconverged";
    case Errc::EnvelopeStall: return "EnvelopeStall";
    case Errc::NonPositiveG: return "NonPositiveG";
    case Errc::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case Errc::TableTooLarge: return "TableTooLarge";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace wfdiff
