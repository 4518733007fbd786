#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadattack {

// Every failure the library reports carries one of these codes so callers
// (and the CLI's JSON error channel) can dispatch on it.
enum class Errc {
  MalformedRow,
  TimestampGap,
  NonPositiveLoad,
  ConstantFeature,
  UnknownFeature,
  InsufficientHistory,
  EmptySplit,
  InvalidConfig,
  BadShape,
  ShapeMismatch,
  Diverged,
  BarrierDomain,
  QueryBudgetExhausted,
  NumericalBreakdown,
  NodeLimit,
  Infeasible,
  SchemaError,
  DisconnectedGraph,
  NoReferenceBus,
  BadShares,
  InstanceError,
  UCInfeasible,
  MissingArtifacts,
  IoError,
};

inline std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::TimestampGap: return "TimestampGap";
    case Errc::NonPositiveLoad: return "NonPositiveLoad";
    case Errc::ConstantFeature: return "ConstantFeature";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::BadShape: return "BadShape";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::Diverged: return "Diverged";
    case Errc::BarrierDomain: return "BarrierDomain";
    case Errc::QueryBudgetExhausted: return "QueryBudgetExhausted";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::NodeLimit: return "NodeLimit";
    case Errc::Infeasible: return "Infeasible";
    case Errc::SchemaError: return "SchemaError";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::NoReferenceBus: return "NoReferenceBus";
    case Errc::BadShares: return "BadShares";
    case Errc::InstanceError: return "InstanceError";
    case Errc::UCInfeasible: return "UCInfeasible";
    case Errc::MissingArtifacts: return "MissingArtifacts";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace loadattack
