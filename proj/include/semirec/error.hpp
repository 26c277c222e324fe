#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semirec {

enum class ErrorCode {
  InvalidArgument,
  DegenerateParameters,
  CavityTooClose,
  EmptyGamma,
  EmptyMask,
  MeshGenerationFailed,
  ParseError,
  DimensionMismatch,
  SolverBreakdown,
  OutsideSmallDataRegime,
  NewtonDiverged,
  MaxIterations,
  NotASolution,
  MissingLatticeEntry,
  StencilOutsideNeighborhood,
  RegionsNotDisjoint,
  D2DisconnectsDomain,
  EigensolverFailure,
  NoLocalization,
  InsufficientData,
  MisfitNotReduced,
  IllConditionedSystem,
  FieldsEqual,
  NoValidSplit,
  ConfigInvalid,
  ScenarioFailed,
  PhantomOutsideWellposedness,
};

std::string_view to_string(ErrorCode code);

/// Exception type used throughout the library. The code identifies the
/// failure class; the message carries the details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace semirec
