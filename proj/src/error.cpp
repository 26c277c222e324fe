#include "semirec/error.hpp"

namespace semirec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateParameters: return "degenerate-parameters";
    case ErrorCode::CavityTooClose: return "cavity-too-close";
    case ErrorCode::EmptyGamma: return "empty-gamma";
    case ErrorCode::EmptyMask: return "empty-mask";
    case ErrorCode::MeshGenerationFailed: return "mesh-generation-failed";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::SolverBreakdown: return "solver-breakdown";
    case ErrorCode::OutsideSmallDataRegime: return "outside-small-data-regime";
    case ErrorCode::NewtonDiverged: return "newton-diverged";
    case ErrorCode::MaxIterations: return "max-iterations";
    case ErrorCode::NotASolution: return "not-a-solution";
    case ErrorCode::MissingLatticeEntry: return "missing-lattice-entry";
    case ErrorCode::StencilOutsideNeighborhood: return "stencil-outside-neighborhood";
    case ErrorCode::RegionsNotDisjoint: return "regions-not-disjoint";
    case ErrorCode::D2DisconnectsDomain: return "d2-disconnects-domain";
    case ErrorCode::EigensolverFailure: return "eigensolver-failure";
    case ErrorCode::NoLocalization: return "no-localization";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::MisfitNotReduced: return "misfit-not-reduced";
    case ErrorCode::IllConditionedSystem: return "ill-conditioned-system";
    case ErrorCode::FieldsEqual: return "fields-equal";
    case ErrorCode::NoValidSplit: return "no-valid-split";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::ScenarioFailed: return "scenario-failed";
    case ErrorCode::PhantomOutsideWellposedness: return "phantom-outside-wellposedness";
  }
  return "unknown";
}

}  // namespace semirec
