// errors.hpp: Typed runtime errors; each names the violated invariant and
// carries the measured deviation in its message.
#pragma once

#include <stdexcept>

namespace qstab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotHermitian : Error { using Error::Error; };
struct TraceNotOne : Error { using Error::Error; };
struct NotPositive : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct InvalidSpectrum : Error { using Error::Error; };
struct NonPositiveProduct : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct ZeroLadderCoefficient : Error { using Error::Error; };
struct IllConditionedKernel : Error { using Error::Error; };
struct StepRejected : Error { using Error::Error; };
struct NotBlockDiagonal : Error { using Error::Error; };
struct MeasurementDecoupled : Error { using Error::Error; };
struct DegenerateMeasurement : Error { using Error::Error; };
struct ConfigParse : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

}  // namespace qstab
