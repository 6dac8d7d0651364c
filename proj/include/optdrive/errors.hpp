#pragma once

#include <stdexcept>
#include <string>

namespace optdrive {

// Every error the library raises derives from Error so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define OPTDRIVE_ERROR(Name)                 \
    struct Name : Error {                    \
        explicit Name(const std::string& m)  \
            : Error(#Name ": " + m) {}       \
    }

OPTDRIVE_ERROR(AmbiguousProjection);
OPTDRIVE_ERROR(OutOfRoad);
OPTDRIVE_ERROR(NonFiniteInput);
OPTDRIVE_ERROR(NonPositiveGap);
OPTDRIVE_ERROR(DensityInfeasible);
OPTDRIVE_ERROR(EpisodeFinished);
OPTDRIVE_ERROR(BoundsInverted);
OPTDRIVE_ERROR(ShapeMismatch);
OPTDRIVE_ERROR(NonFiniteGradient);
OPTDRIVE_ERROR(EmptyBatch);
OPTDRIVE_ERROR(ConfigInvalid);
OPTDRIVE_ERROR(NoEligibleCheckpoint);
OPTDRIVE_ERROR(IncompatibleCheckpoint);
OPTDRIVE_ERROR(NotAnOptionAgent);

#undef OPTDRIVE_ERROR

}  // namespace optdrive
