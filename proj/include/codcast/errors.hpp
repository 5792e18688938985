#pragma once

#include <stdexcept>
#include <string>

namespace codcast {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CODCAST_DECLARE_ERROR(Name)                 \
    class Name : public Error {                     \
    public:                                         \
        using Error::Error;                         \
    };

// geo
CODCAST_DECLARE_ERROR(PoleError)
// codio
CODCAST_DECLARE_ERROR(FormatError)
CODCAST_DECLARE_ERROR(DimensionError)
CODCAST_DECLARE_ERROR(IOError)
// shared shape checks
CODCAST_DECLARE_ERROR(ShapeMismatch)
CODCAST_DECLARE_ERROR(DomainMismatch)
// preprocess
CODCAST_DECLARE_ERROR(NonPositiveSigma)
CODCAST_DECLARE_ERROR(EmptyGrid)
CODCAST_DECLARE_ERROR(ZeroMedian)
// optflow
CODCAST_DECLARE_ERROR(TooSmall)
// spectral / assimilate
CODCAST_DECLARE_ERROR(SingularSystem)
CODCAST_DECLARE_ERROR(InvalidConfig)
// dgadvect
CODCAST_DECLARE_ERROR(InvalidOrder)
CODCAST_DECLARE_ERROR(BlowUp)
// pipeline
CODCAST_DECLARE_ERROR(UnknownScenario)
CODCAST_DECLARE_ERROR(ZeroDenominator)
CODCAST_DECLARE_ERROR(AlignmentError)
CODCAST_DECLARE_ERROR(UsageError)

#undef CODCAST_DECLARE_ERROR

} // namespace codcast
