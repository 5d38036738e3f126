#pragma once

#include <stdexcept>
#include <string>

namespace terra {

#define TERRA_DEFINE_ERROR(Name)                          \
    struct Name : std::runtime_error {                    \
        using std::runtime_error::runtime_error;          \
    }

// geometry
TERRA_DEFINE_ERROR(FrameMismatch);
TERRA_DEFINE_ERROR(BehindCamera);
TERRA_DEFINE_ERROR(NoGroundIntersection);
TERRA_DEFINE_ERROR(DegenerateMarker);
TERRA_DEFINE_ERROR(InsufficientCoverage);

// signals
TERRA_DEFINE_ERROR(TooFewSamples);
TERRA_DEFINE_ERROR(WindowOutOfRange);
TERRA_DEFINE_ERROR(OutOfSupport);

// dataset
TERRA_DEFINE_ERROR(DegenerateRange);
TERRA_DEFINE_ERROR(TooFewRecords);
TERRA_DEFINE_ERROR(NoViews);

// predictor
TERRA_DEFINE_ERROR(BadPatchShape);
TERRA_DEFINE_ERROR(SchemaMismatch);
TERRA_DEFINE_ERROR(NonFiniteLoss);

// mapping / planner
TERRA_DEFINE_ERROR(EmptyMap);
TERRA_DEFINE_ERROR(NoPath);
TERRA_DEFINE_ERROR(UnobservedEndpoint);

// simkit
TERRA_DEFINE_ERROR(PathOutOfScene);

// i/o
TERRA_DEFINE_ERROR(IoError);
TERRA_DEFINE_ERROR(ConfigError);

#undef TERRA_DEFINE_ERROR

}  // namespace terra
