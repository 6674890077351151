#pragma once

#include <stdexcept>
#include <string>

namespace gaze {

/// Base class for all gazekit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct ZeroVectorError : Error { using Error::Error; };
struct ParallelRayError : Error { using Error::Error; };
struct BehindOriginError : Error { using Error::Error; };
struct OffPlaneError : Error { using Error::Error; };
struct InvalidExtrinsicsError : Error { using Error::Error; };

// normalization
struct DegenerateError : Error { using Error::Error; };
struct DegenerateRollError : Error { using Error::Error; };
struct NoConvergenceError : Error { using Error::Error; };
struct SingularWarpError : Error { using Error::Error; };
struct GimbalLockError : Error { using Error::Error; };

// depthproc
struct EmptyTableError : Error { using Error::Error; };
struct EmptyMaskError : Error { using Error::Error; };

// fusion
struct ShapeMismatchError : Error { using Error::Error; };
struct TokenCountMismatchError : Error { using Error::Error; };
struct EmptyDatasetError : Error { using Error::Error; };

// subject calibration
struct TooFewSamplesError : Error { using Error::Error; };
struct EmptySamplesError : Error { using Error::Error; };

// mirror calibration
struct BoardOffScreenError : Error { using Error::Error; };
struct BehindCameraError : Error { using Error::Error; };
struct TooFewPosesError : Error { using Error::Error; };

// filtering
struct BadConfigError : Error { using Error::Error; };

// dataset / IO
struct SchemaError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace gaze
