#pragma once

#include <stdexcept>
#include <string>

namespace mrf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid inputs (non-positive relaxation times, malformed schedules, bad config).
struct ValidationError : Error {
    using Error::Error;
};

/// The Fisher information matrix is singular or too ill-conditioned to invert.
/// Signals an unidentifiable design (e.g. a schedule with zero flip angles).
struct SingularInformation : Error {
    using Error::Error;
};

/// A dictionary atom produced a (numerically) zero trajectory.
struct DegenerateAtom : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace mrf
