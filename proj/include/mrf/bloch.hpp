#pragma once

#include <cstdint>

#include "mrf/types.hpp"

// Discrete-time IR-FISP spin simulation with isochromat summation.

namespace mrf {

/// Default echo time (ms), well inside the minimum repetition time.
inline constexpr double kDefaultTeMs = 2.0;

/// Advance one isochromat by one repetition:
/// M' = G(beta) R(T1,T2,TR) Q(alpha,phi) M + (M0/Nv) b(T1,TR).
MagState step(const MagState& state, const AcqParams& u, const TissueParams& theta,
              double beta, Eigen::Index nv);

/// Simulate the voxel transverse magnetization over a schedule. The echo at
/// index n observes the pre-pulse states M_r[n-1]; the spoiler acts only in
/// the state update (it sits after the echo within each TR).
SignalTrajectory simulate(const AcqSchedule& schedule, const TissueParams& theta,
                          const IsochromatEnsemble& ensemble);

/// A conventional-style MRF train: a 180 degree inversion pulse first, then
/// sinusoidal flip-angle lobes in [10, 60] degrees with pseudo-random
/// per-lobe peaks, and repetition times drawn uniformly from [11, 15] ms.
/// Deterministic for a fixed (n, seed). Echo times are fixed at kDefaultTeMs
/// and RF phases at zero.
AcqSchedule conventional_schedule(Eigen::Index n, std::uint64_t seed);

} // namespace mrf
