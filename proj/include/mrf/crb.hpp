#pragma once

#include <utility>

#include "mrf/rotations.hpp"
#include "mrf/types.hpp"

// Exact sensitivity propagation, Fisher information assembly and Cramer-Rao
// bound reporting for the single-voxel Gaussian data model.

namespace mrf {

/// Fisher information for the additive-Gaussian observation model,
/// I = (1/sigma^2) sum_n Jn' Jn over the two real signal channels.
struct FisherMatrix {
    Matrix3<double> matrix = Matrix3<double>::Zero();
    double sigma = 0.0;
};

struct CrbReport {
    Matrix3<double> crb_matrix = Matrix3<double>::Zero(); ///< inverse information
    Eigen::Vector3d ncrb = Eigen::Vector3d::Zero();       ///< sqrt(V_ii)/theta_i
    double condition_number = 0.0;                        ///< of the information matrix
};

/// Fisher matrices above this condition number are treated as singular.
inline constexpr double kMaxFisherCondition = 1e14;

/// Jointly propagates each isochromat's state and the three sensitivity
/// states, returning the signal and the per-echo Jacobians d m[n]/d theta.
/// The dM0 column equals the unit-M0 trajectory (the model is linear in M0).
std::pair<SignalTrajectory, SensitivityTrajectory>
sensitivity_trajectory(const AcqSchedule& schedule, const TissueParams& theta,
                       const IsochromatEnsemble& ensemble);

FisherMatrix fisher(const SensitivityTrajectory& sens, double sigma);

/// Inverts the information matrix through a symmetric eigendecomposition.
/// Throws SingularInformation when the design is unidentifiable (condition
/// number above kMaxFisherCondition or a non-positive eigenvalue).
CrbReport crb(const FisherMatrix& fim, const TissueParams& theta);

} // namespace mrf
