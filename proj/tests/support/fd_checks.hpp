#pragma once

// Finite-difference oracles for the sensitivity recursions. The documented
// probe uses central differences; errors are normalized per parameter column
// by the column's largest magnitude over the trajectory (the transverse x
// channel is identically ~0 under zero RF phase, so a per-component relative
// error would divide rounding noise by itself).

#include <vector>

#include "mrf/bloch.hpp"
#include "mrf/types.hpp"

namespace mrf::testing {

inline std::vector<Matrix23<double>> finite_difference_jacobians(
    const AcqSchedule& schedule, const TissueParams& theta,
    const IsochromatEnsemble& ensemble, const Eigen::Vector3d& steps) {
    std::vector<Matrix23<double>> out(static_cast<std::size_t>(schedule.size()));
    for (int p = 0; p < 3; ++p) {
        TissueParams up = theta, down = theta;
        double* fields_up[3] = {&up.t1, &up.t2, &up.m0};
        double* fields_down[3] = {&down.t1, &down.t2, &down.m0};
        *fields_up[p] += steps[p];
        *fields_down[p] -= steps[p];
        const auto hi = simulate(schedule, up, ensemble);
        const auto lo = simulate(schedule, down, ensemble);
        for (Eigen::Index i = 0; i < schedule.size(); ++i)
            out[static_cast<std::size_t>(i)].col(p) =
                (hi.samples.col(i) - lo.samples.col(i)) / (2.0 * steps[p]);
    }
    return out;
}

inline Eigen::Vector3d column_errors(const SensitivityTrajectory& sens,
                                     const std::vector<Matrix23<double>>& reference) {
    Eigen::Vector3d max_abs = Eigen::Vector3d::Zero();
    Eigen::Vector3d max_err = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < sens.jacobians.size(); ++i)
        for (int p = 0; p < 3; ++p) {
            max_abs[p] = std::max(max_abs[p], reference[i].col(p).cwiseAbs().maxCoeff());
            max_err[p] = std::max(max_err[p],
                                  (sens.jacobians[i].col(p) - reference[i].col(p))
                                      .cwiseAbs()
                                      .maxCoeff());
        }
    return max_err.cwiseQuotient(max_abs);
}

} // namespace mrf::testing
