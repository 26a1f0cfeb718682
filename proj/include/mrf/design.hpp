#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mrf/types.hpp"

// Weighted A-optimality schedule design: minimize sum_l tr(W V(theta_l)) over
// flip angles and repetition times under box bounds and, optionally, a cap on
// the flip-angle variation between consecutive repetitions.

namespace mrf {

struct DesignConfig {
    std::vector<TissueParams> tissues;
    Eigen::Vector3d weights = Eigen::Vector3d::Zero(); ///< diagonal of W
    double sigma = 0.0;                                ///< noise std per channel
    Eigen::Index n = 0;                                ///< schedule length

    double tr_min = 0.0, tr_max = 0.0;      ///< ms
    double alpha_min = 0.0;                 ///< rad
    double alpha_max_first = 0.0;           ///< rad, first pulse only
    double alpha_max_rest = 0.0;            ///< rad
    double delta_alpha_max =
        std::numeric_limits<double>::infinity(); ///< rad; inf disables the variation cap

    Eigen::Index nv_design = 40; ///< isochromats inside the optimizer
    double tol = 1e-4;           ///< max |change| in rad / ms between accepted iterates
    Eigen::Index max_iter = 50000;
    unsigned threads = 0; ///< 0 = hardware concurrency

    void validate() const;
};

/// The §III-A.2 configuration: three representative tissues,
/// W = diag(2e-5, 5e-4, 30), SNR 33 dB referenced to M0 = 0.6,
/// TR in [11, 15] ms, flips in [10, 60] degrees (180 for the first pulse).
/// The variation cap defaults to off (Optimized-I); set delta_alpha_max to
/// 1 degree for Optimized-II.
DesignConfig default_design_config(Eigen::Index n);

struct ConstraintViolation {
    enum class Kind { TrBound, AlphaBound, AlphaVariation };
    Kind kind;
    Eigen::Index index; ///< 1-based TR index (or pair index n for |a_{n+1} - a_n|)
    double value;
    double lo, hi;

    std::string describe() const;
};

struct DesignResult {
    AcqSchedule schedule;
    std::vector<double> cost_history; ///< accepted (feasible) costs, nonincreasing
    Eigen::MatrixXd per_tissue_ncrb;  ///< L x 3, at nv_design fidelity
    Eigen::Index iterations = 0;
    bool converged = false;
};

/// sum_l tr(W V(theta_l)) evaluated with nv_design isochromats; +infinity
/// when any tissue's information matrix is singular (infeasible design).
double design_cost(const AcqSchedule& schedule, const DesignConfig& config);

/// Empty iff the schedule satisfies the TR bounds, the flip bounds (with the
/// first-pulse exception) and the variation cap |a_{n+1} - a_n| for
/// 2 <= n <= N-1. The pair (a_1, a_2) is never constrained.
std::vector<ConstraintViolation> check_constraints(const AcqSchedule& schedule,
                                                   const DesignConfig& config);

/// Central finite-difference gradient of design_cost with respect to the free
/// variables [alpha_2..alpha_N, TR_1..TR_N] (alpha_1 stays pinned), using
/// steps of 1e-4 rad for flips and 1e-3 ms for TRs. Falls back to one-sided
/// differences where a step would leave the box bounds. Entries are evaluated
/// independently and in parallel.
Eigen::VectorXd cost_gradient(const AcqSchedule& schedule, const DesignConfig& config,
                              double cost_at_schedule);
Eigen::VectorXd cost_gradient(const AcqSchedule& schedule, const DesignConfig& config);

/// Projected spectral-gradient descent over the feasible set. Every accepted
/// iterate is feasible and the cost history is nonincreasing; terminates when
/// the iterate change drops below config.tol (converged) or at max_iter.
/// Deterministic for a fixed (config, init).
DesignResult optimize(const DesignConfig& config, const AcqSchedule& init);

} // namespace mrf
