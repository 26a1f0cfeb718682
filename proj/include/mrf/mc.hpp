#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrf/dictionary.hpp"
#include "mrf/types.hpp"

// Gaussian noise injection for the single-voxel data model, Monte Carlo
// estimator evaluation with normalized bias/std/RMSE metrics, and the
// normalized-CRB sweep over acquisition lengths.

namespace mrf {

/// i.i.d. zero-mean Gaussian noise, std sigma per real channel. Trial t uses
/// the stream derive_stream_seed(seed, t).
struct NoiseModel {
    double sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sigma > 0.0))
            throw ValidationError("NoiseModel: sigma must be positive");
    }
};

/// Normalized Monte Carlo metrics per parameter (T1, T2, M0).
/// nrmse^2 = nbias^2 + nstd^2 holds exactly (population averages throughout).
/// nmae is the mean-absolute-error reading of the bias formula, reported
/// alongside the decomposition-consistent nbias.
struct McResult {
    Eigen::Vector3d nbias = Eigen::Vector3d::Zero();
    Eigen::Vector3d nstd = Eigen::Vector3d::Zero();
    Eigen::Vector3d nrmse = Eigen::Vector3d::Zero();
    Eigen::Vector3d nmae = Eigen::Vector3d::Zero();
    Eigen::Vector3d empirical_std_over_crb = Eigen::Vector3d::Zero();
    Eigen::Index trials = 0;
};

/// sigma = s_ref * 10^(-snr_db/20), the SNR definition in decibels.
double snr_to_sigma(double snr_db, double s_ref);

/// Adds seeded Gaussian noise to each of the 2N real channels, in the
/// flattened trajectory order.
SignalTrajectory add_noise(const SignalTrajectory& signal, const NoiseModel& noise);

/// Simulates the clean signal once, runs `trials` noisy matches against the
/// dictionary, and assembles the normalized metrics. empirical_std_over_crb
/// compares each parameter's empirical std against sqrt(CRB_ii) computed at
/// the same sigma and ensemble.
McResult run_mc(const AcqSchedule& schedule, const TissueParams& theta_true,
                const NoiseModel& noise, const Dictionary& dict,
                const IsochromatEnsemble& ensemble, Eigen::Index trials,
                unsigned threads = 0);

struct NcrbRow {
    std::string label;
    Eigen::Index n = 0;
    Eigen::Vector3d ncrb = Eigen::Vector3d::Zero();
};

/// One nCRB row per schedule, for acquisition-length sweeps.
std::vector<NcrbRow> sweep_ncrb(const std::vector<std::pair<std::string, AcqSchedule>>& schedules,
                                const TissueParams& theta, double sigma,
                                const IsochromatEnsemble& ensemble);

/// Euclidean-norm relative error ||true - est|| / ||true||.
double overall_error(const Eigen::VectorXd& true_vals, const Eigen::VectorXd& est_vals);

} // namespace mrf
