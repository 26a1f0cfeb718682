#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mrf/errors.hpp"

namespace mrf {

template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix23 = Eigen::Matrix<Scalar, 2, 3>;

/// Tissue parameter vector (T1, T2, M0). Times in ms, M0 dimensionless.
struct TissueParams {
    double t1 = 0.0;
    double t2 = 0.0;
    double m0 = 0.0;

    void validate() const {
        if (!(std::isfinite(t1) && std::isfinite(t2) && std::isfinite(m0)))
            throw ValidationError("TissueParams: non-finite value");
        if (!(t1 > 0.0 && t2 > 0.0 && m0 > 0.0))
            throw ValidationError("TissueParams: t1, t2, m0 must be positive");
    }
};

/// Acquisition parameters for one repetition: flip angle and RF phase in
/// radians, echo and repetition time in ms.
struct AcqParams {
    double alpha = 0.0;
    double phi = 0.0;
    double te = 0.0;
    double tr = 0.0;

    void validate() const {
        if (!(std::isfinite(alpha) && std::isfinite(phi) && std::isfinite(te) &&
              std::isfinite(tr)))
            throw ValidationError("AcqParams: non-finite value");
        if (!(te > 0.0 && te < tr))
            throw ValidationError("AcqParams: require 0 < te < tr");
    }
};

/// An acquisition schedule: the per-TR parameters for the whole experiment.
struct AcqSchedule {
    std::vector<AcqParams> entries;

    Eigen::Index size() const { return static_cast<Eigen::Index>(entries.size()); }

    void validate() const {
        if (entries.empty())
            throw ValidationError("AcqSchedule: empty schedule");
        for (const auto& e : entries)
            e.validate();
    }
};

/// Intra-voxel dephasing angles, one per isochromat (radians).
struct IsochromatEnsemble {
    Eigen::ArrayXd betas;

    Eigen::Index size() const { return betas.size(); }

    void validate() const {
        if (betas.size() < 1)
            throw ValidationError("IsochromatEnsemble: need at least one isochromat");
        if (!betas.isFinite().all())
            throw ValidationError("IsochromatEnsemble: non-finite dephasing angle");
    }
};

/// Uniformly spaced dephasing angles covering one full spoiler cycle,
/// beta_r = -pi + 2*pi*(r - 1/2)/nv for r = 1..nv (symmetric about zero).
inline IsochromatEnsemble uniform_ensemble(Eigen::Index nv) {
    if (nv < 1)
        throw ValidationError("uniform_ensemble: nv must be >= 1");
    Eigen::ArrayXd betas(nv);
    for (Eigen::Index r = 0; r < nv; ++r)
        betas[r] = -M_PI + 2.0 * M_PI * (static_cast<double>(r) + 0.5) / static_cast<double>(nv);
    return IsochromatEnsemble{std::move(betas)};
}

/// Magnetization state of one isochromat, (Mx, My, Mz).
struct MagState {
    Eigen::Vector3d components = Eigen::Vector3d::Zero();
};

/// Voxel transverse magnetization at the echo times: column n is
/// (mx[n], my[n]).
struct SignalTrajectory {
    Eigen::Matrix2Xd samples;

    Eigen::Index size() const { return samples.cols(); }
};

/// Per-echo Jacobians d m[n] / d (T1, T2, M0), each 2x3.
struct SensitivityTrajectory {
    std::vector<Matrix23<double>> jacobians;

    Eigen::Index size() const { return static_cast<Eigen::Index>(jacobians.size()); }
};

} // namespace mrf
