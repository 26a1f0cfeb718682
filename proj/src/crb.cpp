#include "mrf/crb.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "mrf/detail/propagation.hpp"

namespace mrf {

std::pair<SignalTrajectory, SensitivityTrajectory>
sensitivity_trajectory(const AcqSchedule& schedule, const TissueParams& theta,
                       const IsochromatEnsemble& ensemble) {
    schedule.validate();
    theta.validate();
    ensemble.validate();
    SignalTrajectory signal;
    SensitivityTrajectory sens;
    detail::BankWorkspace<double> ws;
    detail::propagate_bank<double, true>(schedule, theta.t1, theta.t2, theta.m0,
                                         ensemble.betas, signal.samples,
                                         &sens.jacobians, ws);
    return {std::move(signal), std::move(sens)};
}

FisherMatrix fisher(const SensitivityTrajectory& sens, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ValidationError("fisher: sigma must be positive");
    Matrix3<double> acc = Matrix3<double>::Zero();
    for (const auto& jac : sens.jacobians)
        acc.noalias() += jac.transpose() * jac;
    return FisherMatrix{acc / (sigma * sigma), sigma};
}

CrbReport crb(const FisherMatrix& fim, const TissueParams& theta) {
    theta.validate();
    if (!fim.matrix.allFinite())
        throw ValidationError("crb: non-finite information matrix");

    Eigen::SelfAdjointEigenSolver<Matrix3<double>> eig(fim.matrix);
    if (eig.info() != Eigen::Success)
        throw SingularInformation("crb: eigendecomposition failed");

    const Eigen::Vector3d evals = eig.eigenvalues();
    const double lmax = evals.maxCoeff(), lmin = evals.minCoeff();
    if (!(lmin > 0.0) || lmax / lmin > kMaxFisherCondition)
        throw SingularInformation("crb: information matrix singular or ill-conditioned");

    CrbReport report;
    report.crb_matrix = eig.eigenvectors() *
                        evals.cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
    const Eigen::Vector3d params(theta.t1, theta.t2, theta.m0);
    report.ncrb = report.crb_matrix.diagonal().cwiseSqrt().cwiseQuotient(params);
    report.condition_number = lmax / lmin;
    return report;
}

} // namespace mrf
