#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "mrf/errors.hpp"
#include "mrf/types.hpp"

// Per-TR evolution matrices of the IR-FISP spin model and their closed-form
// parameter derivatives. All free functions, templated on the scalar type.

namespace mrf {

/// RF excitation matrix Q(alpha, phi): rotation by the flip angle about an
/// axis at phase phi in the transverse plane, composed as
/// Rz(-phi) * Rx(alpha) * Rz(phi).
template <typename Scalar>
Matrix3<Scalar> rf_rotation(Scalar alpha, Scalar phi) {
    using std::cos;
    using std::sin;
    const Scalar ca = cos(alpha), sa = sin(alpha);
    const Scalar cp = cos(phi), sp = sin(phi);
    Matrix3<Scalar> rz_m, rx, rz_p;
    rz_m << cp, sp, Scalar(0), -sp, cp, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
    rx << Scalar(1), Scalar(0), Scalar(0), Scalar(0), ca, sa, Scalar(0), -sa, ca;
    rz_p << cp, -sp, Scalar(0), sp, cp, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
    return rz_m * rx * rz_p;
}

/// Relaxation over an interval t: diag(e^{-t/T2}, e^{-t/T2}, e^{-t/T1}).
template <typename Scalar>
Matrix3<Scalar> relaxation(Scalar t1, Scalar t2, Scalar t) {
    using std::exp;
    if (!(t1 > Scalar(0)) || !(t2 > Scalar(0)))
        throw ValidationError("relaxation: t1 and t2 must be positive");
    if (t < Scalar(0))
        throw ValidationError("relaxation: negative interval");
    Matrix3<Scalar> r = Matrix3<Scalar>::Zero();
    const Scalar e2 = exp(-t / t2);
    r(0, 0) = e2;
    r(1, 1) = e2;
    r(2, 2) = exp(-t / t1);
    return r;
}

/// Spoiler dephasing G(beta): z-rotation by -beta on the transverse plane.
template <typename Scalar>
Matrix3<Scalar> dephasing(Scalar beta) {
    using std::cos;
    using std::sin;
    const Scalar cb = cos(beta), sb = sin(beta);
    Matrix3<Scalar> g;
    g << cb, sb, Scalar(0), -sb, cb, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
    return g;
}

/// Longitudinal recovery input b(T1, t) = [0, 0, 1 - e^{-t/T1}].
template <typename Scalar>
Vector3<Scalar> recovery(Scalar t1, Scalar t) {
    using std::exp;
    return Vector3<Scalar>(Scalar(0), Scalar(0), Scalar(1) - exp(-t / t1));
}

/// Closed-form derivatives of the relaxation and recovery terms over an
/// interval t, used by the sensitivity recursions.
template <typename Scalar>
struct RelaxationDerivatives {
    Matrix3<Scalar> dr_dt1; ///< (t/T1^2) e^{-t/T1} * E33
    Matrix3<Scalar> dr_dt2; ///< (t/T2^2) e^{-t/T2} * diag(1,1,0)
    Vector3<Scalar> db_dt1; ///< -(t/T1^2) e^{-t/T1} * e3
};

template <typename Scalar>
RelaxationDerivatives<Scalar> matrix_derivatives(const TissueParams& theta, Scalar t) {
    using std::exp;
    if (!(theta.t1 > 0.0) || !(theta.t2 > 0.0))
        throw ValidationError("matrix_derivatives: t1 and t2 must be positive");
    if (t < Scalar(0))
        throw ValidationError("matrix_derivatives: negative interval");
    const Scalar t1 = Scalar(theta.t1), t2 = Scalar(theta.t2);
    const Scalar k1 = t / (t1 * t1) * exp(-t / t1);
    const Scalar k2 = t / (t2 * t2) * exp(-t / t2);
    RelaxationDerivatives<Scalar> d;
    d.dr_dt1 = Matrix3<Scalar>::Zero();
    d.dr_dt1(2, 2) = k1;
    d.dr_dt2 = Matrix3<Scalar>::Zero();
    d.dr_dt2(0, 0) = k2;
    d.dr_dt2(1, 1) = k2;
    d.db_dt1 = Vector3<Scalar>(Scalar(0), Scalar(0), -k1);
    return d;
}

} // namespace mrf
