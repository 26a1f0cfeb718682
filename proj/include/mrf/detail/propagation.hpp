#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mrf/rotations.hpp"
#include "mrf/types.hpp"

// Fused propagation of the isochromat bank: per repetition, every isochromat
// carries its magnetization state and (optionally) the three sensitivity
// states dM/dT1, dM/dT2, dM/dM0, advanced together so the per-step matrices
// are shared. The voxel signal and Jacobian at echo n are assembled from the
// pre-pulse states M_r[n-1], matching the observation equation.

namespace mrf::detail {

/// Column sum with pairwise (tree) accumulation, so the result is stable
/// under permutations of the isochromat ordering.
template <typename Scalar>
Vector3<Scalar> pairwise_colsum(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& x,
                                Eigen::Index lo, Eigen::Index hi) {
    if (hi - lo <= 8) {
        Vector3<Scalar> s = Vector3<Scalar>::Zero();
        for (Eigen::Index c = lo; c < hi; ++c)
            s += x.col(c);
        return s;
    }
    const Eigen::Index mid = lo + (hi - lo) / 2;
    return pairwise_colsum(x, lo, mid) + pairwise_colsum(x, mid, hi);
}

template <typename Scalar>
Vector3<Scalar> pairwise_colsum(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& x) {
    return pairwise_colsum(x, 0, x.cols());
}

template <typename Scalar>
struct BankWorkspace {
    using Bank = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
    using Row = Eigen::Array<Scalar, 1, Eigen::Dynamic>;

    Bank m, s1, s2, s3;    // states and sensitivities, one column per isochromat
    Bank w, v1, v2, v3;    // post-pulse scratch
    Row cos_b, sin_b, tmp; // dephasing terms
    Row gx, gy;            // transverse components entering the spoiler rotation

    void resize(Eigen::Index nv) {
        for (Bank* b : {&m, &s1, &s2, &s3, &w, &v1, &v2, &v3})
            b->resize(3, nv);
        for (Row* r : {&cos_b, &sin_b, &tmp, &gx, &gy})
            r->resize(nv);
    }
};

/// Runs the state(/sensitivity) recursion for one tissue over a schedule.
///
/// signal   : 2 x N, column n-1 holds m[n]
/// jacobians: if non-null, filled with N Jacobians d m[n] / d (T1,T2,M0)
template <typename Scalar, bool WithSens>
void propagate_bank(const AcqSchedule& schedule, Scalar t1, Scalar t2, Scalar m0,
                    const Eigen::ArrayXd& betas,
                    Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& signal,
                    std::vector<Matrix23<Scalar>>* jacobians,
                    BankWorkspace<Scalar>& ws) {
    using std::cos;
    using std::exp;
    using std::sin;

    const Eigen::Index n = schedule.size();
    const Eigen::Index nv = betas.size();
    const Scalar inv_nv = Scalar(1) / Scalar(nv);
    const Scalar m0_nv = m0 * inv_nv;

    ws.resize(nv);
    ws.cos_b = betas.cast<Scalar>().cos().transpose();
    ws.sin_b = betas.cast<Scalar>().sin().transpose();

    // Thermal equilibrium: M_r[0] = [0, 0, M0/Nv]; dM/dM0 = [0, 0, 1/Nv].
    ws.m.setZero();
    ws.m.row(2).setConstant(m0_nv);
    if constexpr (WithSens) {
        ws.s1.setZero();
        ws.s2.setZero();
        ws.s3.setZero();
        ws.s3.row(2).setConstant(inv_nv);
        jacobians->resize(static_cast<std::size_t>(n));
    }

    signal.resize(2, n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const AcqParams& u = schedule.entries[static_cast<std::size_t>(i)];
        const Scalar tr = Scalar(u.tr), te = Scalar(u.te);
        const Matrix3<Scalar> q = rf_rotation<Scalar>(Scalar(u.alpha), Scalar(u.phi));

        const Scalar e_tr2 = exp(-tr / t2), e_tr1 = exp(-tr / t1);
        const Scalar e_te2 = exp(-te / t2);
        const Scalar k_tr1 = tr / (t1 * t1) * e_tr1; // d e^{-tr/T1} / dT1
        const Scalar k_tr2 = tr / (t2 * t2) * e_tr2;
        const Scalar k_te2 = te / (t2 * t2) * e_te2;

        // Observation at echo n from the pre-pulse states: m[n] = P R(TE) Q sum_r M_r[n-1].
        // Only the transverse rows survive P, and d R(TE)/dT1 projects to zero.
        const Vector3<Scalar> y = q * pairwise_colsum(ws.m);
        signal.col(i) = e_te2 * y.template head<2>();
        if constexpr (WithSens) {
            const Vector3<Scalar> y1 = q * pairwise_colsum(ws.s1);
            const Vector3<Scalar> y2 = q * pairwise_colsum(ws.s2);
            const Vector3<Scalar> y3 = q * pairwise_colsum(ws.s3);
            Matrix23<Scalar>& jac = (*jacobians)[static_cast<std::size_t>(i)];
            jac.col(0) = e_te2 * y1.template head<2>();
            jac.col(1) = e_te2 * y2.template head<2>() + k_te2 * y.template head<2>();
            jac.col(2) = e_te2 * y3.template head<2>();
        }

        // State update M_r[n] = G_r R(TR) Q M_r[n-1] + (M0/Nv) b(T1, TR),
        // with the sensitivity recursions sharing W = Q M_r[n-1].
        ws.w.noalias() = q * ws.m;
        if constexpr (WithSens) {
            ws.v1.noalias() = q * ws.s1;
            ws.v2.noalias() = q * ws.s2;
            ws.v3.noalias() = q * ws.s3;
        }

        auto spoil = [&](Eigen::Array<Scalar, 1, Eigen::Dynamic>& x,
                         Eigen::Array<Scalar, 1, Eigen::Dynamic>& y_) {
            ws.tmp = ws.cos_b * x + ws.sin_b * y_;
            y_ = -ws.sin_b * x + ws.cos_b * y_;
            x = ws.tmp;
        };

        ws.gx = e_tr2 * ws.w.row(0).array();
        ws.gy = e_tr2 * ws.w.row(1).array();
        spoil(ws.gx, ws.gy);
        ws.m.row(0) = ws.gx;
        ws.m.row(1) = ws.gy;
        ws.m.row(2) = e_tr1 * ws.w.row(2).array() + m0_nv * (Scalar(1) - e_tr1);

        if constexpr (WithSens) {
            ws.gx = e_tr2 * ws.v1.row(0).array();
            ws.gy = e_tr2 * ws.v1.row(1).array();
            spoil(ws.gx, ws.gy);
            ws.s1.row(0) = ws.gx;
            ws.s1.row(1) = ws.gy;
            ws.s1.row(2) =
                e_tr1 * ws.v1.row(2).array() + k_tr1 * ws.w.row(2).array() - m0_nv * k_tr1;

            ws.gx = e_tr2 * ws.v2.row(0).array() + k_tr2 * ws.w.row(0).array();
            ws.gy = e_tr2 * ws.v2.row(1).array() + k_tr2 * ws.w.row(1).array();
            spoil(ws.gx, ws.gy);
            ws.s2.row(0) = ws.gx;
            ws.s2.row(1) = ws.gy;
            ws.s2.row(2) = e_tr1 * ws.v2.row(2).array();

            ws.gx = e_tr2 * ws.v3.row(0).array();
            ws.gy = e_tr2 * ws.v3.row(1).array();
            spoil(ws.gx, ws.gy);
            ws.s3.row(0) = ws.gx;
            ws.s3.row(1) = ws.gy;
            ws.s3.row(2) = e_tr1 * ws.v3.row(2).array() + inv_nv * (Scalar(1) - e_tr1);
        }
    }
}

} // namespace mrf::detail
