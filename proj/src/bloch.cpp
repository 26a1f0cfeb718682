#include "mrf/bloch.hpp"

#include "mrf/detail/propagation.hpp"
#include "mrf/rng.hpp"
#include "mrf/rotations.hpp"

namespace mrf {

MagState step(const MagState& state, const AcqParams& u, const TissueParams& theta,
              double beta, Eigen::Index nv) {
    theta.validate();
    u.validate();
    if (nv < 1)
        throw ValidationError("step: nv must be >= 1");
    const Matrix3<double> a = dephasing(beta) * relaxation(theta.t1, theta.t2, u.tr) *
                              rf_rotation(u.alpha, u.phi);
    MagState out;
    out.components = a * state.components +
                     (theta.m0 / static_cast<double>(nv)) * recovery(theta.t1, u.tr);
    return out;
}

SignalTrajectory simulate(const AcqSchedule& schedule, const TissueParams& theta,
                          const IsochromatEnsemble& ensemble) {
    schedule.validate();
    theta.validate();
    ensemble.validate();
    SignalTrajectory out;
    detail::BankWorkspace<double> ws;
    detail::propagate_bank<double, false>(schedule, theta.t1, theta.t2, theta.m0,
                                          ensemble.betas, out.samples, nullptr, ws);
    return out;
}

AcqSchedule conventional_schedule(Eigen::Index n, std::uint64_t seed) {
    if (n < 2)
        throw ValidationError("conventional_schedule: need n >= 2");

    constexpr double kDeg = M_PI / 180.0;
    constexpr Eigen::Index kLobeLength = 250;
    constexpr double kTrMin = 11.0, kTrMax = 15.0;
    constexpr double kFlipFloor = 10.0; // deg

    SplitMix64 rng(seed);
    AcqSchedule schedule;
    schedule.entries.reserve(static_cast<std::size_t>(n));

    // Inversion pulse; its TR is drawn like all the others.
    schedule.entries.push_back(
        {M_PI, 0.0, kDefaultTeMs, kTrMin + (kTrMax - kTrMin) * rng.next_double()});

    double lobe_peak = 0.0;
    for (Eigen::Index i = 1; i < n; ++i) {
        const Eigen::Index p = (i - 1) % kLobeLength;
        if (p == 0)
            lobe_peak = 25.0 + 35.0 * rng.next_double(); // deg, in (25, 60)
        const double arc = M_PI * (static_cast<double>(p) + 0.5) /
                           static_cast<double>(kLobeLength);
        const double flip_deg = kFlipFloor + (lobe_peak - kFlipFloor) * std::sin(arc);
        const double tr = kTrMin + (kTrMax - kTrMin) * rng.next_double();
        schedule.entries.push_back({flip_deg * kDeg, 0.0, kDefaultTeMs, tr});
    }
    return schedule;
}

} // namespace mrf
