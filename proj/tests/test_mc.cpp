#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mrf/bloch.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/mc.hpp"
#include "mrf/rng.hpp"

using namespace mrf;

namespace {
Dictionary local_dictionary(const AcqSchedule& schedule, const IsochromatEnsemble& ensemble) {
    GridSpec spec;
    spec.t1_segments = {{680.0, 720.0, 5.0}};
    spec.t2_segments = {{55.0, 65.0, 1.0}};
    return generate(schedule, build_grid(spec), ensemble);
}
} // namespace

TEST_CASE("snr_to_sigma") {
    CHECK(snr_to_sigma(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(snr_to_sigma(20.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
    // 33 dB against the white-matter M0 scale of 0.6
    CHECK(snr_to_sigma(33.0, 0.6) == doctest::Approx(0.01343232683141004).epsilon(1e-14));
    CHECK_THROWS_AS(snr_to_sigma(33.0, 0.0), ValidationError);
    CHECK_THROWS_AS(snr_to_sigma(33.0, -1.0), ValidationError);
}

TEST_CASE("add_noise: vanishing sigma leaves the signal unchanged") {
    const auto schedule = conventional_schedule(40, 2);
    const auto clean = simulate(schedule, {700, 60, 0.6}, uniform_ensemble(8));
    const auto noisy = add_noise(clean, {1e-300, 77});
    CHECK((noisy.samples - clean.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("add_noise: deterministic per seed, different across seeds") {
    const auto schedule = conventional_schedule(40, 2);
    const auto clean = simulate(schedule, {700, 60, 0.6}, uniform_ensemble(8));
    const auto a = add_noise(clean, {0.01, 123});
    const auto b = add_noise(clean, {0.01, 123});
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
    const auto c = add_noise(clean, {0.01, 124});
    CHECK((a.samples - c.samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("add_noise: empirical std matches sigma over many samples") {
    SignalTrajectory zero;
    zero.samples.setZero(2, 50000); // 1e5 channels
    const double sigma = 0.5;
    const auto noisy = add_noise(zero, {sigma, 2718});
    const Eigen::ArrayXXd z = noisy.samples.array();
    const double mean = z.mean();
    const double var = (z - mean).square().mean();
    CHECK(std::sqrt(var) == doctest::Approx(sigma).epsilon(0.01));
}

TEST_CASE("noise streams of different trials are uncorrelated") {
    SignalTrajectory zero;
    zero.samples.setZero(2, 400); // 800 channels, the acceptance-scale dimension
    const std::uint64_t seed = 99;
    std::vector<Eigen::VectorXd> draws;
    for (std::uint64_t t = 0; t < 6; ++t) {
        const auto noisy = add_noise(zero, {1.0, derive_stream_seed(seed, t)});
        draws.push_back(Eigen::Map<const Eigen::VectorXd>(noisy.samples.data(),
                                                          noisy.samples.size()));
    }
    // At 800 dimensions a single pair's sample correlation fluctuates at the
    // 1/sqrt(800) ~ 0.035 level even for perfectly independent streams, so
    // check the mean |corr| over all pairs (0.028 expected when independent)
    // and use a generous per-pair cap to catch stream aliasing.
    double sum_abs = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < draws.size(); ++i)
        for (std::size_t j = i + 1; j < draws.size(); ++j) {
            const Eigen::VectorXd a = draws[i].array() - draws[i].mean();
            const Eigen::VectorXd b = draws[j].array() - draws[j].mean();
            const double corr = a.dot(b) / (a.norm() * b.norm());
            CHECK(std::abs(corr) < 0.2);
            sum_abs += std::abs(corr);
            ++pairs;
        }
    CHECK(sum_abs / pairs < 0.05);
}

TEST_CASE("run_mc: exact recovery in the noiseless limit") {
    const auto schedule = conventional_schedule(60, 9);
    const auto ensemble = uniform_ensemble(8);
    const Dictionary dict = local_dictionary(schedule, ensemble);
    const McResult res =
        run_mc(schedule, {700, 60, 0.6}, {1e-300, 5}, dict, ensemble, 4);
    CHECK(res.nbias[0] == 0.0);
    CHECK(res.nbias[1] == 0.0);
    CHECK(res.nstd[0] == 0.0);
    CHECK(res.nstd[1] == 0.0);
    CHECK(res.nrmse[0] == 0.0);
    CHECK(res.nrmse[1] == 0.0);
    CHECK(res.nbias[2] < 1e-12);
    CHECK(res.nrmse[2] < 1e-12);
}

TEST_CASE("run_mc: the error decomposition identity holds exactly") {
    const auto schedule = conventional_schedule(60, 9);
    const auto ensemble = uniform_ensemble(8);
    const Dictionary dict = local_dictionary(schedule, ensemble);
    const McResult res =
        run_mc(schedule, {700, 60, 0.6}, {0.02, 31}, dict, ensemble, 100);
    for (int p = 0; p < 3; ++p) {
        const double lhs = res.nrmse[p] * res.nrmse[p];
        const double rhs = res.nbias[p] * res.nbias[p] + res.nstd[p] * res.nstd[p];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        CHECK(res.nmae[p] >= 0.0);
        CHECK(res.empirical_std_over_crb[p] >= 0.0);
    }
}

TEST_CASE("run_mc: validates inputs") {
    const auto schedule = conventional_schedule(60, 9);
    const auto ensemble = uniform_ensemble(8);
    const Dictionary dict = local_dictionary(schedule, ensemble);
    CHECK_THROWS_AS(run_mc(schedule, {700, 60, 0.6}, {0.02, 1}, dict, ensemble, 1),
                    ValidationError);
    CHECK_THROWS_AS(run_mc(schedule, {700, 60, 0.6}, {0.0, 1}, dict, ensemble, 10),
                    ValidationError);
    const auto other = conventional_schedule(50, 9);
    CHECK_THROWS_AS(run_mc(other, {700, 60, 0.6}, {0.02, 1}, dict, ensemble, 10),
                    ValidationError);
}

TEST_CASE("sweep_ncrb: single schedule row matches the crb module") {
    const auto schedule = conventional_schedule(50, 12);
    const auto ensemble = uniform_ensemble(16);
    const auto rows = sweep_ncrb({{"conv", schedule}}, {700, 60, 0.6}, 0.013, ensemble);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].label == "conv");
    CHECK(rows[0].n == 50);
    CHECK((rows[0].ncrb.array() > 0.0).all());
    CHECK_THROWS_AS(sweep_ncrb({}, {700, 60, 0.6}, 0.013, ensemble), ValidationError);
}

TEST_CASE("sweep_ncrb: longer conventional acquisitions tighten the T2 bound") {
    const auto ensemble = uniform_ensemble(40);
    std::vector<std::pair<std::string, AcqSchedule>> schedules;
    for (const Eigen::Index n : {100, 200, 300}) {
        // Prefixes of one long train, so information accumulates monotonically.
        auto s = conventional_schedule(300, 1);
        s.entries.resize(static_cast<std::size_t>(n));
        schedules.emplace_back("n" + std::to_string(n), std::move(s));
    }
    const auto rows = sweep_ncrb(schedules, {700, 60, 0.6}, 0.013, ensemble);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].ncrb[1] < rows[0].ncrb[1]);
    CHECK(rows[2].ncrb[1] < rows[1].ncrb[1]);
}

TEST_CASE("sweep_ncrb: independent conventional trains, N = 300..800") {
    const auto ensemble = uniform_ensemble(40);
    std::vector<std::pair<std::string, AcqSchedule>> schedules;
    for (Eigen::Index n = 300; n <= 800; n += 100)
        schedules.emplace_back("n" + std::to_string(n), conventional_schedule(n, 1));
    const auto rows =
        sweep_ncrb(schedules, {700, 60, 0.6}, snr_to_sigma(33.0, 0.6), ensemble);
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].ncrb[0] < rows[i - 1].ncrb[0]);
        CHECK(rows[i].ncrb[1] < rows[i - 1].ncrb[1]);
    }
}

TEST_CASE("overall_error") {
    Eigen::VectorXd t(3), e(3);
    t << 1.0, 2.0, 3.0;
    CHECK(overall_error(t, t) == 0.0);
    e = 1.1 * t;
    CHECK(overall_error(t, e) == doctest::Approx(0.1).epsilon(1e-12));

    // Frozen from an independent spreadsheet-style computation.
    Eigen::VectorXd tv(10), ev(10);
    tv << 1.660934072833945, 1.1583176596280784, 1.7878968798670738, 1.546052043589046,
        0.6412660218314743, 1.963433527455134, 1.6417095529855295, 1.6790964579154308,
        0.6921704490133188, 1.1755789068433506;
    ev << 1.7488738703202278, 1.2360968531709733, 1.7944999496231955, 1.6587761642858492,
        0.6880169560566789, 1.8775042811668101, 1.6785846313937793, 1.583208197832531,
        0.7800154791440461, 1.1705863157447254;
    CHECK(overall_error(tv, ev) == doctest::Approx(0.050501864213896894).epsilon(1e-12));

    CHECK_THROWS_AS(overall_error(t, Eigen::VectorXd::Zero(2)), ValidationError);
    CHECK_THROWS_AS(overall_error(Eigen::VectorXd::Zero(3), e), ValidationError);
}
