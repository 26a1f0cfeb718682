#include "mrf/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "mrf/bloch.hpp"
#include "mrf/crb.hpp"
#include "mrf/detail/parallel.hpp"

namespace mrf {

namespace {

constexpr double kFlipStep = 1e-4; // rad, finite-difference step for flips
constexpr double kTrStep = 1e-3;   // ms, finite-difference step for TRs
constexpr double kArmijo = 1e-4;
constexpr double kMinRelGain = 1e-9; // floor below which a decrease is noise
constexpr int kMaxHalvings = 60;
constexpr int kQuasiNewtonHalvings = 20;
constexpr int kLbfgsMemory = 8;
constexpr int kSmallStepRuns = 3; // consecutive sub-tol steps before declaring convergence

/// Two-loop L-BFGS recursion. History pairs are stored oldest first.
Eigen::VectorXd lbfgs_direction(const std::vector<Eigen::VectorXd>& s_hist,
                                const std::vector<Eigen::VectorXd>& y_hist,
                                const Eigen::VectorXd& g) {
    const std::size_t m = s_hist.size();
    if (m == 0)
        return -g;
    Eigen::VectorXd q = g;
    std::vector<double> alpha(m), rho(m);
    for (std::size_t i = m; i-- > 0;) {
        rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
        alpha[i] = rho[i] * s_hist[i].dot(q);
        q -= alpha[i] * y_hist[i];
    }
    const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    q *= gamma;
    for (std::size_t i = 0; i < m; ++i) {
        const double beta = rho[i] * y_hist[i].dot(q);
        q += (alpha[i] - beta) * s_hist[i];
    }
    return -q;
}

// Free variables are [alpha_2 .. alpha_N, TR_1 .. TR_N]; alpha_1 is pinned.
Eigen::Index free_count(Eigen::Index n) { return 2 * n - 1; }

Eigen::VectorXd pack(const AcqSchedule& s) {
    const Eigen::Index n = s.size();
    Eigen::VectorXd x(free_count(n));
    for (Eigen::Index i = 1; i < n; ++i)
        x[i - 1] = s.entries[static_cast<std::size_t>(i)].alpha;
    for (Eigen::Index i = 0; i < n; ++i)
        x[n - 1 + i] = s.entries[static_cast<std::size_t>(i)].tr;
    return x;
}

void unpack(const Eigen::VectorXd& x, AcqSchedule& s) {
    const Eigen::Index n = s.size();
    for (Eigen::Index i = 1; i < n; ++i)
        s.entries[static_cast<std::size_t>(i)].alpha = x[i - 1];
    for (Eigen::Index i = 0; i < n; ++i)
        s.entries[static_cast<std::size_t>(i)].tr = x[n - 1 + i];
}

/// Clips to the box bounds and then sweeps the flip-angle chain forward,
/// clamping each flip into a slightly shrunk variation window around its
/// predecessor so the emitted schedule satisfies check_constraints in exact
/// double arithmetic.
void enforce_feasible(AcqSchedule& s, const DesignConfig& c) {
    const Eigen::Index n = s.size();
    auto& e = s.entries;
    e[0].alpha = std::clamp(e[0].alpha, c.alpha_min, c.alpha_max_first);
    for (Eigen::Index i = 0; i < n; ++i)
        e[static_cast<std::size_t>(i)].tr =
            std::clamp(e[static_cast<std::size_t>(i)].tr, c.tr_min, c.tr_max);
    for (Eigen::Index i = 1; i < n; ++i)
        e[static_cast<std::size_t>(i)].alpha = std::clamp(
            e[static_cast<std::size_t>(i)].alpha, c.alpha_min, c.alpha_max_rest);
    if (std::isfinite(c.delta_alpha_max)) {
        const double margin = c.delta_alpha_max * (1.0 - 1e-12);
        for (Eigen::Index i = 2; i < n; ++i) {
            const double prev = e[static_cast<std::size_t>(i - 1)].alpha;
            const double lo = std::max(c.alpha_min, prev - margin);
            const double hi = std::min(c.alpha_max_rest, prev + margin);
            e[static_cast<std::size_t>(i)].alpha =
                std::clamp(e[static_cast<std::size_t>(i)].alpha, lo, hi);
        }
    }
}

/// Normalized coordinates: every free variable mapped to [0, 1] so the
/// spectral step sees comparable scales for flips and repetition times.
struct VariableMap {
    Eigen::Index n;
    double alpha_lo, alpha_scale; // entries 2..N
    double tr_lo, tr_scale;
    double delta_norm; // variation cap in normalized units

    explicit VariableMap(const DesignConfig& c)
        : n(c.n), alpha_lo(c.alpha_min), alpha_scale(c.alpha_max_rest - c.alpha_min),
          tr_lo(c.tr_min), tr_scale(c.tr_max - c.tr_min),
          delta_norm(alpha_scale > 0.0 ? c.delta_alpha_max / alpha_scale
                                       : std::numeric_limits<double>::infinity()) {}

    Eigen::VectorXd normalize(const Eigen::VectorXd& raw) const {
        Eigen::VectorXd x(raw.size());
        for (Eigen::Index j = 0; j < n - 1; ++j)
            x[j] = alpha_scale > 0.0 ? (raw[j] - alpha_lo) / alpha_scale : 0.0;
        for (Eigen::Index j = n - 1; j < raw.size(); ++j)
            x[j] = tr_scale > 0.0 ? (raw[j] - tr_lo) / tr_scale : 0.0;
        return x;
    }

    Eigen::VectorXd denormalize(const Eigen::VectorXd& x) const {
        Eigen::VectorXd raw(x.size());
        for (Eigen::Index j = 0; j < n - 1; ++j)
            raw[j] = alpha_lo + alpha_scale * x[j];
        for (Eigen::Index j = n - 1; j < x.size(); ++j)
            raw[j] = tr_lo + tr_scale * x[j];
        return raw;
    }

    /// Chain-rule factor from the raw gradient to normalized coordinates.
    Eigen::VectorXd scale_gradient(const Eigen::VectorXd& g) const {
        Eigen::VectorXd out(g.size());
        out.head(n - 1) = g.head(n - 1) * alpha_scale;
        out.tail(n) = g.tail(n) * tr_scale;
        return out;
    }
};

/// Projection of a pair onto |b - a| <= delta: move both endpoints toward
/// each other by half the excess.
inline void project_pair(double& a, double& b, double delta) {
    const double diff = b - a;
    if (diff > delta) {
        const double e = 0.5 * (diff - delta);
        a += e;
        b -= e;
    } else if (diff < -delta) {
        const double e = 0.5 * (-diff - delta);
        a -= e;
        b += e;
    }
}

/// Euclidean projection onto {0 <= x <= 1} intersected with the flip-angle
/// variation chain on the alpha block, via Dykstra's alternating projections
/// over the box and the two interleaved families of pair constraints.
Eigen::VectorXd project_feasible(const VariableMap& map, Eigen::VectorXd z) {
    const Eigen::Index na = map.n - 1;
    z.tail(map.n) = z.tail(map.n).cwiseMax(0.0).cwiseMin(1.0);
    if (!std::isfinite(map.delta_norm) || na < 3) {
        z.head(na) = z.head(na).cwiseMax(0.0).cwiseMin(1.0);
        return z;
    }

    Eigen::VectorXd x = z.head(na);
    Eigen::VectorXd p_box = Eigen::VectorXd::Zero(na);
    Eigen::VectorXd p_even = Eigen::VectorXd::Zero(na);
    Eigen::VectorXd p_odd = Eigen::VectorXd::Zero(na);
    Eigen::VectorXd y(na);

    // Corrections propagate roughly one pair per sweep, so the budget must
    // scale with the chain length; an unconverged projection can turn a
    // descent direction into ascent.
    const int max_sweeps = static_cast<int>(std::max<Eigen::Index>(1000, 12 * na));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        auto apply = [&](Eigen::VectorXd& p, auto&& proj) {
            y = x + p;
            proj(y);
            p = x + p - y;
            change = std::max(change, (y - x).lpNorm<Eigen::Infinity>());
            x = y;
        };
        apply(p_box, [](Eigen::VectorXd& v) { v = v.cwiseMax(0.0).cwiseMin(1.0); });
        apply(p_even, [&](Eigen::VectorXd& v) {
            for (Eigen::Index j = 0; j + 1 < na; j += 2)
                project_pair(v[j], v[j + 1], map.delta_norm);
        });
        apply(p_odd, [&](Eigen::VectorXd& v) {
            for (Eigen::Index j = 1; j + 1 < na; j += 2)
                project_pair(v[j], v[j + 1], map.delta_norm);
        });
        if (change < 1e-16)
            break;
    }
    z.head(na) = x;
    return z;
}

AcqSchedule schedule_from(const AcqSchedule& base, const Eigen::VectorXd& raw,
                          const DesignConfig& config) {
    AcqSchedule s = base;
    unpack(raw, s);
    enforce_feasible(s, config);
    return s;
}

} // namespace

void DesignConfig::validate() const {
    if (tissues.empty())
        throw ValidationError("DesignConfig: need at least one tissue");
    for (const auto& t : tissues)
        t.validate();
    if (!(weights.array() >= 0.0).all() || !(weights.array() > 0.0).any())
        throw ValidationError("DesignConfig: weights must be nonnegative, one positive");
    if (!(sigma > 0.0))
        throw ValidationError("DesignConfig: sigma must be positive");
    if (n < 2)
        throw ValidationError("DesignConfig: schedule length must be >= 2");
    if (!(tr_min <= tr_max) || !(tr_min > 0.0))
        throw ValidationError("DesignConfig: bad TR bounds");
    if (!(alpha_min <= alpha_max_rest) || !(alpha_max_rest <= alpha_max_first))
        throw ValidationError("DesignConfig: bad flip-angle bounds");
    if (!(delta_alpha_max > 0.0))
        throw ValidationError("DesignConfig: variation cap must be positive");
    if (!(tol > 0.0))
        throw ValidationError("DesignConfig: tol must be positive");
    if (nv_design < 1 || max_iter < 0)
        throw ValidationError("DesignConfig: bad nv_design/max_iter");
}

DesignConfig default_design_config(Eigen::Index n) {
    constexpr double kDeg = M_PI / 180.0;
    DesignConfig c;
    c.tissues = {{700.0, 60.0, 0.6}, {850.0, 50.0, 0.6}, {1100.0, 102.0, 0.6}};
    c.weights = Eigen::Vector3d(2.0e-5, 5.0e-4, 3.0e1);
    c.sigma = 0.6 * std::pow(10.0, -33.0 / 20.0); // SNR = 33 dB against M0 = 0.6
    c.n = n;
    c.tr_min = 11.0;
    c.tr_max = 15.0;
    c.alpha_min = 10.0 * kDeg;
    c.alpha_max_first = 180.0 * kDeg;
    c.alpha_max_rest = 60.0 * kDeg;
    c.delta_alpha_max = std::numeric_limits<double>::infinity();
    c.nv_design = 40;
    c.tol = 1e-4;
    c.max_iter = 50000;
    return c;
}

std::string ConstraintViolation::describe() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::TrBound:
        os << "TR[" << index << "] = " << value << " outside [" << lo << ", " << hi << "]";
        break;
    case Kind::AlphaBound:
        os << "alpha[" << index << "] = " << value << " outside [" << lo << ", " << hi
           << "]";
        break;
    case Kind::AlphaVariation:
        os << "|alpha[" << index + 1 << "] - alpha[" << index << "]| = " << value
           << " exceeds " << hi;
        break;
    }
    return os.str();
}

double design_cost(const AcqSchedule& schedule, const DesignConfig& config) {
    config.validate();
    if (schedule.size() != config.n)
        throw ValidationError("design_cost: schedule length does not match config");
    const IsochromatEnsemble ensemble = uniform_ensemble(config.nv_design);
    double total = 0.0;
    for (const auto& tissue : config.tissues) {
        try {
            const auto [signal, sens] = sensitivity_trajectory(schedule, tissue, ensemble);
            const CrbReport report = crb(fisher(sens, config.sigma), tissue);
            total += config.weights.dot(report.crb_matrix.diagonal());
        } catch (const SingularInformation&) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return total;
}

std::vector<ConstraintViolation> check_constraints(const AcqSchedule& schedule,
                                                   const DesignConfig& config) {
    config.validate();
    if (schedule.size() != config.n)
        throw ValidationError("check_constraints: schedule length does not match config");
    std::vector<ConstraintViolation> out;
    const Eigen::Index n = schedule.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = schedule.entries[static_cast<std::size_t>(i)];
        if (e.tr < config.tr_min || e.tr > config.tr_max)
            out.push_back({ConstraintViolation::Kind::TrBound, i + 1, e.tr, config.tr_min,
                           config.tr_max});
        const double hi = (i == 0) ? config.alpha_max_first : config.alpha_max_rest;
        if (e.alpha < config.alpha_min || e.alpha > hi)
            out.push_back({ConstraintViolation::Kind::AlphaBound, i + 1, e.alpha,
                           config.alpha_min, hi});
    }
    if (std::isfinite(config.delta_alpha_max)) {
        // Eq.-style indexing: pairs n = 2 .. N-1; the inversion pulse is exempt.
        for (Eigen::Index i = 1; i + 1 < n; ++i) {
            const double diff =
                std::abs(schedule.entries[static_cast<std::size_t>(i + 1)].alpha -
                         schedule.entries[static_cast<std::size_t>(i)].alpha);
            if (diff > config.delta_alpha_max)
                out.push_back({ConstraintViolation::Kind::AlphaVariation, i + 1, diff, 0.0,
                               config.delta_alpha_max});
        }
    }
    return out;
}

Eigen::VectorXd cost_gradient(const AcqSchedule& schedule, const DesignConfig& config,
                              double cost_at_schedule) {
    config.validate();
    if (schedule.size() != config.n)
        throw ValidationError("cost_gradient: schedule length does not match config");
    const Eigen::Index n = config.n;
    const Eigen::VectorXd x0 = pack(schedule);
    Eigen::VectorXd grad(free_count(n));

    detail::parallel_for(free_count(n), config.threads, [&](std::ptrdiff_t j) {
        const bool is_alpha = j < n - 1;
        const double h = is_alpha ? kFlipStep : kTrStep;
        const double lo = is_alpha ? config.alpha_min : config.tr_min;
        const double hi = is_alpha ? config.alpha_max_rest : config.tr_max;

        const bool can_up = x0[j] + h <= hi;
        const bool can_down = x0[j] - h >= lo;
        if (!can_up && !can_down) {
            grad[j] = 0.0;
            return;
        }

        auto eval_at = [&](double value) {
            AcqSchedule s = schedule;
            Eigen::VectorXd x = x0;
            x[j] = value;
            unpack(x, s);
            return design_cost(s, config);
        };

        if (can_up && can_down)
            grad[j] = (eval_at(x0[j] + h) - eval_at(x0[j] - h)) / (2.0 * h);
        else if (can_up)
            grad[j] = (eval_at(x0[j] + h) - cost_at_schedule) / h;
        else
            grad[j] = (cost_at_schedule - eval_at(x0[j] - h)) / h;
    });
    return grad;
}

Eigen::VectorXd cost_gradient(const AcqSchedule& schedule, const DesignConfig& config) {
    return cost_gradient(schedule, config, design_cost(schedule, config));
}

DesignResult optimize(const DesignConfig& config, const AcqSchedule& init) {
    config.validate();
    if (init.size() != config.n)
        throw ValidationError("optimize: init length does not match config");
    init.validate();

    const VariableMap map(config);
    AcqSchedule current = init;
    enforce_feasible(current, config);

    double f = design_cost(current, config);
    if (!std::isfinite(f))
        throw SingularInformation("optimize: initialization yields singular information");

    DesignResult result;
    result.cost_history.push_back(f);

    Eigen::VectorXd x_norm = map.normalize(pack(current));
    Eigen::VectorXd g_norm = map.scale_gradient(cost_gradient(current, config, f));

    const bool trace = std::getenv("MRF_OPT_TRACE") != nullptr;
    std::vector<Eigen::VectorXd> s_hist, y_hist;
    int small_steps = 0;

    for (Eigen::Index iter = 0; iter < config.max_iter; ++iter) {
        // Freeze variables pressed against an active bound so the
        // quasi-Newton direction does not fight the box.
        Eigen::VectorXd g_masked = g_norm;
        for (Eigen::Index j = 0; j < g_masked.size(); ++j)
            if ((x_norm[j] <= 1e-12 && g_norm[j] > 0.0) ||
                (x_norm[j] >= 1.0 - 1e-12 && g_norm[j] < 0.0))
                g_masked[j] = 0.0;
        const double gmax = g_masked.lpNorm<Eigen::Infinity>();
        if (gmax < 1e-300) {
            result.converged = true;
            break;
        }

        AcqSchedule candidate;
        Eigen::VectorXd cand_norm;
        double fc = 0.0;
        bool accepted = false;
        const bool try_quasi_newton = !s_hist.empty();
        for (int attempt = try_quasi_newton ? 0 : 1; attempt < 2 && !accepted; ++attempt) {
            Eigen::VectorXd d;
            double t;
            if (attempt == 0) {
                d = lbfgs_direction(s_hist, y_hist, g_masked);
                for (Eigen::Index j = 0; j < d.size(); ++j)
                    if (g_masked[j] == 0.0 && g_norm[j] != 0.0)
                        d[j] = 0.0;
                if (!(d.dot(g_masked) < 0.0))
                    continue;
                t = 1.0;
            } else {
                d = -g_masked;
                t = 0.1 / gmax;
            }
            const int halvings = attempt == 0 ? kQuasiNewtonHalvings : kMaxHalvings;
            for (int half = 0; half < halvings; ++half) {
                cand_norm = project_feasible(map, x_norm + t * d);
                candidate = schedule_from(current, map.denormalize(cand_norm), config);
                cand_norm = map.normalize(pack(candidate));
                fc = design_cost(candidate, config);
                const double descent = g_norm.dot(cand_norm - x_norm);
                if (f - fc >= kMinRelGain * std::abs(f) &&
                    fc <= f + kArmijo * std::min(0.0, descent)) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
        }
        if (!accepted) {
            // No feasible decrease along the quasi-Newton or gradient
            // directions: numerically stationary.
            if (trace)
                std::fprintf(stderr, "opt[%ld] stagnated: f=%.9g |g|=%.3g\n",
                             static_cast<long>(iter), f, gmax);
            result.converged = true;
            break;
        }

        const Eigen::VectorXd s = cand_norm - x_norm;
        const double change = (pack(candidate) - pack(current)).lpNorm<Eigen::Infinity>();
        if (trace)
            std::fprintf(stderr, "opt[%ld] f=%.9g -> %.9g change=%.3g |g|=%.3g mem=%zu\n",
                         static_cast<long>(iter), f, fc, change, gmax, s_hist.size());

        current = std::move(candidate);
        f = fc;
        x_norm = cand_norm;
        result.cost_history.push_back(f);
        ++result.iterations;

        // The paper's rule: stop once the solution change falls below the
        // tolerance; require it on consecutive iterations so one short
        // line-search step does not end the run.
        small_steps = change < config.tol ? small_steps + 1 : 0;
        if (small_steps >= kSmallStepRuns) {
            result.converged = true;
            break;
        }

        const Eigen::VectorXd g_next =
            map.scale_gradient(cost_gradient(current, config, f));
        const Eigen::VectorXd y = g_next - g_norm;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            if (s_hist.size() > kLbfgsMemory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
            }
        }
        g_norm = g_next;
    }

    result.schedule = std::move(current);
    const IsochromatEnsemble ensemble = uniform_ensemble(config.nv_design);
    result.per_tissue_ncrb.resize(static_cast<Eigen::Index>(config.tissues.size()), 3);
    for (std::size_t l = 0; l < config.tissues.size(); ++l) {
        const auto [signal, sens] =
            sensitivity_trajectory(result.schedule, config.tissues[l], ensemble);
        result.per_tissue_ncrb.row(static_cast<Eigen::Index>(l)) =
            crb(fisher(sens, config.sigma), config.tissues[l]).ncrb.transpose();
    }
    return result;
}

} // namespace mrf
