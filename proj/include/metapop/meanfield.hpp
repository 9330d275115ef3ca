#ifndef METAPOP_MEANFIELD_HPP
#define METAPOP_MEANFIELD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "metapop/chain.hpp"
#include "metapop/errors.hpp"
#include "metapop/model.hpp"

namespace metapop {

/// Truncated occupancy-frequency vector p_0..p_N at one instant.
struct TruncatedState {
    std::vector<double> p;
    double t = 0.0;

    std::int64_t truncation() const { return static_cast<std::int64_t>(p.size()) - 1; }
    double mass() const {
        double m = 0.0;
        for (double v : p) m += v;
        return m;
    }
    double mean() const {
        double m = 0.0;
        for (std::size_t j = 1; j < p.size(); ++j) m += static_cast<double>(j) * p[j];
        return m;
    }
};

inline TruncatedState delta_state(std::int64_t N, std::int64_t at) {
    if (N < 1 || at < 0 || at > N) throw InvalidArgument("delta state out of range");
    TruncatedState st;
    st.p.assign(static_cast<std::size_t>(N + 1), 0.0);
    st.p[static_cast<std::size_t>(at)] = 1.0;
    return st;
}

inline TruncatedState uniform_state(std::int64_t N, std::int64_t hi) {
    if (N < 1 || hi < 0 || hi > N) throw InvalidArgument("uniform state out of range");
    TruncatedState st;
    st.p.assign(static_cast<std::size_t>(N + 1), 0.0);
    for (std::int64_t j = 0; j <= hi; ++j)
        st.p[static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(hi + 1);
    return st;
}

/// Equilibrium distribution re-expressed on a truncation of size N
/// (renormalized; tail mass beyond N must already be negligible).
inline TruncatedState equilibrium_state(const EquilibriumSolution& eq, std::int64_t N) {
    TruncatedState st;
    st.p.assign(static_cast<std::size_t>(N + 1), 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j < eq.pi.size() && j < st.p.size(); ++j) {
        st.p[j] = eq.pi[j];
        sum += eq.pi[j];
    }
    if (!(sum > 0.0)) throw InvalidArgument("equilibrium state has no mass on the requested truncation");
    for (double& v : st.p) v /= sum;
    return st;
}

namespace detail {

/// Precomputed total rates for the truncated system. The closure zeroes the
/// birth and immigration flux out of state N, which conserves mass exactly
/// and biases the mean downward by at most the monitored tail flux.
struct MeanFieldRhs {
    std::vector<double> lambda;  // i*b_i, index 0..N (lambda_0 = 0, lambda_N unused by closure)
    std::vector<double> mu;      // i*(d_i + gamma)
    double gamma = 0.0;
    double nu = 0.0;

    explicit MeanFieldRhs(const RateModel& model, std::int64_t N) {
        if (!model.normalized()) throw InvalidModel("mean-field dynamics require a normalized model");
        if (N < 1) throw InvalidArgument("need at least two states");
        lambda.resize(static_cast<std::size_t>(N + 1), 0.0);
        mu.resize(static_cast<std::size_t>(N + 1), 0.0);
        for (std::int64_t i = 1; i <= N; ++i) {
            lambda[static_cast<std::size_t>(i)] = static_cast<double>(i) * model.birth(i);
            mu[static_cast<std::size_t>(i)] = static_cast<double>(i) * (model.death(i) + model.gamma);
        }
        gamma = model.gamma;
        nu = model.nu;
    }

    void operator()(const std::vector<double>& p, std::vector<double>& dp) const {
        const std::size_t n = p.size() - 1;  // = N
        double s = 0.0, total = 0.0;
        for (std::size_t j = 0; j <= n; ++j) {
            s += static_cast<double>(j) * p[j];
            total += p[j];
        }
        const double imm = gamma * s;
        dp[0] = nu * (total - p[0]) + mu[1] * p[1] - imm * p[0];
        for (std::size_t i = 1; i <= n; ++i) {
            double v = (lambda[i - 1] + imm) * p[i - 1] - (mu[i] + nu) * p[i];
            if (i < n) v += mu[i + 1] * p[i + 1] - (lambda[i] + imm) * p[i];
            dp[i] = v;
        }
    }
};

}  // namespace detail

/// Right side of the truncated system at one state (allocating convenience
/// wrapper; the integrator uses the cached form internally).
inline std::vector<double> rhs(const RateModel& model, const TruncatedState& state) {
    detail::MeanFieldRhs f(model, state.truncation());
    std::vector<double> dp(state.p.size(), 0.0);
    f(state.p, dp);
    return dp;
}

struct IntegrateControls {
    // The absolute tolerance also bounds how far a decaying component can
    // undershoot zero before clamping; 1e-13 keeps that within the 1e-12
    // positivity budget at no step-count cost (steps are stability-limited).
    double abs_tol = 1e-13;
    double rel_tol = 1e-8;
    double dt_sample = 1.0;
    bool renormalize = false;       ///< off by default; defect is tracked instead
    double clamp_tol = 1e-12;       ///< negative entries up to this magnitude are zeroed
    double mass_defect_limit = 1e-6;
    /// The closure conserves mass for any truncation, so a gross tail leak
    /// shows up as occupancy of the top state rather than as mass defect.
    /// Finite values turn that into a hard error (used by the CLI to reject
    /// under-truncated configurations; leaky runs stay computable by default
    /// for the diagnostics).
    double top_occupancy_limit = std::numeric_limits<double>::infinity();
    std::int64_t max_steps = 200000000;
};

struct Trajectory {
    struct Sample {
        double t = 0.0;
        std::vector<double> p;
        double s = 0.0;            ///< recomputed occupancy mean
        double mass_defect = 0.0;  ///< |sum p - 1|
    };
    std::vector<Sample> samples;
    IntegrateControls controls;
    double max_mass_defect = 0.0;
    double clamped_mass = 0.0;
    double min_entry_seen = 0.0;  ///< most negative component before clamping
    std::int64_t steps = 0;
    std::int64_t rejected = 0;
};

namespace detail {

/// Dormand-Prince 5(4) embedded pair with PI-free standard step control and
/// first-same-as-last reuse. Integrates y' = f(y) from t0 to t1, invoking
/// on_sample at every multiple of dt_sample and at t1.
template <typename F, typename SampleFn>
void dp45_integrate(const F& f, std::vector<double>& y, double t0, double t1,
                    const IntegrateControls& ctl, SampleFn&& on_sample, Trajectory* stats) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);

    double t = t0;
    on_sample(t, y);
    f(y, k1);
    double max_rate = 1e-12;
    for (std::size_t i = 0; i < n; ++i) max_rate = std::max(max_rate, std::fabs(k1[i]));
    double h_nat = std::max(std::min({ctl.dt_sample, t1 - t0, 0.1 / max_rate}), 1e-12);

    double next_sample = t0 + ctl.dt_sample;
    std::int64_t steps = 0;
    bool fsal_fresh = true;
    const auto near = [](double a, double b) {
        return a >= b - 1e-12 * std::max(1.0, std::fabs(b));
    };

    while (!near(t, t1)) {
        const double stop = std::min(next_sample, t1);
        if (near(t, stop)) {
            on_sample(t, y);
            fsal_fresh = false;  // sampling may mutate y (clamping)
            if (near(stop, next_sample)) next_sample += ctl.dt_sample;
            continue;
        }
        if (++steps > ctl.max_steps) throw StiffnessError("step budget exhausted");

        const bool clipped = t + h_nat >= stop;
        const double h = clipped ? stop - t : h_nat;
        if (h <= 1e-14 * std::max(1.0, std::fabs(t)))
            throw StiffnessError("step size underflow at t = " + std::to_string(t) +
                                 "; enlarge tolerances or reduce the rate scale");

        if (!fsal_fresh) {
            f(y, k1);
            fsal_fresh = true;
        }
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        f(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        f(ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                  e7 * k7[i]);
            const double scale = ctl.abs_tol + ctl.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            err = std::max(err, std::fabs(e) / scale);
        }

        double factor;
        if (!std::isfinite(err))
            factor = 0.2;
        else if (err > 0.0)
            factor = std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        else
            factor = 5.0;

        if (std::isfinite(err) && err <= 1.0) {
            t = clipped ? stop : t + h;
            std::swap(y, ynew);
            std::swap(k1, k7);
            if (stats) ++stats->steps;
            if (!clipped) h_nat = h * factor;
        } else {
            if (stats) ++stats->rejected;
            fsal_fresh = false;
            h_nat = h * factor;
        }
    }
    on_sample(t, y);
}

}  // namespace detail

/// Integrates the truncated system from p0 to time T, sampling every
/// controls.dt_sample time units. Mass is conserved by the closure; the
/// accumulated defect and any negative clamping are reported on the
/// trajectory and bounded by controls.mass_defect_limit.
inline Trajectory integrate(const RateModel& model, const TruncatedState& p0, double T,
                            const IntegrateControls& controls = {}) {
    if (!(T > p0.t)) throw InvalidArgument("final time must exceed the initial time");
    if (!(controls.dt_sample > 0.0)) throw InvalidArgument("dt_sample must be positive");
    const double mass0 = p0.mass();
    if (std::fabs(mass0 - 1.0) > 1e-9) throw InvalidArgument("initial state must lie on the simplex");
    for (double v : p0.p)
        if (v < -1e-12) throw InvalidArgument("initial state must be nonnegative");

    const detail::MeanFieldRhs f(model, p0.truncation());
    Trajectory traj;
    traj.controls = controls;

    std::vector<double> y = p0.p;
    auto on_sample = [&](double t, std::vector<double>& p) {
        for (double& v : p) {
            if (v < 0.0) {
                traj.min_entry_seen = std::min(traj.min_entry_seen, v);
                if (-v <= controls.clamp_tol) {
                    traj.clamped_mass += -v;
                    v = 0.0;
                } else if (-v > 1e-6) {
                    throw IntegrationDiverged("state component fell below -1e-6 at t = " +
                                              std::to_string(t));
                }
            }
        }
        double mass = 0.0, s = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            mass += p[j];
            s += static_cast<double>(j) * p[j];
        }
        const double defect = std::fabs(mass - 1.0);
        traj.max_mass_defect = std::max(traj.max_mass_defect, defect);
        if (defect > controls.mass_defect_limit)
            throw IntegrationDiverged("mass defect " + std::to_string(defect) + " at t = " +
                                      std::to_string(t) + "; truncation too small or rates too stiff");
        if (p.back() > controls.top_occupancy_limit)
            throw IntegrationDiverged("truncation level too small: top-state occupancy " +
                                      std::to_string(p.back()) + " at t = " + std::to_string(t));
        if (controls.renormalize)
            for (double& v : p) v /= mass;
        traj.samples.push_back({t, p, s, defect});
    };

    detail::dp45_integrate(f, y, p0.t, T, controls, on_sample, &traj);
    return traj;
}

/// Largest discrepancy between the finite-differenced mean of a trajectory
/// and the mean equation  s' = sum j b_j p_j - sum j d_j p_j - nu s
/// evaluated on the samples. Grows when the truncation leaks, which makes it
/// a usable truncation diagnostic.
inline double mean_ode_check(const RateModel& model, const Trajectory& traj) {
    if (traj.samples.size() < 3) throw InvalidArgument("trajectory too short to difference");
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < traj.samples.size(); ++k) {
        const auto& lo = traj.samples[k - 1];
        const auto& mid = traj.samples[k];
        const auto& hi = traj.samples[k + 1];
        const double fd = (hi.s - lo.s) / (hi.t - lo.t);
        double births = 0.0, deaths = 0.0;
        for (std::size_t j = 1; j < mid.p.size(); ++j) {
            births += static_cast<double>(j) * model.birth(static_cast<std::int64_t>(j)) * mid.p[j];
            deaths += static_cast<double>(j) * model.death(static_cast<std::int64_t>(j)) * mid.p[j];
        }
        worst = std::max(worst, std::fabs(fd - (births - deaths - model.nu * mid.s)));
    }
    return worst;
}

/// Scalar caricature of the mean dynamics with frozen immigration pressure:
/// x' = x [b(x) - d(x) - gamma - nu] + gamma s.
struct ScalarComparison {
    std::vector<std::pair<double, double>> samples;  ///< (t, x(t))
    double s = 0.0;
    double x0 = 0.0;
};

inline ScalarComparison scalar_comparison(const RateModel& model, double s_const, double x0, double T,
                                          double dt_sample = 0.1, const IntegrateControls& base = {}) {
    if (!(x0 >= 0.0) || !(s_const >= 0.0)) throw InvalidArgument("x0 and s must be nonnegative");
    const ContinuousRates rates(model);
    auto f = [&](const std::vector<double>& x, std::vector<double>& dx) {
        const double v = std::max(x[0], 0.0);
        dx[0] = v * (rates.birth(v) - rates.death(v) - model.gamma - model.nu) + model.gamma * s_const;
    };
    IntegrateControls ctl = base;
    ctl.dt_sample = dt_sample;
    ScalarComparison cmp;
    cmp.s = s_const;
    cmp.x0 = x0;
    std::vector<double> y{x0};
    detail::dp45_integrate(f, y, 0.0, T, ctl,
                           [&](double t, std::vector<double>& x) { cmp.samples.emplace_back(t, x[0]); },
                           nullptr);
    return cmp;
}

struct ComparisonReport {
    double worst_envelope_defect = 0.0;  ///< max over samples of s(t) - y(t)
    double worst_cap_excess = 0.0;       ///< max of s(t) - max(s(0), s_tilde) after burn-in
    double burn_in_time = 0.0;
    double s_tilde_value = 0.0;
};

/// Verifies the scalar comparison bound along a trajectory: s(t) never
/// exceeds the solution of y' = [b(y) - d(y) - nu] y with y(0) = s(0), and
/// past the burn-in window s(t) stays below max(s(0), s_tilde). Violations
/// beyond tol indicate a truncation or right-side bug.
inline ComparisonReport comparison_bound_check(const RateModel& model, const Trajectory& traj,
                                               double s_tilde_value, double tol = 1e-6) {
    if (traj.samples.empty()) throw InvalidArgument("empty trajectory");
    const ContinuousRates rates(model);
    const double t0 = traj.samples.front().t;
    const double t1 = traj.samples.back().t;
    const double s0 = traj.samples.front().s;

    auto f = [&](const std::vector<double>& x, std::vector<double>& dx) {
        const double v = std::max(x[0], 0.0);
        dx[0] = v * (rates.birth(v) - rates.death(v) - model.nu);
    };
    IntegrateControls ctl;
    ctl.abs_tol = 1e-12;
    ctl.rel_tol = 1e-10;
    ctl.dt_sample = std::max((t1 - t0), 1e-12);  // integrate segment by segment below

    ComparisonReport rep;
    rep.s_tilde_value = s_tilde_value;
    rep.burn_in_time = t0 + 0.2 * (t1 - t0);
    const double cap = std::max(s0, s_tilde_value);

    std::vector<double> y{s0};
    double t_prev = t0;
    for (const auto& sample : traj.samples) {
        if (sample.t > t_prev) {
            IntegrateControls seg = ctl;
            seg.dt_sample = sample.t - t_prev;
            detail::dp45_integrate(f, y, t_prev, sample.t, seg, [](double, std::vector<double>&) {},
                                   nullptr);
            t_prev = sample.t;
        }
        rep.worst_envelope_defect = std::max(rep.worst_envelope_defect, sample.s - y[0]);
        if (sample.t >= rep.burn_in_time)
            rep.worst_cap_excess = std::max(rep.worst_cap_excess, sample.s - cap);
    }
    if (rep.worst_envelope_defect > tol)
        throw ComparisonViolated("trajectory mean exceeds the scalar envelope by " +
                                 std::to_string(rep.worst_envelope_defect));
    if (rep.worst_cap_excess > tol)
        throw ComparisonViolated("trajectory mean exceeds max(s(0), s_tilde) after burn-in by " +
                                 std::to_string(rep.worst_cap_excess));
    return rep;
}

struct ConvergenceSeries {
    std::vector<std::pair<double, double>> distances;  ///< (t, m1 distance to target)
    double final_distance = 0.0;
    bool tail_nonincreasing = false;  ///< after the burn-in window (reported, not asserted)
};

/// Occupancy-weighted distance from each sample to a target distribution
/// (equilibrium of the chain at s*, or the extinction state).
inline ConvergenceSeries convergence_diagnose(const Trajectory& traj, const std::vector<double>& target) {
    if (traj.samples.empty()) throw InvalidArgument("empty trajectory");
    ConvergenceSeries series;
    for (const auto& sample : traj.samples)
        series.distances.emplace_back(sample.t, m1_distance(sample.p, target));
    series.final_distance = series.distances.back().second;

    const double t0 = traj.samples.front().t;
    const double t1 = traj.samples.back().t;
    const double burn_in = t0 + 0.2 * (t1 - t0);
    series.tail_nonincreasing = true;
    double prev = -1.0;
    for (const auto& [t, d] : series.distances) {
        if (t < burn_in) continue;
        if (prev >= 0.0 && d > prev + 1e-9) series.tail_nonincreasing = false;
        prev = d;
    }
    return series;
}

}  // namespace metapop

#endif  // METAPOP_MEANFIELD_HPP
