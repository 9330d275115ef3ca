#ifndef METAPOP_VERIFY_HPP
#define METAPOP_VERIFY_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "metapop/bundled.hpp"
#include "metapop/chain.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/model.hpp"
#include "metapop/stochastic.hpp"
#include "metapop/threshold.hpp"

namespace metapop::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyOptions {
    bool quick = false;
    std::uint64_t seed = 20250808;
    /// Model substituted for the bundled workhorse in the deterministic
    /// checks (lets a caller probe the suite's sensitivity).
    std::optional<RateModel> model_override;
};

namespace detail {

class Timer {
  public:
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline RateModel workhorse(const VerifyOptions& opt) {
    return opt.model_override ? *opt.model_override : bundled::logistic();
}

inline std::vector<double> nu_sweep_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) grid.push_back(0.1 + (2.5 - 0.1) * static_cast<double>(i) / 19.0);
    return grid;
}

}  // namespace detail

/// 1. Closed-form equilibrium mean of the constant-rate chain: G(s) = s/2.
inline CheckResult criterion_closed_form_mean(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "closed-form equilibrium mean G(s) = s/2";
    const RateModel m =
        opt.model_override ? *opt.model_override : bundled::linear_subcritical();
    double worst_err = 0.0, worst_tail = 0.0;
    for (double s : {0.5, 1.0, 3.0, 10.0}) {
        const auto eq = stationary_distribution(chain_rates(m, s), 1e-12);
        worst_err = std::max(worst_err, std::fabs(eq.mean - s / 2.0));
        worst_tail = std::max(worst_tail, eq.tail_mass);
    }
    res.seconds = timer.elapsed();
    res.pass = worst_err < 1e-8 && worst_tail < 1e-12 && res.seconds < 1.0;
    res.detail = "max |G - s/2| = " + detail::fmt(worst_err) + ", max tail = " + detail::fmt(worst_tail);
    return res;
}

/// 2. Closed-form reproduction number 2/3, by resolvent and by Monte Carlo.
inline CheckResult criterion_closed_form_r0(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "closed-form reproduction number 2/3";
    const RateModel m = bundled::linear_catastrophe();
    const double solved = r0(m, 1e-10);
    const std::uint64_t paths = opt.quick ? 20000 : 100000;
    const auto mc = r0_monte_carlo(m, paths, opt.seed);
    res.seconds = timer.elapsed();
    const double exact = 2.0 / 3.0;
    const bool resolvent_ok = std::fabs(solved - exact) < 1e-8;
    const bool mc_ok = std::fabs(mc.value - exact) <= 3.0 * mc.std_error && mc.censored == 0;
    res.pass = resolvent_ok && mc_ok && res.seconds < 10.0;
    res.detail = "resolvent err = " + detail::fmt(std::fabs(solved - exact)) + ", MC = " +
                 detail::fmt(mc.value) + " +- " + detail::fmt(mc.std_error) + " (" +
                 std::to_string(paths) + " paths)";
    return res;
}

/// 3. Threshold dichotomy across a catastrophe-rate sweep.
inline CheckResult criterion_threshold_dichotomy(const VerifyOptions&) {
    detail::Timer timer;
    CheckResult res;
    res.name = "threshold dichotomy on the nu sweep";
    int bad_dichotomy = 0, bad_sign_pattern = 0;
    for (double nu : detail::nu_sweep_grid()) {
        const RateModel m = bundled::logistic_with_nu(nu);
        const auto rep = solve_fixed_point(m, 1e-8);
        const bool super = rep.r0 > 1.0 + 1e-6;
        if (super != (rep.s_star > 0.0)) ++bad_dichotomy;

        // sign scan of G - id on (0, 2 s_tilde]; for persistent points the
        // grid includes s*/2 so the positive region is always resolved even
        // when the fixed point sits below the uniform spacing
        const int pts = 24;
        std::vector<double> scan;
        for (int i = 1; i <= pts; ++i) scan.push_back(2.0 * rep.s_tilde * static_cast<double>(i) / pts);
        if (rep.s_star > 0.0) scan.push_back(rep.s_star / 2.0);
        std::sort(scan.begin(), scan.end());
        int plus_to_minus = 0, minus_to_plus = 0;
        double prev = 0.0;
        bool have_prev = false;
        bool any_positive = false;
        for (double s : scan) {
            const double v = mean_G(m, s, 1e-11) - s;
            any_positive = any_positive || v > 0.0;
            if (have_prev) {
                if (prev > 0.0 && v <= 0.0) ++plus_to_minus;
                if (prev <= 0.0 && v > 0.0) ++minus_to_plus;
            }
            prev = v;
            have_prev = true;
        }
        if (super) {
            if (!(plus_to_minus == 1 && minus_to_plus == 0)) ++bad_sign_pattern;
        } else {
            if (any_positive) ++bad_sign_pattern;
        }
    }
    res.seconds = timer.elapsed();
    res.pass = bad_dichotomy == 0 && bad_sign_pattern == 0 && res.seconds < 60.0;
    res.detail = "dichotomy violations = " + std::to_string(bad_dichotomy) +
                 ", sign-pattern violations = " + std::to_string(bad_sign_pattern) + " over 20 points";
    return res;
}

/// 4. G increasing and strictly concave on 30-point grids for three models.
inline CheckResult criterion_g_concavity(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "monotone strictly concave G on three models";
    double worst_first = std::numeric_limits<double>::infinity();
    double worst_second = -std::numeric_limits<double>::infinity();
    const std::vector<RateModel> models = {detail::workhorse(opt), bundled::logistic_mild(),
                                           bundled::curved_table()};
    for (const auto& m : models) {
        const double upper = 2.0 * s_tilde(m);
        const int pts = 30;
        std::vector<double> g;
        for (int i = 0; i <= pts; ++i)
            g.push_back(mean_G(m, upper * static_cast<double>(i) / pts, 1e-11));
        for (int i = 0; i + 1 <= pts; ++i) worst_first = std::min(worst_first, g[i + 1] - g[i]);
        for (int i = 0; i + 2 <= pts; ++i)
            worst_second = std::max(worst_second, g[i + 2] - 2.0 * g[i + 1] + g[i]);
    }
    res.seconds = timer.elapsed();
    res.pass = worst_first > 0.0 && worst_second < 0.0 && res.seconds < 60.0;
    res.detail = "min first difference = " + detail::fmt(worst_first) +
                 ", max second difference = " + detail::fmt(worst_second);
    return res;
}

/// 5. Spectral consistency: chi(0) = R0, the root sign matches R0 - 1, and
/// the characteristic root agrees with the truncated dominant eigenvalue.
inline CheckResult criterion_spectral(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "spectral consistency";
    double worst_chi0 = 0.0;
    for (const auto& m : {detail::workhorse(opt), bundled::logistic_mild(), bundled::curved_table(),
                          bundled::linear_catastrophe()})
        worst_chi0 = std::max(worst_chi0,
                              std::fabs(characteristic_function(m, 0.0, 1e-10) - r0(m, 1e-10)));

    int sign_violations = 0;
    for (double nu : detail::nu_sweep_grid()) {
        const RateModel m = bundled::logistic_with_nu(nu);
        const double r = r0(m, 1e-10);
        const auto lam = lambda0(m, 1e-9);
        if (r > 1.0 + critical_band) {
            if (!lam || *lam <= 0.0) ++sign_violations;
        } else if (std::fabs(r - 1.0) <= critical_band) {
            if (!lam || std::fabs(*lam) > 1e-6) ++sign_violations;
        } else {
            if (lam && *lam >= 0.0) ++sign_violations;  // a real root may be absent below 1
        }
    }

    const RateModel flagship = detail::workhorse(opt);
    const auto lam = lambda0(flagship, 1e-10);
    double eig_gap = std::numeric_limits<double>::infinity();
    if (lam) eig_gap = std::fabs(*lam - dominant_eigenvalue_check(flagship, 400));

    res.seconds = timer.elapsed();
    res.pass = worst_chi0 < 1e-6 && sign_violations == 0 && eig_gap < 1e-5;
    res.detail = "max |chi(0)-R0| = " + detail::fmt(worst_chi0) +
                 ", sign violations = " + std::to_string(sign_violations) +
                 ", |root - eigenvalue| = " + detail::fmt(eig_gap);
    return res;
}

namespace detail {

struct ConvergenceOutcome {
    double distance = std::numeric_limits<double>::infinity();
    double T = 0.0;
    double mass_defect = 0.0;
    Trajectory last_window;
};

/// Integrates in windows until the distance to the target drops below tol.
inline ConvergenceOutcome converge_to(const RateModel& m, TruncatedState state,
                                      const std::vector<double>& target, double tol, double window,
                                      double t_max) {
    ConvergenceOutcome out;
    IntegrateControls ctl;
    ctl.dt_sample = window / 10.0;
    while (state.t < t_max) {
        Trajectory traj = integrate(m, state, state.t + window, ctl);
        out.mass_defect = std::max(out.mass_defect, traj.max_mass_defect);
        state.p = traj.samples.back().p;
        state.t = traj.samples.back().t;
        out.distance = m1_distance(state.p, target);
        out.T = state.t;
        out.last_window = std::move(traj);
        if (out.distance < tol) break;
    }
    return out;
}

}  // namespace detail

/// 6. Global convergence to the equilibrium (persistent) or extinction.
inline CheckResult criterion_convergence(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "convergence to the equilibrium profile";
    const RateModel m = detail::workhorse(opt);
    const auto fixed = solve_fixed_point(m, 1e-10);
    const auto eq = stationary_distribution(chain_rates(m, fixed.s_star), 1e-12);

    const std::int64_t N = 128;
    bool ok = true;
    std::string detail_text;
    double worst_defect = 0.0;
    for (const auto& [label, state] :
         {std::pair<std::string, TruncatedState>{"delta_1", delta_state(N, 1)},
          {"delta_5", delta_state(N, 5)},
          {"uniform_0_10", uniform_state(N, 10)}}) {
        const auto out = detail::converge_to(m, state, eq.pi, 1e-3, 50.0, 500.0);
        worst_defect = std::max(worst_defect, out.mass_defect);
        ok = ok && out.distance < 1e-3;
        detail_text += label + ": d = " + detail::fmt(out.distance) + " at T = " + detail::fmt(out.T) + "; ";
    }

    const RateModel sub = bundled::linear_subcritical();
    const auto ext = detail::converge_to(sub, delta_state(64, 5), {1.0}, 1e-4, 10.0, 100.0);
    worst_defect = std::max(worst_defect, ext.mass_defect);
    ok = ok && ext.distance < 1e-4;
    detail_text += "extinct: d = " + detail::fmt(ext.distance) + " at T = " + detail::fmt(ext.T);

    res.seconds = timer.elapsed();
    res.pass = ok && worst_defect < 1e-9 && res.seconds < 300.0;
    res.detail = detail_text + "; max mass defect = " + detail::fmt(worst_defect);
    return res;
}

/// 7. Scalar comparison bounds along integrated trajectories.
inline CheckResult criterion_comparison_bounds(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "scalar comparison envelopes";
    bool ok = true;
    double worst = -std::numeric_limits<double>::infinity();
    IntegrateControls ctl;
    ctl.dt_sample = 0.5;
    const RateModel m = detail::workhorse(opt);
    const double st = s_tilde(m);
    try {
        for (const auto& state : {delta_state(128, 5), uniform_state(128, 10), delta_state(128, 1)}) {
            const auto traj = integrate(m, state, 60.0, ctl);
            const auto rep = comparison_bound_check(m, traj, st, 1e-6);
            worst = std::max({worst, rep.worst_envelope_defect, rep.worst_cap_excess});
        }
        const RateModel sub = bundled::linear_subcritical();
        const auto traj = integrate(sub, delta_state(64, 5), 30.0, ctl);
        const auto rep = comparison_bound_check(sub, traj, s_tilde(sub), 1e-6);
        worst = std::max({worst, rep.worst_envelope_defect, rep.worst_cap_excess});
    } catch (const ComparisonViolated& e) {
        ok = false;
        res.detail = e.what();
    }
    res.seconds = timer.elapsed();
    res.pass = ok && worst <= 1e-6;
    if (ok) res.detail = "worst envelope/cap excess = " + detail::fmt(worst);
    return res;
}

/// 8. Finite metapopulation tracks the deterministic limit.
inline CheckResult criterion_meanfield_agreement(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "finite-system agreement with the deterministic limit";
    const RateModel m = detail::workhorse(opt);
    const std::int64_t n = 2000;  // the band is calibrated for this size
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(5.0 * i);

    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto traj = integrate(m, delta_state(128, 1), 50.0, ctl);

    int violations = 0;
    double worst_ratio = 0.0;
    const int seeds = opt.quick ? 1 : 3;
    for (int sd = 0; sd < seeds; ++sd) {
        std::vector<std::int64_t> hist{0, n};
        const auto run =
            simulate_metapopulation(m, n, hist, 50.0, opt.seed + static_cast<std::uint64_t>(sd), grid, 10);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            std::size_t idx = 0;
            for (std::size_t q = 0; q < traj.samples.size(); ++q)
                if (std::fabs(traj.samples[q].t - grid[k]) < 1e-9) idx = q;
            for (std::size_t i = 0; i <= 10; ++i) {
                const double p = traj.samples[idx].p[i];
                const double band =
                    3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) + 2e-2;
                const double err = std::fabs(run.freq[k][i] - p);
                worst_ratio = std::max(worst_ratio, err / band);
                if (err > band) ++violations;
            }
        }
    }
    res.seconds = timer.elapsed();
    res.pass = violations == 0 && res.seconds < 300.0;
    res.detail = "violations = " + std::to_string(violations) +
                 ", worst error/band = " + detail::fmt(worst_ratio) + " (n = " + std::to_string(n) +
                 ", " + std::to_string(seeds) + " seed(s))";
    return res;
}

/// 9. Coupling suite: pathwise domination, the catastrophe-clock bound on
/// strict order, and strictly negative CRN second differences.
inline CheckResult criterion_coupling(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "coupling suite";
    const RateModel m = detail::workhorse(opt);
    const std::vector<double> grid{0.5, 1.0, 2.0};
    bool ok = true;
    std::string text;

    const std::uint64_t pair_reps = opt.quick ? 2000 : 10000;
    const auto pair = coupled_pair_run(m, 1.0, 3, 1, grid, pair_reps, opt.seed);
    ok = ok && pair.domination_violations == 0 && pair.events > 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = pair.prob_strict[i];
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(pair_reps));
        worst_excess = std::max(worst_excess, p - (std::exp(-m.nu * grid[i]) + 3.0 * se));
    }
    ok = ok && worst_excess <= 0.0;
    text += "domination ok over " + std::to_string(pair.events) + " events; max P-bound excess = " +
            detail::fmt(worst_excess);

    // quick mode restricts to the well-powered cells instead of weakening
    // the confidence level
    const std::uint64_t crn_reps = opt.quick ? 200000 : 1500000;
    const std::int64_t m_hi = opt.quick ? 2 : 5;
    const std::vector<double> crn_grid = opt.quick ? std::vector<double>{0.5, 1.0} : grid;
    const auto sd = second_difference_experiment(m, 0.5, 0, m_hi, crn_grid, crn_reps, opt.seed + 17);
    double worst_upper = -std::numeric_limits<double>::infinity();
    for (std::size_t mi = 0; mi < sd.second_difference.size(); ++mi)
        for (std::size_t ti = 0; ti < crn_grid.size(); ++ti)
            worst_upper = std::max(worst_upper, sd.second_difference[mi][ti] +
                                                    3.0 * sd.second_difference_se[mi][ti]);
    ok = ok && worst_upper < 0.0;
    text += "; max (second diff + 3 SE) = " + detail::fmt(worst_upper) + " over m=0.." +
            std::to_string(m_hi) + ", " + std::to_string(crn_reps) + " paths";

    res.seconds = timer.elapsed();
    res.pass = ok;
    res.detail = text;
    return res;
}

/// 10. Oracle equivalence: renewal-identity resolvent vs the balance solve,
/// and truncation-independence of trajectories.
inline CheckResult criterion_oracle_equivalence(const VerifyOptions& opt) {
    detail::Timer timer;
    CheckResult res;
    res.name = "oracle equivalence";
    double worst_m1 = 0.0;
    const std::vector<std::pair<RateModel, std::vector<double>>> pairs = {
        {bundled::linear_catastrophe(), {0.5, 2.0}},
        {detail::workhorse(opt), {0.5, 1.0, 2.0}},
        {bundled::logistic_mild(), {1.0}},
        {bundled::curved_table(), {1.0}},
    };
    for (const auto& [m, s_values] : pairs)
        for (double s : s_values) {
            const auto direct = stationary_distribution(chain_rates(m, s), 1e-12);
            const auto oracle = renewal_identity_oracle(m, s, 1e-12);
            worst_m1 = std::max(worst_m1, m1_distance(direct.pi, oracle.pi));
        }

    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const RateModel m = detail::workhorse(opt);
    const auto a = integrate(m, delta_state(96, 1), 20.0, ctl);
    const auto b = integrate(m, delta_state(192, 1), 20.0, ctl);
    double worst_traj = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k)
        worst_traj = std::max(worst_traj, m1_distance(a.samples[k].p, b.samples[k].p));

    res.seconds = timer.elapsed();
    res.pass = worst_m1 < 1e-9 && worst_traj < 1e-6;
    res.detail = "max m1(balance, renewal) = " + detail::fmt(worst_m1) +
                 ", max m1(N, 2N) = " + detail::fmt(worst_traj);
    return res;
}

/// 11. Models violating the tail condition admit no equilibrium and the
/// threshold solver refuses them.
inline CheckResult criterion_no_equilibrium(const VerifyOptions&) {
    detail::Timer timer;
    CheckResult res;
    res.name = "no equilibrium without the tail condition";
    const RateModel m = bundled::h2_violating();
    bool refused = false;
    try {
        solve_fixed_point(m);
    } catch (const InvalidModel&) {
        refused = true;
    }
    const auto diag = no_equilibrium_when_h2_fails(m, {0.5, 1.0, 2.0, 4.0});
    const auto boundary = no_equilibrium_when_h2_fails(bundled::h2_boundary(), {0.5, 1.0, 2.0});
    res.seconds = timer.elapsed();
    res.pass = refused && diag.g_dominates_identity && boundary.g_dominates_identity;
    res.detail = std::string("solver refused = ") + (refused ? "yes" : "no") +
                 ", min G(s)/s = " + detail::fmt(diag.worst_ratio) +
                 " (boundary case " + detail::fmt(boundary.worst_ratio) + ")";
    return res;
}

inline CheckResult run_criterion(int index, const VerifyOptions& opt) {
    switch (index) {
        case 1: return criterion_closed_form_mean(opt);
        case 2: return criterion_closed_form_r0(opt);
        case 3: return criterion_threshold_dichotomy(opt);
        case 4: return criterion_g_concavity(opt);
        case 5: return criterion_spectral(opt);
        case 6: return criterion_convergence(opt);
        case 7: return criterion_comparison_bounds(opt);
        case 8: return criterion_meanfield_agreement(opt);
        case 9: return criterion_coupling(opt);
        case 10: return criterion_oracle_equivalence(opt);
        case 11: return criterion_no_equilibrium(opt);
        default: throw InvalidArgument("criterion index must be 1..11");
    }
}

constexpr int criterion_count = 11;

/// Runs every criterion; an exception inside a criterion is reported as a
/// red check rather than aborting the suite.
inline std::vector<CheckResult> run_all(const VerifyOptions& opt) {
    std::vector<CheckResult> results;
    for (int i = 1; i <= criterion_count; ++i) {
        try {
            results.push_back(run_criterion(i, opt));
        } catch (const std::exception& e) {
            CheckResult res;
            res.name = "criterion " + std::to_string(i);
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
            results.push_back(res);
        }
    }
    return results;
}

}  // namespace metapop::verify

#endif  // METAPOP_VERIFY_HPP
