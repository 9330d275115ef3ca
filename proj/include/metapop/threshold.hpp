#ifndef METAPOP_THRESHOLD_HPP
#define METAPOP_THRESHOLD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "metapop/chain.hpp"
#include "metapop/errors.hpp"
#include "metapop/model.hpp"

namespace metapop {

enum class Persistence { extinct, persistent, critical };

inline const char* to_string(Persistence c) {
    switch (c) {
        case Persistence::extinct: return "extinct";
        case Persistence::persistent: return "persistent";
        case Persistence::critical: return "critical";
    }
    return "?";
}

struct ThresholdReport {
    double r0 = 0.0;
    double s_star = 0.0;
    Persistence classification = Persistence::extinct;
    double s_tilde = 0.0;
    int iterations = 0;
    double residual = 0.0;  ///< |G(s*) - s*|
};

/// Upper bound for the equilibrium mean: the first level at which local
/// decline beats local growth, inf{s > 0 : b(s) < d(s) + nu} on the
/// continuous extension. The gap d(x) + nu - b(x) is nondecreasing, so a
/// doubling search plus bisection locates the crossing. Returns 0 when the
/// gap is already positive at 0+.
inline double s_tilde(const RateModel& model, double tol = 1e-12) {
    const HypothesisReport hyp = check_hypotheses(model);
    if (!hyp.h2_holds)
        throw NoBound("the crossing set is empty unless the tail condition holds (margin = " +
                      std::to_string(hyp.margin) + ")");
    const ContinuousRates rates(model);
    auto gap = [&](double x) { return rates.death(x) + model.nu - rates.birth(x); };

    if (gap(0.0) > 0.0) return 0.0;
    double hi = 1.0;
    int grow = 0;
    while (gap(hi) <= 0.0) {
        hi *= 2.0;
        if (++grow > 1024) throw NoBound("no crossing found while growing the bracket");
    }
    double lo = 0.0;
    while (hi - lo > tol * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

/// Solves s = G(s). A reproduction number at or below the critical band
/// forces the extinction answer s* = 0; otherwise the unique positive fixed
/// point is bracketed (G is concave with G(0) = 0 and sublinear growth, so
/// G - id changes sign exactly once on (0, infinity)) and bisected.
inline ThresholdReport solve_fixed_point(const RateModel& model, double tol = default_report_tol,
                                         const TruncationPolicy& policy = {}) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (!model.normalized()) throw InvalidModel("fixed-point solve requires a normalized model");
    const HypothesisReport hyp = check_hypotheses(model);
    if (!hyp.h2_holds)
        throw InvalidModel("fixed-point solve requires the tail condition; use the no-equilibrium "
                           "diagnostic for violating models");

    ThresholdReport rep;
    rep.s_tilde = s_tilde(model);
    const double solve_tol = std::min(tol, default_solve_tol);
    rep.r0 = r0(model, solve_tol, policy);

    if (rep.r0 <= 1.0 + critical_band) {
        rep.classification = std::fabs(rep.r0 - 1.0) < critical_band ? Persistence::critical
                                                                     : Persistence::extinct;
        rep.s_star = 0.0;
        rep.residual = 0.0;
        return rep;
    }
    rep.classification = Persistence::persistent;

    auto G = [&](double s) { return mean_G(model, s, solve_tol, policy); };

    double s_lo = std::min(0.1, rep.s_tilde > 0.0 ? rep.s_tilde / 100.0 : 0.1);
    int halvings = 0;
    while (G(s_lo) <= s_lo) {
        s_lo *= 0.5;
        if (++halvings > 60)
            throw FixedPointFailure("no strictly expanding point found near 0 despite R0 > 1");
        ++rep.iterations;
    }

    double s_hi = std::max(rep.s_tilde * 1.05, s_lo * 2.0);
    int growths = 0;
    while (G(s_hi) >= s_hi) {
        s_hi *= 2.0;
        if (++growths > 60) throw FixedPointFailure("upper bracket growth cap exceeded; G looks superlinear");
        ++rep.iterations;
    }

    double g_mid = 0.0, mid = 0.5 * (s_lo + s_hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (s_lo + s_hi);
        g_mid = G(mid);
        ++rep.iterations;
        if (std::fabs(g_mid - mid) < tol && s_hi - s_lo < tol * (1.0 + mid)) break;
        if (g_mid > mid)
            s_lo = mid;
        else
            s_hi = mid;
    }
    rep.s_star = mid;
    rep.residual = std::fabs(g_mid - mid);
    if (rep.residual > tol)
        throw FixedPointFailure("fixed-point residual " + std::to_string(rep.residual) +
                                " above tolerance after bisection");
    return rep;
}

/// Diagnostic for models violating the tail condition: G(s) >= s on the
/// sampled grid, so no positive fixed point exists and no ThresholdReport is
/// produced.
struct NoEquilibriumDiagnostic {
    std::vector<double> grid;
    std::vector<double> g_values;
    bool g_dominates_identity = false;  ///< G(s) >= s (within slack) across the grid
    double worst_ratio = 0.0;           ///< min of G(s)/s over the grid
};

inline NoEquilibriumDiagnostic no_equilibrium_when_h2_fails(const RateModel& model,
                                                            const std::vector<double>& s_grid,
                                                            double tol = default_report_tol,
                                                            const TruncationPolicy& policy = {}) {
    const HypothesisReport hyp = check_hypotheses(model);
    if (hyp.h2_holds)
        throw InvalidArgument("model satisfies the tail condition; use solve_fixed_point instead");
    if (s_grid.empty()) throw InvalidArgument("grid must be nonempty");

    NoEquilibriumDiagnostic diag;
    diag.grid = s_grid;
    diag.worst_ratio = std::numeric_limits<double>::infinity();
    diag.g_dominates_identity = true;
    for (double s : s_grid) {
        if (!(s > 0.0)) throw InvalidArgument("grid points must be positive");
        const double g = mean_G(model, s, std::min(tol, default_solve_tol), policy);
        diag.g_values.push_back(g);
        diag.worst_ratio = std::min(diag.worst_ratio, g / s);
        if (g < s * (1.0 - 1e-9) - tol) diag.g_dominates_identity = false;
    }
    return diag;
}

}  // namespace metapop

#endif  // METAPOP_THRESHOLD_HPP
