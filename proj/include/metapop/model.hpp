#ifndef METAPOP_MODEL_HPP
#define METAPOP_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metapop/errors.hpp"

namespace metapop {

enum class RateFamily { constant, table, logistic_death };

inline const char* to_string(RateFamily f) {
    switch (f) {
        case RateFamily::constant: return "constant";
        case RateFamily::table: return "table";
        case RateFamily::logistic_death: return "logistic_death";
    }
    return "?";
}

/// Per-capita birth/death rate sequences b_i, d_i (i >= 1) with declared
/// limits, plus the patch-level parameters: migration rate gamma, catastrophe
/// rate nu, migrant success probability rho. Immutable after construction;
/// all operations on it are pure, so instances can be shared across threads.
///
/// b_0 is intentionally undefined: state 0 has no birth events (the total
/// birth rate in state i is i*b_i, which vanishes at i = 0), so no operation
/// ever evaluates it.
struct RateModel {
    RateFamily family = RateFamily::constant;

    // constant family: b_i = base_birth, d_i = base_death.
    // logistic_death family: b_i = base_birth, d_i = base_death + crowding*(i-1)/i.
    double base_birth = 0.0;
    double base_death = 0.0;
    double crowding = 0.0;

    // table family: entries for i = 1..K; beyond K the total rates i*b_i and
    // i*d_i continue linearly with slopes b_inf and d_inf, i.e.
    //   b_i = b_inf + K*(b_K - b_inf)/i   for i > K,
    // which is the unique continuation that approaches the declared limit
    // while keeping i*b_i piecewise linear.
    std::vector<double> birth_table;
    std::vector<double> death_table;

    double b_inf = 0.0;
    double d_inf = 0.0;

    double gamma = 0.0;
    double nu = 0.0;
    double rho = 1.0;

    /// b_i for i >= 1.
    double birth(std::int64_t i) const {
        switch (family) {
            case RateFamily::constant:
            case RateFamily::logistic_death:
                return base_birth;
            case RateFamily::table: {
                const auto k = static_cast<std::int64_t>(birth_table.size());
                if (i <= k) return birth_table[static_cast<std::size_t>(i - 1)];
                const double bk = birth_table.back();
                return b_inf + static_cast<double>(k) * (bk - b_inf) / static_cast<double>(i);
            }
        }
        return 0.0;
    }

    /// d_i for i >= 1.
    double death(std::int64_t i) const {
        switch (family) {
            case RateFamily::constant:
                return base_death;
            case RateFamily::logistic_death:
                return base_death + crowding * static_cast<double>(i - 1) / static_cast<double>(i);
            case RateFamily::table: {
                const auto k = static_cast<std::int64_t>(death_table.size());
                if (i <= k) return death_table[static_cast<std::size_t>(i - 1)];
                const double dk = death_table.back();
                return d_inf - static_cast<double>(k) * (d_inf - dk) / static_cast<double>(i);
            }
        }
        return 0.0;
    }

    bool normalized() const { return rho == 1.0; }
};

/// Outcome of the hypothesis checks. margin > 0 is equivalent to h2_holds.
struct HypothesisReport {
    bool h1_holds = false;
    bool h2_holds = false;
    std::optional<std::int64_t> first_violation_index;
    double margin = 0.0;    ///< d_inf + gamma*(1-rho) + nu - b_inf
    double tail_gap = 0.0;  ///< nu + d_inf - b_inf (the margin of the rho=1 form)
};

namespace detail {

inline void require_rate(double v, const std::string& what) {
    if (!std::isfinite(v) || v < 0.0)
        throw InvalidModel(what + " must be finite and nonnegative, got " + std::to_string(v));
}

}  // namespace detail

/// Parameter blocks for the three families.
struct ConstantParams {
    double b = 0.0, d = 0.0;
};
struct LogisticDeathParams {
    double b0 = 0.0, d0 = 0.0, delta = 0.0;
};
struct TableParams {
    std::vector<double> b, d;
    std::optional<double> b_inf, d_inf;
};

inline RateModel build_rate_model(const ConstantParams& p, double gamma, double nu, double rho) {
    detail::require_rate(p.b, "b");
    detail::require_rate(p.d, "d");
    detail::require_rate(gamma, "gamma");
    detail::require_rate(nu, "nu");
    if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0)
        throw InvalidModel("rho must lie in [0,1]");
    RateModel m;
    m.family = RateFamily::constant;
    m.base_birth = p.b;
    m.base_death = p.d;
    m.b_inf = p.b;
    m.d_inf = p.d;
    m.gamma = gamma;
    m.nu = nu;
    m.rho = rho;
    return m;
}

inline RateModel build_rate_model(const LogisticDeathParams& p, double gamma, double nu, double rho) {
    detail::require_rate(p.b0, "b0");
    detail::require_rate(p.d0, "d0");
    detail::require_rate(p.delta, "delta");
    detail::require_rate(gamma, "gamma");
    detail::require_rate(nu, "nu");
    if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0)
        throw InvalidModel("rho must lie in [0,1]");
    RateModel m;
    m.family = RateFamily::logistic_death;
    m.base_birth = p.b0;
    m.base_death = p.d0;
    m.crowding = p.delta;
    m.b_inf = p.b0;
    m.d_inf = p.d0 + p.delta;
    m.gamma = gamma;
    m.nu = nu;
    m.rho = rho;
    return m;
}

inline RateModel build_rate_model(const TableParams& p, double gamma, double nu, double rho) {
    if (p.b.empty() || p.d.empty()) throw InvalidModel("table family needs nonempty b and d tables");
    if (!p.b_inf || !p.d_inf)
        throw InvalidModel("table family requires declared limits b_inf and d_inf");
    for (double v : p.b) detail::require_rate(v, "b table entry");
    for (double v : p.d) detail::require_rate(v, "d table entry");
    detail::require_rate(*p.b_inf, "b_inf");
    detail::require_rate(*p.d_inf, "d_inf");
    detail::require_rate(gamma, "gamma");
    detail::require_rate(nu, "nu");
    if (!std::isfinite(rho) || rho < 0.0 || rho > 1.0)
        throw InvalidModel("rho must lie in [0,1]");
    RateModel m;
    m.family = RateFamily::table;
    m.birth_table = p.b;
    m.death_table = p.d;
    m.b_inf = *p.b_inf;
    m.d_inf = *p.d_inf;
    m.gamma = gamma;
    m.nu = nu;
    m.rho = rho;
    return m;
}

/// Checks both hypotheses on the prefix 1..n_check plus the declared limits:
///   - total birth rate i*b_i nondecreasing and concave,
///     total death rate i*d_i nondecreasing and convex (by differences);
///   - per-capita b_i nonincreasing toward b_inf, d_i nondecreasing toward d_inf;
///   - margin d_inf + gamma*(1-rho) + nu - b_inf > 0.
/// Comparisons carry a relative slack of 1e-9 so that valid closed-form
/// families are not flagged by rounding.
inline HypothesisReport check_hypotheses(const RateModel& m, std::int64_t n_check = 64) {
    if (n_check < 3) throw InvalidArgument("n_check must be >= 3");
    HypothesisReport rep;
    rep.margin = m.d_inf + m.gamma * (1.0 - m.rho) + m.nu - m.b_inf;
    rep.tail_gap = m.nu + m.d_inf - m.b_inf;
    rep.h2_holds = rep.margin > 0.0;

    rep.h1_holds = true;
    auto flag = [&](std::int64_t i) {
        if (rep.h1_holds) {
            rep.h1_holds = false;
            rep.first_violation_index = i;
        }
    };
    auto slack = [](double a, double b) { return 1e-9 * (1.0 + std::fabs(a) + std::fabs(b)); };

    for (std::int64_t i = 1; i <= n_check && rep.h1_holds; ++i) {
        const double bi = m.birth(i), di = m.death(i);
        // monotone approach to the declared limits
        if (bi < m.b_inf - slack(bi, m.b_inf) || di > m.d_inf + slack(di, m.d_inf)) {
            flag(i);
            break;
        }
        if (i < n_check) {
            const double bn = m.birth(i + 1), dn = m.death(i + 1);
            if (bn > bi + slack(bi, bn)) flag(i);  // b_i must be nonincreasing
            if (dn < di - slack(di, dn)) flag(i);  // d_i must be nondecreasing
            const double tb0 = static_cast<double>(i) * bi;
            const double tb1 = static_cast<double>(i + 1) * bn;
            const double td0 = static_cast<double>(i) * di;
            const double td1 = static_cast<double>(i + 1) * dn;
            if (tb1 < tb0 - slack(tb0, tb1)) flag(i);  // i*b_i nondecreasing
            if (td1 < td0 - slack(td0, td1)) flag(i);  // i*d_i nondecreasing
            if (i + 2 <= n_check + 1) {
                const double tb2 = static_cast<double>(i + 2) * m.birth(i + 2);
                const double td2 = static_cast<double>(i + 2) * m.death(i + 2);
                if (tb2 - 2.0 * tb1 + tb0 > slack(tb0, tb2)) flag(i);  // concavity of i*b_i
                if (td2 - 2.0 * td1 + td0 < -slack(td0, td2)) flag(i);  // convexity of i*d_i
            }
        }
    }
    return rep;
}

inline HypothesisReport check_h1(const RateModel& m, std::int64_t n_check) {
    return check_hypotheses(m, n_check);
}

inline HypothesisReport check_h2(const RateModel& m) { return check_hypotheses(m); }

/// Folds the migrant failure probability into the death rates:
/// d_i' = d_i + gamma*(1-rho), gamma' = gamma*rho, rho' = 1. Unsuccessful
/// migration is just one more cause of death, so the folded model generates
/// the same dynamics. Idempotent when rho = 1.
inline RateModel normalize_rho(const RateModel& m) {
    if (m.rho == 1.0) return m;
    RateModel out = m;
    const double shift = m.gamma * (1.0 - m.rho);
    out.base_death += shift;  // constant & logistic_death
    for (double& v : out.death_table) v += shift;
    out.d_inf += shift;
    out.gamma = m.gamma * m.rho;
    out.rho = 1.0;
    return out;
}

/// Continuous extension of the rate sequences: the total rates x*b(x), x*d(x)
/// interpolate i*b_i, i*d_i piecewise linearly between integer nodes (with
/// node 0 carrying total rate 0), and the per-capita rates divide by x. This
/// keeps x*b(x) concave and x*d(x) convex whenever the discrete sequences
/// satisfy the corresponding difference conditions. Below x = 1 the
/// per-capita rates are the constants b_1, d_1.
class ContinuousRates {
  public:
    explicit ContinuousRates(const RateModel& m, std::int64_t n_check = 64) : model_(m) {
        const auto rep = check_hypotheses(m, n_check);
        if (!rep.h1_holds)
            throw InvalidModel("continuous extension requires the concavity/convexity hypothesis; "
                               "first violation at index " +
                               std::to_string(rep.first_violation_index.value_or(-1)));
    }

    double birth(double x) const { return per_capita(x, /*is_birth=*/true); }
    double death(double x) const { return per_capita(x, /*is_birth=*/false); }

    /// Total birth rate x*b(x) (piecewise-linear interpolant, 0 at x = 0).
    double total_birth(double x) const { return total(x, true); }
    /// Total death rate x*d(x).
    double total_death(double x) const { return total(x, false); }

    const RateModel& model() const { return model_; }

  private:
    double total(double x, bool is_birth) const {
        if (!(x >= 0.0)) throw InvalidArgument("continuous rates defined for x >= 0");
        if (x == 0.0) return 0.0;
        const auto lo = static_cast<std::int64_t>(std::floor(x));
        if (lo < 1) {
            // Node 0 has total rate 0, node 1 has b_1 (resp. d_1).
            const double node1 = is_birth ? model_.birth(1) : model_.death(1);
            return x * node1;
        }
        const double theta = x - static_cast<double>(lo);
        const double f0 = static_cast<double>(lo) * (is_birth ? model_.birth(lo) : model_.death(lo));
        if (theta == 0.0) return f0;
        const double f1 =
            static_cast<double>(lo + 1) * (is_birth ? model_.birth(lo + 1) : model_.death(lo + 1));
        return (1.0 - theta) * f0 + theta * f1;
    }

    double per_capita(double x, bool is_birth) const {
        if (!(x >= 0.0)) throw InvalidArgument("continuous rates defined for x >= 0");
        if (x < 1.0) return is_birth ? model_.birth(1) : model_.death(1);
        return total(x, is_birth) / x;
    }

    RateModel model_;
};

inline ContinuousRates continuous_extension(const RateModel& m, std::int64_t n_check = 64) {
    return ContinuousRates(m, n_check);
}

}  // namespace metapop

#endif  // METAPOP_MODEL_HPP
