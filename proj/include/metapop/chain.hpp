#ifndef METAPOP_CHAIN_HPP
#define METAPOP_CHAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metapop/errors.hpp"
#include "metapop/model.hpp"
#include "metapop/tridiag.hpp"

namespace metapop {

constexpr double default_solve_tol = 1e-10;
constexpr double default_report_tol = 1e-8;
/// Half-width of the band around R0 = 1 classified as critical.
constexpr double critical_band = 1e-6;

/// Transition rates of the single-patch chain with immigration level s:
/// j -> j+1 at rate j*b_j + gamma*s, j -> j-1 at rate j*(d_j + gamma),
/// j -> 0 at rate nu. Requires a normalized (rho = 1) model.
struct ChainSpec {
    RateModel model;
    double s = 0.0;

    double up(std::int64_t j) const {
        if (j == 0) return model.gamma * s;
        return static_cast<double>(j) * model.birth(j) + model.gamma * s;
    }
    double down(std::int64_t j) const {
        if (j == 0) return 0.0;
        return static_cast<double>(j) * (model.death(j) + model.gamma);
    }
    double kill() const { return model.nu; }
};

inline ChainSpec chain_rates(const RateModel& model, double s) {
    if (!model.normalized())
        throw InvalidModel("chain rates require a normalized model (rho = 1); call normalize_rho first");
    if (!(s >= 0.0)) throw InvalidArgument("immigration level s must be >= 0");
    return ChainSpec{model, s};
}

struct TruncationPolicy {
    std::int64_t initial = 64;
    std::int64_t max = std::int64_t{1} << 20;
};

/// Truncated stationary distribution pi_0..pi_N with its mean.
struct EquilibriumSolution {
    std::vector<double> pi;
    double mean = 0.0;
    std::int64_t N = 0;
    double tail_mass = 0.0;  ///< occupancy-weighted mass in the top sqrt(N) states
    double residual = 0.0;   ///< sup-norm stationarity defect on the truncated generator
    double s = 0.0;
};

/// Occupancy-weighted distance |p_0 - q_0| + sum_{j>=1} j |p_j - q_j|.
/// Vectors of different lengths are compared with zero padding.
inline double m1_distance(const std::vector<double>& p, const std::vector<double>& q) {
    const std::size_t n = std::max(p.size(), q.size());
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double pj = j < p.size() ? p[j] : 0.0;
        const double qj = j < q.size() ? q[j] : 0.0;
        d += (j == 0 ? 1.0 : static_cast<double>(j)) * std::fabs(pj - qj);
    }
    return d;
}

namespace detail {

/// Sup-norm of pi*Q over the truncated generator (tridiagonal birth-death
/// part plus the catastrophe column into state 0; upward flux at N dropped).
inline double stationarity_residual(const ChainSpec& spec, const std::vector<double>& pi) {
    const auto N = static_cast<std::int64_t>(pi.size()) - 1;
    const double nu = spec.kill();
    double worst = 0.0;
    double occupied = 0.0;
    for (std::int64_t j = 1; j <= N; ++j) occupied += pi[static_cast<std::size_t>(j)];
    for (std::int64_t j = 0; j <= N; ++j) {
        double flow;
        if (j == 0) {
            flow = spec.down(1) * (N >= 1 ? pi[1] : 0.0) + nu * occupied - spec.up(0) * pi[0];
        } else {
            flow = spec.up(j - 1) * pi[static_cast<std::size_t>(j - 1)] -
                   ((j < N ? spec.up(j) : 0.0) + spec.down(j) + nu) * pi[static_cast<std::size_t>(j)];
            if (j < N) flow += spec.down(j + 1) * pi[static_cast<std::size_t>(j + 1)];
        }
        worst = std::max(worst, std::fabs(flow));
    }
    return worst;
}

inline double weighted_tail(const std::vector<double>& pi) {
    const auto N = static_cast<std::int64_t>(pi.size()) - 1;
    const auto width = static_cast<std::int64_t>(std::sqrt(static_cast<double>(N)));
    double tail = 0.0;
    for (std::int64_t j = std::max<std::int64_t>(1, N - width + 1); j <= N; ++j)
        tail += static_cast<double>(j) * pi[static_cast<std::size_t>(j)];
    return tail;
}

inline double weighted_mean(const std::vector<double>& pi) {
    double m = 0.0;
    for (std::size_t j = 1; j < pi.size(); ++j) m += static_cast<double>(j) * pi[j];
    return m;
}

/// Detailed-balance product form, valid when nu = 0:
/// (j b_j + gamma s) pi_j = (j+1)(d_{j+1} + gamma) pi_{j+1}.
inline std::vector<double> product_form(const ChainSpec& spec, std::int64_t N) {
    std::vector<double> pi(static_cast<std::size_t>(N + 1), 0.0);
    pi[0] = 1.0;
    double sum = 1.0;
    for (std::int64_t j = 0; j < N; ++j) {
        const double dn = spec.down(j + 1);
        if (dn <= 0.0) throw TruncationDiverged("product form: vanishing downward rate");
        pi[static_cast<std::size_t>(j + 1)] = pi[static_cast<std::size_t>(j)] * spec.up(j) / dn;
        sum += pi[static_cast<std::size_t>(j + 1)];
        if (!std::isfinite(sum)) throw TruncationDiverged("product form overflow; tail does not decay");
    }
    for (double& v : pi) v /= sum;
    return pi;
}

}  // namespace detail

/// Solves the truncated global-balance system for the stationary distribution.
/// The balance rows for states 1..N form a tridiagonal system once pi_0 is
/// used as the free scale (the state-0 row is implied by conservation and the
/// normalization replaces it). The truncation level grows geometrically until
/// the occupancy-weighted mass of the top sqrt(N) states and the stationarity
/// defect both drop below tol.
///
/// s = 0 returns the point mass at 0 exactly. For nu = 0 the detailed-balance
/// product form is computed as well and must agree componentwise.
inline EquilibriumSolution stationary_distribution(const ChainSpec& spec, double tol = default_solve_tol,
                                                   const TruncationPolicy& policy = {}) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    EquilibriumSolution out;
    out.s = spec.s;
    if (spec.s == 0.0) {
        out.pi = {1.0};
        return out;
    }

    const double nu = spec.kill();
    for (std::int64_t N = policy.initial; N <= policy.max; N *= 2) {
        const auto n = static_cast<std::size_t>(N);
        Tridiagonal sys(n);
        std::vector<double> rhs(n, 0.0);
        for (std::int64_t j = 1; j <= N; ++j) {
            const auto k = static_cast<std::size_t>(j - 1);
            sys.diag[k] = -((j < N ? spec.up(j) : 0.0) + spec.down(j) + nu);
            if (j > 1) sys.sub[k] = spec.up(j - 1);
            if (j < N) sys.sup[k] = spec.down(j + 1);
        }
        rhs[0] = -spec.up(0);  // pi_0 = 1 seed

        std::vector<double> x = solve_tridiagonal(sys, std::move(rhs));

        std::vector<double> pi(n + 1);
        pi[0] = 1.0;
        double sum = 1.0;
        bool finite = true;
        for (std::size_t k = 0; k < n; ++k) {
            pi[k + 1] = std::max(x[k], 0.0);
            sum += pi[k + 1];
            finite = finite && std::isfinite(pi[k + 1]);
        }
        if (!finite || !std::isfinite(sum))
            throw TruncationDiverged("stationary solve overflow at N = " + std::to_string(N));
        for (double& v : pi) v /= sum;

        const double tail = detail::weighted_tail(pi);
        const double residual = detail::stationarity_residual(spec, pi);
        if (tail < tol && residual < tol) {
            if (nu == 0.0) {
                const auto pf = detail::product_form(spec, N);
                for (std::size_t k = 0; k <= n; ++k)
                    if (std::fabs(pf[k] - pi[k]) > tol)
                        throw InternalCheckFailure(
                            "detailed-balance product form deviates from the balance solve at state " +
                            std::to_string(k));
            }
            out.pi = std::move(pi);
            out.mean = detail::weighted_mean(out.pi);
            out.N = N;
            out.tail_mass = tail;
            out.residual = residual;
            return out;
        }
    }
    throw TruncationDiverged("stationary distribution tail did not decay below tolerance by N = " +
                             std::to_string(policy.max));
}

/// Mean of the stationary distribution, G(s). G(0) = 0 exactly.
inline double mean_G(const RateModel& model, double s, double tol = default_solve_tol,
                     const TruncationPolicy& policy = {}) {
    if (s == 0.0) return 0.0;
    return stationary_distribution(chain_rates(model, s), tol, policy).mean;
}

/// Independent computation of the stationary distribution through the
/// regeneration identity: between catastrophes the chain runs without
/// killing and restarts from 0, so its equilibrium law is the
/// exponential-sampling resolvent  nu * (nu I - Q_X)^{-1} applied to the
/// point mass at 0, where Q_X drops the catastrophe column entirely.
/// Used as a cross-check oracle for stationary_distribution.
inline EquilibriumSolution renewal_identity_oracle(const RateModel& model, double s,
                                                   double tol = default_solve_tol,
                                                   const TruncationPolicy& policy = {}) {
    const ChainSpec spec = chain_rates(model, s);
    const double nu = spec.kill();
    if (!(nu > 0.0)) throw InvalidArgument("renewal identity needs nu > 0 (no regeneration otherwise)");
    if (!(s > 0.0)) throw InvalidArgument("renewal identity oracle requires s > 0");
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");

    for (std::int64_t N = policy.initial; N <= policy.max; N *= 2) {
        const auto n = static_cast<std::size_t>(N + 1);
        Tridiagonal sys(n);
        std::vector<double> rhs(n, 0.0);
        for (std::int64_t i = 0; i <= N; ++i) {
            const auto k = static_cast<std::size_t>(i);
            sys.diag[k] = nu + (i < N ? spec.up(i) : 0.0) + spec.down(i);
            if (i > 0) sys.sub[k] = -spec.up(i - 1);
            if (i < N) sys.sup[k] = -spec.down(i + 1);
        }
        rhs[0] = nu;

        std::vector<double> p = solve_tridiagonal(sys, std::move(rhs));
        double sum = 0.0;
        for (double& v : p) {
            v = std::max(v, 0.0);
            sum += v;
        }
        if (!std::isfinite(sum) || sum <= 0.0)
            throw TruncationDiverged("renewal resolvent overflow at N = " + std::to_string(N));
        for (double& v : p) v /= sum;

        const double tail = detail::weighted_tail(p);
        const double residual = detail::stationarity_residual(spec, p);
        if (tail < tol && residual < tol) {
            EquilibriumSolution out;
            out.pi = std::move(p);
            out.mean = detail::weighted_mean(out.pi);
            out.N = N;
            out.tail_mass = tail;
            out.residual = residual;
            out.s = s;
            return out;
        }
    }
    throw TruncationDiverged("renewal resolvent tail did not decay below tolerance");
}

namespace detail {

/// One truncated resolvent solve of the killed zero-immigration chain:
/// (lambda + q_j) u_j - up_j u_{j+1} - down_j u_{j-1} = j on states 1..N,
/// u_0 = 0, upward flux dropped at N. Returns the whole vector u, whose
/// entry u_j is  integral of exp(-lambda t) E^{(j)} Z_t dt.
inline std::vector<double> killed_resolvent_solve(const RateModel& model, double lambda, std::int64_t N) {
    const auto n = static_cast<std::size_t>(N);
    const double nu = model.nu;
    Tridiagonal sys(n);
    std::vector<double> rhs(n, 0.0);
    for (std::int64_t j = 1; j <= N; ++j) {
        const auto k = static_cast<std::size_t>(j - 1);
        const double up = static_cast<double>(j) * model.birth(j);
        const double down = static_cast<double>(j) * (model.death(j) + model.gamma);
        sys.diag[k] = lambda + (j < N ? up : 0.0) + down + nu;
        if (j < N) sys.sup[k] = -up;
        if (j > 1) sys.sub[k] = -down;
        rhs[k] = static_cast<double>(j);
    }
    return solve_tridiagonal(sys, std::move(rhs));
}

/// Resolvent value with truncation refinement. Doubling stops when two
/// consecutive levels agree. Requires the solution to stay nonnegative,
/// which certifies that lambda is above the truncated spectral edge.
inline std::vector<double> killed_resolvent(const RateModel& model, double lambda, double tol,
                                            const TruncationPolicy& policy, std::int64_t min_states = 1) {
    if (!model.normalized()) throw InvalidModel("resolvent requires a normalized model");
    std::vector<double> prev;
    for (std::int64_t N = policy.initial; N <= policy.max; N *= 2) {
        std::vector<double> u = killed_resolvent_solve(model, lambda, N);
        for (double v : u) {
            if (!std::isfinite(v)) throw SpectralDomainError("resolvent solve overflowed");
            if (v < 0.0)
                throw SpectralDomainError("resolvent not positive: lambda = " + std::to_string(lambda) +
                                          " lies outside the spectral domain");
        }
        if (!prev.empty()) {
            double drift = 0.0;
            for (std::int64_t j = 1; j <= std::min<std::int64_t>(min_states, static_cast<std::int64_t>(prev.size()));
                 ++j)
                drift = std::max(drift,
                                 std::fabs(u[static_cast<std::size_t>(j - 1)] - prev[static_cast<std::size_t>(j - 1)]) /
                                     (1.0 + std::fabs(u[static_cast<std::size_t>(j - 1)])));
            if (drift <= tol) return u;
        }
        prev = std::move(u);
    }
    throw TruncationDiverged("killed resolvent did not stabilize under truncation growth");
}

/// Adjoint route: solves (lambda - A) v = e^1 on the measure side, where
/// v_i is the Laplace transform of the transition probability from state 1
/// into state i, then weights by gamma * occupancy. Dual to the solve in
/// killed_resolvent; the two must agree wherever both converge.
inline double killed_resolvent_source(const RateModel& model, double lambda, double tol,
                                      const TruncationPolicy& policy) {
    if (!model.normalized()) throw InvalidModel("resolvent requires a normalized model");
    bool have_prev = false;
    double prev = 0.0;
    for (std::int64_t N = policy.initial; N <= policy.max; N *= 2) {
        const auto n = static_cast<std::size_t>(N);
        Tridiagonal sys(n);
        std::vector<double> rhs(n, 0.0);
        for (std::int64_t i = 1; i <= N; ++i) {
            const auto k = static_cast<std::size_t>(i - 1);
            const double up_i = static_cast<double>(i) * model.birth(i);
            const double down_i = static_cast<double>(i) * (model.death(i) + model.gamma);
            sys.diag[k] = lambda + (i < N ? up_i : 0.0) + down_i + model.nu;
            if (i > 1) sys.sub[k] = -static_cast<double>(i - 1) * model.birth(i - 1);
            if (i < N) sys.sup[k] = -static_cast<double>(i + 1) * (model.death(i + 1) + model.gamma);
        }
        rhs[0] = 1.0;
        const std::vector<double> v = solve_tridiagonal(sys, std::move(rhs));
        double value = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(v[k])) throw SpectralDomainError("adjoint resolvent solve overflowed");
            if (v[k] < 0.0)
                throw SpectralDomainError("adjoint resolvent not positive: lambda = " +
                                          std::to_string(lambda) + " lies outside the spectral domain");
            value += static_cast<double>(k + 1) * v[k];
        }
        value *= model.gamma;
        if (have_prev && std::fabs(value - prev) <= tol * (1.0 + std::fabs(value))) return value;
        prev = value;
        have_prev = true;
    }
    throw TruncationDiverged("adjoint resolvent did not stabilize under truncation growth");
}

}  // namespace detail

/// Laplace transforms u_j of t -> E^{(j)} Z_t for the zero-immigration
/// chain, j = 1..j_count. The occupancy-weighted resolvent that drives the
/// characteristic equation.
inline std::vector<double> killed_mean_transform(const RateModel& model, double lambda,
                                                 std::int64_t j_count, double tol = default_solve_tol,
                                                 const TruncationPolicy& policy = {}) {
    auto u = detail::killed_resolvent(model, lambda, tol, policy, j_count);
    u.resize(static_cast<std::size_t>(j_count));
    return u;
}

/// chi(lambda) = gamma * integral of exp(-lambda t) E^{(1)} Z_t dt for the
/// zero-immigration chain, computed by the measure-side resolvent with a
/// point source at state 1. chi(0) equals the reproduction number (which is
/// computed by the dual solve, making the equality a real consistency check)
/// and chi is strictly decreasing on its domain.
inline double characteristic_function(const RateModel& model, double lambda, double tol = default_solve_tol,
                                      const TruncationPolicy& policy = {}) {
    return detail::killed_resolvent_source(model, lambda, tol, policy);
}

/// Reproduction number R0 = gamma * integral of E^{(1)} Z_t dt, the expected
/// number of successful emigrants produced by the lineage of one colonizer
/// before local extinction. Computed as the lambda = 0 resolvent applied to
/// the occupancy function (the function-side dual of chi).
inline double r0(const RateModel& model, double tol = default_solve_tol, const TruncationPolicy& policy = {}) {
    const auto u = detail::killed_resolvent(model, 0.0, tol, policy);
    return model.gamma * u[0];
}

/// Numerical derivative of G: central difference away from 0, one-sided at
/// the boundary. Kept as a cross-check for the resolvent route to G'(0).
inline double g_derivative(const RateModel& model, double s, double h, double tol = default_solve_tol) {
    if (!(h > 0.0)) throw InvalidArgument("step h must be positive");
    if (s < 0.0) throw InvalidArgument("s must be >= 0");
    if (s >= h) return (mean_G(model, s + h, tol) - mean_G(model, s - h, tol)) / (2.0 * h);
    return (mean_G(model, s + h, tol) - mean_G(model, s, tol)) / h;
}

/// Safe lower-edge estimate for the decay rate of the killed semigroup.
/// Heuristic: the chain dies at least as fast as a pure death-and-catastrophe
/// comparison, and no faster information is available constructively.
inline double alpha_estimate(const RateModel& model) {
    const double guarded = std::min(model.nu, model.death(1) + model.gamma - model.birth(1));
    if (guarded > 0.0) return guarded / 2.0;
    return (model.d_inf + model.gamma + model.nu) / 16.0;
}

/// Root of chi(lambda) = 1. R0 > 1 implies a positive root, R0 = 1 gives 0;
/// for R0 < 1 the probe widens from -alpha_estimate/2 toward the hard floor
/// -(d_inf + gamma + nu) below which the transform cannot converge, and
/// returns nullopt if no sign change is found in the accessible half-plane.
inline std::optional<double> lambda0(const RateModel& model, double tol = default_report_tol,
                                     const TruncationPolicy& policy = {}) {
    const double solve_tol = std::min(tol, default_solve_tol);
    const double r = characteristic_function(model, 0.0, solve_tol, policy);
    if (std::fabs(r - 1.0) < critical_band) return 0.0;

    auto chi = [&](double lam) { return characteristic_function(model, lam, solve_tol, policy); };

    double lo, hi;  // chi(lo) > 1 > chi(hi)
    if (r > 1.0) {
        lo = 0.0;
        hi = 1.0;
        while (chi(hi) >= 1.0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e9) throw SpectralDomainError("no upper bracket for the characteristic root");
        }
    } else {
        const double floor_lam = -(model.d_inf + model.gamma + model.nu);
        double probe = -alpha_estimate(model) / 2.0;
        hi = 0.0;
        for (;;) {
            if (probe <= floor_lam) probe = floor_lam * (1.0 - 1e-12);
            double value;
            try {
                value = chi(probe);
            } catch (const SpectralDomainError&) {
                return std::nullopt;
            } catch (const TruncationDiverged&) {
                return std::nullopt;
            }
            if (value >= 1.0) {
                lo = probe;
                break;
            }
            hi = probe;
            if (probe <= floor_lam * (1.0 - 1e-12)) return std::nullopt;
            probe *= 2.0;
        }
    }

    for (int iter = 0; iter < 200 && hi - lo > tol * (1.0 + std::fabs(lo)); ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (chi(mid) >= 1.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Sampled spectral summary.
struct SpectralReport {
    double r0 = 0.0;
    std::optional<double> lambda0;
    std::vector<std::pair<double, double>> chi;  ///< (lambda, chi(lambda)) samples
    double alpha_est = 0.0;
};

inline SpectralReport spectral_report(const RateModel& model, double tol = default_report_tol,
                                      const std::vector<double>& lambda_grid = {},
                                      const TruncationPolicy& policy = {}) {
    SpectralReport rep;
    rep.alpha_est = alpha_estimate(model);
    rep.r0 = r0(model, std::min(tol, default_solve_tol), policy);
    rep.lambda0 = lambda0(model, tol, policy);
    for (double lam : lambda_grid)
        rep.chi.emplace_back(lam, characteristic_function(model, lam, std::min(tol, default_solve_tol), policy));
    return rep;
}

/// Linearization of the dynamics at the extinction state, truncated to
/// states 1..N: the killed generator plus the rank-one immigration feedback
/// that lands every successful emigrant in a fresh patch at state 1.
struct LinearizedOperator {
    std::vector<double> up, down, diag;  // states 1..N, 0-indexed
    double gamma = 0.0;
    std::int64_t N = 0;

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const auto n = static_cast<std::size_t>(N);
        double weighted = 0.0;
        for (std::size_t k = 0; k < n; ++k) weighted += static_cast<double>(k + 1) * x[k];
        for (std::size_t k = 0; k < n; ++k) {
            double v = diag[k] * x[k];
            if (k > 0) v += up[k - 1] * x[k - 1];
            if (k + 1 < n) v += down[k + 1] * x[k + 1];
            if (k == 0) v += gamma * weighted;
            y[k] = v;
        }
    }
};

inline LinearizedOperator linearized_at_extinction(const RateModel& model, std::int64_t N) {
    if (!model.normalized()) throw InvalidModel("linearization requires a normalized model");
    if (N < 2) throw InvalidArgument("need at least two states");
    LinearizedOperator op;
    op.N = N;
    op.gamma = model.gamma;
    const auto n = static_cast<std::size_t>(N);
    op.up.resize(n);
    op.down.resize(n);
    op.diag.resize(n);
    for (std::int64_t j = 1; j <= N; ++j) {
        const auto k = static_cast<std::size_t>(j - 1);
        op.up[k] = static_cast<double>(j) * model.birth(j);
        op.down[k] = static_cast<double>(j) * (model.death(j) + model.gamma);
        op.diag[k] = -((j < N ? op.up[k] : 0.0) + op.down[k] + model.nu);
    }
    return op;
}

/// Largest real eigenvalue of the truncated linearization, via power
/// iteration on the nonnegative shift with Collatz-Wielandt stopping bounds.
/// Independent spectral oracle for the characteristic-equation root.
inline double dominant_eigenvalue_check(const RateModel& model, std::int64_t N,
                                        double tol = 1e-10, std::int64_t max_iter = 2000000) {
    const LinearizedOperator op = linearized_at_extinction(model, N);
    const auto n = static_cast<std::size_t>(N);

    double shift = 1.0 + op.gamma;
    for (std::size_t k = 0; k < n; ++k) shift = std::max(shift, 1.0 - op.diag[k] + op.gamma);

    std::vector<double> x(n, 1.0), y(n, 0.0);
    for (std::int64_t iter = 0; iter < max_iter; ++iter) {
        op.apply(x, y);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            y[k] += shift * x[k];
            const double ratio = y[k] / x[k];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            norm = std::max(norm, std::fabs(y[k]));
        }
        if (!(norm > 0.0) || !std::isfinite(norm)) throw SpectralDomainError("power iteration broke down");
        for (std::size_t k = 0; k < n; ++k) x[k] = y[k] / norm;
        if (hi - lo <= tol * (1.0 + std::fabs(hi))) return 0.5 * (lo + hi) - shift;
    }
    throw SpectralDomainError("power iteration did not converge");
}

}  // namespace metapop

#endif  // METAPOP_CHAIN_HPP
