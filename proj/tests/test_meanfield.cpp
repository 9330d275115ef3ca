#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "metapop/bundled.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/rng.hpp"
#include "metapop/threshold.hpp"

using namespace metapop;

namespace {

double m1_norm(const std::vector<double>& v) {
    double n = std::fabs(v.empty() ? 0.0 : v[0]);
    for (std::size_t j = 1; j < v.size(); ++j) n += static_cast<double>(j) * std::fabs(v[j]);
    return n;
}

}  // namespace

TEST_CASE("extinction state is a fixed point of the right side") {
    const auto dp = rhs(bundled::logistic(), delta_state(32, 0));
    for (double v : dp) CHECK(v == 0.0);
}

TEST_CASE("two-state truncation matches the hand-expanded system") {
    // N = 1: s = p_1, immigration gamma*s, death mu_1 = d_1 + gamma,
    // catastrophe nu; the birth/immigration flux out of state 1 is closed off.
    const RateModel m = bundled::logistic();
    TruncatedState st;
    st.p = {0.7, 0.3};
    const auto dp = rhs(m, st);
    const double s = 0.3;
    const double mu1 = m.death(1) + m.gamma;
    const double expected_p1 = m.gamma * s * 0.7 - (mu1 + m.nu) * 0.3;
    CHECK(dp[1] == doctest::Approx(expected_p1).epsilon(1e-14));
    CHECK(dp[0] == doctest::Approx(-expected_p1).epsilon(1e-14));
}

TEST_CASE("right side conserves mass on random simplex states") {
    CounterRng rng(7, 0);
    const RateModel m = bundled::logistic();
    for (int trial = 0; trial < 25; ++trial) {
        TruncatedState st;
        st.p.resize(40);
        double sum = 0.0;
        for (double& v : st.p) {
            v = rng.next_uniform();
            sum += v;
        }
        for (double& v : st.p) v /= sum;
        const auto dp = rhs(m, st);
        double total = 0.0;
        for (double v : dp) total += v;
        CHECK(std::fabs(total) < 1e-13);
    }
}

TEST_CASE("right side vanishes at the truncated equilibrium") {
    const RateModel m = bundled::logistic();
    const auto fixed = solve_fixed_point(m, 1e-10);
    const auto eq = stationary_distribution(chain_rates(m, fixed.s_star), 1e-12);
    const auto st = equilibrium_state(eq, std::max<std::int64_t>(eq.N, 64));
    const auto dp = rhs(m, st);
    CHECK(m1_norm(dp) < 1e-6);
}

TEST_CASE("integration keeps the extinction state fixed") {
    const auto traj = integrate(bundled::logistic(), delta_state(16, 0), 10.0);
    double prev_t = -1.0;
    for (const auto& sample : traj.samples) {
        CHECK(sample.s == 0.0);
        CHECK(sample.mass_defect < 1e-12);
        CHECK(sample.p[0] == doctest::Approx(1.0));
        CHECK(sample.t > prev_t);
        prev_t = sample.t;
    }
}

TEST_CASE("subcritical model relaxes to extinction") {
    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto traj = integrate(bundled::linear_subcritical(), delta_state(48, 5), 25.0, ctl);
    CHECK(traj.max_mass_defect < 1e-9);
    const std::vector<double> extinction{1.0};
    const auto series = convergence_diagnose(traj, extinction);
    CHECK(series.final_distance < 1e-4);
    CHECK(traj.samples.back().s < 1e-5);
}

TEST_CASE("persistent model relaxes to the fixed-point equilibrium") {
    const RateModel m = bundled::logistic();
    const auto fixed = solve_fixed_point(m, 1e-10);
    const auto eq = stationary_distribution(chain_rates(m, fixed.s_star), 1e-12);

    IntegrateControls ctl;
    ctl.dt_sample = 5.0;
    const auto traj = integrate(m, delta_state(96, 1), 150.0, ctl);
    CHECK(traj.max_mass_defect < 1e-9);
    const auto series = convergence_diagnose(traj, eq.pi);
    CHECK(series.final_distance < 1e-4);
    CHECK(std::fabs(traj.samples.back().s - fixed.s_star) < 1e-4);

    SUBCASE("starting at the equilibrium stays there") {
        const auto stay = integrate(m, equilibrium_state(eq, 96), 50.0, ctl);
        const auto d = convergence_diagnose(stay, eq.pi);
        for (const auto& [t, dist] : d.distances) CHECK(dist < 1e-5);
    }
}

TEST_CASE("persistent dynamics stay repelled from extinction") {
    const RateModel m = bundled::logistic();
    const auto fixed = solve_fixed_point(m, 1e-9);
    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const double T = 80.0;
    for (std::int64_t start : {1, 5}) {
        const auto traj = integrate(m, delta_state(96, start), T, ctl);
        const double s0 = traj.samples.front().s;
        double low = std::numeric_limits<double>::infinity();
        for (const auto& sample : traj.samples)
            if (sample.t >= 0.2 * T) low = std::min(low, sample.s);
        CHECK(low > 0.5 * std::min(s0, fixed.s_star));
    }
}

TEST_CASE("positivity bookkeeping stays within tolerance") {
    IntegrateControls ctl;
    ctl.dt_sample = 0.5;
    const auto traj = integrate(bundled::logistic(), delta_state(96, 5), 60.0, ctl);
    CHECK(traj.min_entry_seen >= -1e-12);
    CHECK(traj.clamped_mass < 1e-9);
}

TEST_CASE("mean equation consistency and truncation leak diagnostics") {
    const RateModel m = bundled::logistic();
    IntegrateControls dense;
    dense.dt_sample = 1e-3;

    const auto traj = integrate(m, delta_state(64, 5), 2.0, dense);
    CHECK(mean_ode_check(m, traj) < 1e-5);

    SUBCASE("the extinction trajectory has zero defect") {
        auto flat = integrate(m, delta_state(16, 0), 1.0, dense);
        CHECK(mean_ode_check(m, flat) == 0.0);
    }
    SUBCASE("an undersized truncation shows up as a large defect") {
        const auto leaky = integrate(m, delta_state(6, 5), 2.0, dense);
        CHECK(mean_ode_check(m, leaky) > 100.0 * mean_ode_check(m, traj));
    }
}

TEST_CASE("scalar comparison solves the frozen-immigration caricature") {
    SUBCASE("constant rates give the linear closed form") {
        const RateModel m = bundled::linear_catastrophe();  // b=1, d=1, gamma=1, nu=0.5
        const double c = 1.0 - 1.0 - 1.0 - 0.5;
        const double s = 2.0, x0 = 3.0;
        const auto cmp = scalar_comparison(m, s, x0, 5.0, 0.25);
        for (const auto& [t, x] : cmp.samples) {
            const double exact = (x0 + m.gamma * s / c) * std::exp(c * t) - m.gamma * s / c;
            CHECK(x == doctest::Approx(exact).epsilon(1e-8));
        }
    }
    SUBCASE("decreasing in the decline region with no immigration") {
        const auto cmp = scalar_comparison(bundled::logistic(), 0.0, 5.0, 4.0, 0.5);
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& [t, x] : cmp.samples) {
            CHECK(x < prev + 1e-12);
            prev = x;
        }
    }
    SUBCASE("large-s asymptote from the threshold argument") {
        // for s with gamma*s = m(a/2+gamma) the cap gamma*s/(gamma + a/2) holds eventually
        const RateModel m = bundled::logistic();
        const double a = m.nu + m.d_inf - m.b_inf;
        const double s = 40.0;
        const auto cmp = scalar_comparison(m, s, 1.0, 400.0, 10.0);
        const double cap = m.gamma * s / (m.gamma + 0.5 * a);
        CHECK(cmp.samples.back().second <= cap + 1e-6);
    }
}

TEST_CASE("trajectories respect the scalar comparison envelope") {
    const RateModel m = bundled::logistic();
    const double st = s_tilde(m);
    IntegrateControls ctl;
    ctl.dt_sample = 0.5;

    SUBCASE("from a concentrated start above the bound") {
        const auto traj = integrate(m, delta_state(96, 5), 40.0, ctl);
        const auto rep = comparison_bound_check(m, traj, st, 1e-6);
        CHECK(rep.worst_envelope_defect <= 1e-6);
        CHECK(rep.worst_cap_excess <= 1e-6);
    }
    SUBCASE("subcritical constant model decays under its exponential envelope") {
        const RateModel lin = bundled::linear_subcritical();
        const auto traj = integrate(lin, delta_state(48, 5), 20.0, ctl);
        const auto rep = comparison_bound_check(lin, traj, s_tilde(lin), 1e-6);
        CHECK(rep.worst_envelope_defect <= 1e-6);
        // envelope for constant rates is s(0) e^{(b-d-nu)t}; spot check at the samples
        for (const auto& sample : traj.samples)
            CHECK(sample.s <= 5.0 * std::exp(-1.0 * sample.t) + 1e-6);
    }
    SUBCASE("the extinction start is trivially below everything") {
        const auto traj = integrate(m, delta_state(16, 0), 5.0, ctl);
        const auto rep = comparison_bound_check(m, traj, st, 1e-9);
        CHECK(rep.worst_envelope_defect <= 0.0);
    }
}

TEST_CASE("two truncation levels agree when the tail is resolved") {
    const RateModel m = bundled::logistic();
    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto a = integrate(m, delta_state(96, 1), 20.0, ctl);
    const auto b = integrate(m, delta_state(192, 1), 20.0, ctl);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k)
        CHECK(m1_distance(a.samples[k].p, b.samples[k].p) < 1e-6);
}

TEST_CASE("integration contract errors") {
    TruncatedState bad;
    bad.p = {0.5, 0.2};  // off the simplex
    CHECK_THROWS_AS(integrate(bundled::logistic(), bad, 1.0), InvalidArgument);
    CHECK_THROWS_AS(integrate(bundled::logistic(), delta_state(16, 0), 0.0), InvalidArgument);
}
