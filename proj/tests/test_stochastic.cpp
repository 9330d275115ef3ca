#include <doctest.h>

#include <cmath>
#include <vector>

#include "metapop/bundled.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/stochastic.hpp"

using namespace metapop;

TEST_CASE("absorbing start yields the empty path") {
    const auto run = simulate_patch(chain_rates(bundled::linear_subcritical(), 0.0), 0, 10.0, 42);
    CHECK(run.events == 0);
    CHECK(run.final_state == 0);
    for (const auto& [t, state] : run.path) CHECK(state == 0);
}

TEST_CASE("identical seeds reproduce identical paths") {
    const ChainSpec spec = chain_rates(bundled::logistic(), 1.0);
    const auto a = simulate_patch(spec, 3, 50.0, 7);
    const auto b = simulate_patch(spec, 3, 50.0, 7);
    CHECK(a.events == b.events);
    REQUIRE(a.path.size() == b.path.size());
    for (std::size_t i = 0; i < a.path.size(); ++i) {
        CHECK(a.path[i].first == b.path[i].first);
        CHECK(a.path[i].second == b.path[i].second);
    }
    CHECK(a.time_avg_state == b.time_avg_state);

    const auto c = simulate_patch(spec, 3, 50.0, 8);
    CHECK(a.time_avg_state != c.time_avg_state);
}

TEST_CASE("long-run average of the linear chain matches the closed form") {
    const ChainSpec spec = chain_rates(bundled::linear_subcritical(), 3.0);
    const int reps = 24;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto run = simulate_patch(spec, 0, 400.0, 1000 + static_cast<std::uint64_t>(r), 10.0, 0.25);
        sum += run.time_avg_state;
        sum2 += run.time_avg_state * run.time_avg_state;
    }
    const double mean = sum / reps;
    const double se = std::sqrt(std::max(0.0, sum2 / reps - mean * mean) / reps);
    CHECK(std::fabs(mean - 1.5) < 3.0 * se + 1e-12);
}

TEST_CASE("occupation frequencies match the equilibrium distribution") {
    const RateModel m = bundled::logistic();
    const ChainSpec spec = chain_rates(m, 1.0);
    const auto eq = stationary_distribution(spec, 1e-11);

    const int reps = 32;
    std::vector<std::vector<double>> occ(reps);
    for (int r = 0; r < reps; ++r)
        occ[r] = simulate_patch(spec, 0, 300.0, 555 + static_cast<std::uint64_t>(r), 10.0, 0.3).occupation;

    for (std::size_t j = 0; j < eq.pi.size(); ++j) {
        if (eq.pi[j] < 1e-3) continue;
        double sum = 0.0, sum2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            const double v = j < occ[r].size() ? occ[r][j] : 0.0;
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / reps;
        const double se = std::sqrt(std::max(0.0, sum2 / reps - mean * mean) / reps);
        CHECK(std::fabs(mean - eq.pi[j]) < 3.0 * se + 2e-3);
    }
}

TEST_CASE("pure-death metapopulation drains to zero with a consistent ledger") {
    const RateModel m = build_rate_model(ConstantParams{0.0, 1.0}, 0.0, 0.0, 1.0);
    std::vector<std::int64_t> hist(6, 0);
    hist[5] = 40;  // all 40 patches start with 5 individuals
    const auto run = simulate_metapopulation(m, 40, hist, 200.0, 99, {0.0, 1.0, 5.0, 200.0});
    CHECK(run.initial_population == 200);
    CHECK(run.final_population == 0);
    CHECK(run.counters.deaths == 200);
    CHECK(run.counters.births == 0);
    CHECK(run.counters.migrations == 0);

    SUBCASE("population is nonincreasing along the samples") {
        double prev = 1e18;
        for (double v : run.mean_occupancy) {
            CHECK(v <= prev + 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("event ledger reconciles the population balance") {
    const RateModel m = build_rate_model(LogisticDeathParams{3.0, 1.0, 3.0}, 1.0, 0.5, 0.7);
    std::vector<std::int64_t> hist{0, 50};
    const auto run = simulate_metapopulation(m, 50, hist, 30.0, 1234, {30.0});
    const auto& c = run.counters;
    const std::int64_t delta = static_cast<std::int64_t>(c.births) - static_cast<std::int64_t>(c.deaths) -
                               static_cast<std::int64_t>(c.migration_failures) - c.catastrophe_mass;
    CHECK(run.final_population == run.initial_population + delta);
    CHECK(c.migrations == c.migration_successes + c.migration_failures);
}

TEST_CASE("metapopulation runs are reproducible and need two patches") {
    const RateModel m = bundled::logistic();
    std::vector<std::int64_t> hist{0, 30};
    const auto a = simulate_metapopulation(m, 30, hist, 10.0, 77, {1.0, 10.0});
    const auto b = simulate_metapopulation(m, 30, hist, 10.0, 77, {1.0, 10.0});
    CHECK(a.events == b.events);
    REQUIRE(a.freq.size() == b.freq.size());
    for (std::size_t k = 0; k < a.freq.size(); ++k)
        for (std::size_t i = 0; i < a.freq[k].size(); ++i) CHECK(a.freq[k][i] == b.freq[k][i]);

    CHECK_THROWS_AS(simulate_metapopulation(m, 1, {0, 1}, 1.0, 5, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(simulate_metapopulation(m, 4, {0, 1}, 1.0, 5, {1.0}), InvalidArgument);
}

TEST_CASE("migration success frequency estimates rho") {
    // births comfortably above total losses, so the population persists
    const RateModel m = build_rate_model(ConstantParams{2.0, 1.0}, 1.0, 0.2, 0.3);
    std::vector<std::int64_t> hist{0, 0, 100};
    const auto run = simulate_metapopulation(m, 100, hist, 10.0, 31415, {10.0});
    const auto migrations = static_cast<double>(run.counters.migrations);
    REQUIRE(migrations > 1000);
    const double p_hat = static_cast<double>(run.counters.migration_successes) / migrations;
    const double se = std::sqrt(0.3 * 0.7 / migrations);
    CHECK(std::fabs(p_hat - 0.3) < 3.0 * se + 1e-12);
}

TEST_CASE("empirical frequencies track the deterministic limit") {
    const RateModel m = bundled::logistic();
    const std::int64_t n = 600;
    std::vector<std::int64_t> hist{0, n};
    const std::vector<double> grid{2.0, 5.0, 10.0};
    const auto run = simulate_metapopulation(m, n, hist, 10.0, 2024, grid, 12);

    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto traj = integrate(m, delta_state(96, 1), 10.0, ctl);

    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::size_t idx = 0;
        for (std::size_t q = 0; q < traj.samples.size(); ++q)
            if (std::fabs(traj.samples[q].t - grid[k]) < 1e-9) idx = q;
        const auto& sample = traj.samples[idx];
        for (std::size_t i = 0; i <= 8; ++i) {
            const double p = sample.p[i];
            const double band = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) + 3e-2;
            CHECK(std::fabs(run.freq[k][i] - p) < band);
        }
    }
}

TEST_CASE("coupled pair: equal starts stay equal") {
    const auto rep = coupled_pair_run(bundled::logistic(), 1.0, 3, 3, {0.5, 1.0}, 200, 5);
    for (double v : rep.mean_difference) CHECK(v == 0.0);
    for (double v : rep.prob_strict) CHECK(v == 0.0);
}

TEST_CASE("coupled pair: strict order probability is bounded by the catastrophe clock") {
    const RateModel m = bundled::logistic();
    const std::vector<double> grid{0.5, 1.0, 2.0};
    const auto rep = coupled_pair_run(m, 1.0, 3, 1, grid, 4000, 99);
    CHECK(rep.domination_violations == 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = rep.prob_strict[i];
        const double se = std::sqrt(p * (1.0 - p) / 4000.0);
        CHECK(p <= std::exp(-m.nu * grid[i]) + 3.0 * se + 1e-9);
    }
}

TEST_CASE("coupled pair mean difference matches the linear closed form") {
    // constant rates: E(Z1-Z2) = (k-l) e^{(b-d-gamma-nu) t}
    const RateModel m = build_rate_model(ConstantParams{1.0, 2.0}, 1.0, 0.5, 1.0);
    const std::vector<double> grid{0.25, 0.5, 1.0};
    const auto rep = coupled_pair_run(m, 1.0, 3, 1, grid, 30000, 17);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double exact = 2.0 * std::exp(-2.5 * grid[i]);
        CHECK(std::fabs(rep.mean_difference[i] - exact) < 3.0 * rep.se_difference[i] + 1e-12);
    }
}

TEST_CASE("second differences: linear control is flat, crowding bends them down") {
    const std::vector<double> grid{0.5, 1.0};

    SUBCASE("linear chain control") {
        const RateModel lin = build_rate_model(ConstantParams{1.0, 2.0}, 1.0, 0.0, 1.0);
        const auto res = second_difference_experiment(lin, 1.0, 0, 2, grid, 20000, 4242);
        for (std::size_t mi = 0; mi < res.second_difference.size(); ++mi)
            for (std::size_t ti = 0; ti < grid.size(); ++ti)
                CHECK(std::fabs(res.second_difference[mi][ti]) <=
                      3.0 * res.second_difference_se[mi][ti] + 1e-12);
        // first differences against the closed form e^{(b-d-gamma)t}
        for (std::size_t mi = 0; mi < res.first_difference.size(); ++mi)
            for (std::size_t ti = 0; ti < grid.size(); ++ti)
                CHECK(std::fabs(res.first_difference[mi][ti] - std::exp(-2.0 * grid[ti])) < 2e-2);
    }
    SUBCASE("crowded deaths make the differences strictly concave") {
        // measured effect-to-noise at these cells is z <= -7 for 60000 paths
        const auto res = second_difference_experiment(bundled::logistic(), 0.5, 0, 2, {0.5, 1.0},
                                                      60000, 31337);
        for (std::size_t mi = 0; mi < res.second_difference.size(); ++mi)
            for (std::size_t ti = 0; ti < res.t_grid.size(); ++ti)
                CHECK(res.second_difference[mi][ti] + 3.0 * res.second_difference_se[mi][ti] < 0.0);
    }
}

TEST_CASE("Monte Carlo reproduction number") {
    SUBCASE("closed form 2/3") {
        const auto est = r0_monte_carlo(bundled::linear_catastrophe(), 20000, 8080);
        CHECK(est.censored == 0);
        CHECK(std::fabs(est.value - 2.0 / 3.0) < 3.0 * est.std_error);
    }
    SUBCASE("agrees with the resolvent on the workhorse model") {
        const double exact = r0(bundled::logistic(), 1e-11);
        const auto est = r0_monte_carlo(bundled::logistic(), 20000, 9090);
        CHECK(std::fabs(est.value - exact) < 3.0 * est.std_error);
    }
    SUBCASE("finite without catastrophes in the subcritical regime") {
        const auto est = r0_monte_carlo(bundled::linear_subcritical(), 5000, 7070);
        CHECK(est.censored == 0);
        CHECK(est.value > 0.0);
    }
}
