#include <doctest.h>

#include <cmath>
#include <vector>

#include "metapop/bundled.hpp"
#include "metapop/chain.hpp"
#include "metapop/stochastic.hpp"
#include "metapop/threshold.hpp"

using namespace metapop;

namespace {

// Independent detailed-balance oracle for nu = 0 chains, written against the
// rate definitions only (no shared code with the solver).
std::vector<double> detailed_balance_reference(const RateModel& m, double s, std::size_t n) {
    std::vector<double> pi(n + 1, 0.0);
    pi[0] = 1.0;
    double sum = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double up = static_cast<double>(j) * (j ? m.birth(static_cast<std::int64_t>(j)) : 0.0) +
                          m.gamma * s;
        const double down =
            static_cast<double>(j + 1) * (m.death(static_cast<std::int64_t>(j + 1)) + m.gamma);
        pi[j + 1] = pi[j] * up / down;
        sum += pi[j + 1];
    }
    for (double& v : pi) v /= sum;
    return pi;
}

}  // namespace

TEST_CASE("chain rates substitute the model") {
    const ChainSpec spec = chain_rates(bundled::linear_subcritical(), 3.0);
    for (std::int64_t j : {0, 1, 2, 9}) {
        CHECK(spec.up(j) == doctest::Approx(static_cast<double>(j) + 3.0));
        CHECK(spec.down(j) == doctest::Approx(3.0 * static_cast<double>(j)));
    }
    CHECK(spec.down(0) == 0.0);

    SUBCASE("zero immigration makes 0 absorbing") {
        const ChainSpec z = chain_rates(bundled::linear_subcritical(), 0.0);
        CHECK(z.up(0) == 0.0);
    }
    SUBCASE("contract violations") {
        CHECK_THROWS_AS(chain_rates(bundled::linear_subcritical(), -1.0), InvalidArgument);
        const RateModel raw = build_rate_model(ConstantParams{1.0, 1.0}, 1.0, 0.0, 0.5);
        CHECK_THROWS_AS(chain_rates(raw, 1.0), InvalidModel);
    }
}

TEST_CASE("stationary distribution at s = 0 is the point mass at 0") {
    const auto eq = stationary_distribution(chain_rates(bundled::logistic(), 0.0));
    REQUIRE(eq.pi.size() == 1);
    CHECK(eq.pi[0] == 1.0);
    CHECK(eq.mean == 0.0);
}

TEST_CASE("equilibrium mean of the linear chain matches s/2") {
    const RateModel m = bundled::linear_subcritical();
    for (double s : {0.5, 1.0, 3.0, 10.0}) {
        const auto eq = stationary_distribution(chain_rates(m, s), 1e-12);
        CHECK(std::fabs(eq.mean - s / 2.0) < 1e-8);
        CHECK(eq.tail_mass < 1e-12);
        CHECK(eq.residual < 1e-12);

        // cross-check the whole distribution against the reference recursion
        const auto ref = detailed_balance_reference(m, s, static_cast<std::size_t>(eq.N));
        for (std::size_t j = 0; j < ref.size(); ++j) CHECK(eq.pi[j] == doctest::Approx(ref[j]).epsilon(1e-10));
    }
}

TEST_CASE("stationary solve meets its residual contract on the workhorse model") {
    const auto eq = stationary_distribution(chain_rates(bundled::logistic(), 1.0), 1e-10);
    CHECK(eq.residual < 1e-10);
    CHECK(eq.tail_mass < 1e-10);
    double sum = 0.0;
    for (double v : eq.pi) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("renewal identity oracle agrees with the balance solve") {
    for (double s : {0.5, 1.0, 2.0}) {
        const auto direct = stationary_distribution(chain_rates(bundled::logistic(), s), 1e-11);
        const auto oracle = renewal_identity_oracle(bundled::logistic(), s, 1e-11);
        CHECK(m1_distance(direct.pi, oracle.pi) < 10.0 * 1e-11);
    }
}

TEST_CASE("renewal identity contract") {
    CHECK_THROWS_AS(renewal_identity_oracle(bundled::linear_subcritical(), 1.0), InvalidArgument);

    SUBCASE("frequent catastrophes concentrate mass at 0") {
        const RateModel m = build_rate_model(LogisticDeathParams{3.0, 1.0, 3.0}, 1.0, 50.0, 1.0);
        const auto eq = renewal_identity_oracle(m, 1.0, 1e-10);
        CHECK(eq.pi[0] > 0.9);
    }
}

TEST_CASE("G vanishes at zero and matches the closed form") {
    const RateModel m = bundled::linear_subcritical();
    CHECK(mean_G(m, 0.0) == 0.0);
    CHECK(mean_G(m, 3.0, 1e-12) == doctest::Approx(1.5).epsilon(1e-9));

    SUBCASE("catastrophe shifts the closed form to gamma*s/(nu+d+gamma-b)") {
        const RateModel c = bundled::linear_catastrophe();
        for (double s : {0.5, 2.0}) CHECK(mean_G(c, s, 1e-12) == doctest::Approx(s / 1.5).epsilon(1e-9));
    }
}

TEST_CASE("G stays finite across the immigration range") {
    const RateModel m = bundled::logistic();
    for (double s : {0.0, 2.5, 5.0, 7.5, 10.0}) {
        const double g = mean_G(m, s, 1e-10);
        CHECK(std::isfinite(g));
        CHECK(g >= 0.0);
        CHECK(g <= 10.0);  // bounded by the crossing bound well below the range top
    }

    SUBCASE("empirical higher moment stays bounded along a long run") {
        const auto run = simulate_patch(chain_rates(m, 5.0), 0, 200.0, 321, 10.0, 0.25, 0.5);
        CHECK(std::isfinite(run.time_avg_power));
        CHECK(run.time_avg_power < 50.0);
    }
}

TEST_CASE("reproduction number closed forms") {
    CHECK(std::fabs(r0(bundled::linear_catastrophe(), 1e-12) - 2.0 / 3.0) < 1e-8);
    // b - d - nu <= 0 forces R0 <= 1
    CHECK(r0(bundled::linear_subcritical(), 1e-12) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r0(bundled::logistic(), 1e-10) > 1.0);
}

TEST_CASE("derivative of G at 0 agrees with the resolvent route") {
    const RateModel m = bundled::logistic();
    const double r = r0(m, 1e-12);
    // Richardson-extrapolated one-sided difference (G(0) = 0)
    const double h = 1e-3;
    const double d1 = mean_G(m, h, 1e-12) / h;
    const double d2 = mean_G(m, 2.0 * h, 1e-12) / (2.0 * h);
    CHECK(2.0 * d1 - d2 == doctest::Approx(r).epsilon(1e-5));

    SUBCASE("constant model derivative is flat in s") {
        const RateModel lin = bundled::linear_subcritical();
        for (double s : {0.0, 1.0, 4.0})
            CHECK(g_derivative(lin, s, 1e-4, 1e-12) == doctest::Approx(0.5).epsilon(1e-6));
    }
}

TEST_CASE("characteristic function closed form and duality") {
    const RateModel m = bundled::linear_catastrophe();
    for (double lam : {-0.4, 0.0, 1.0, 5.0})
        CHECK(characteristic_function(m, lam, 1e-12) == doctest::Approx(1.0 / (lam + 1.5)).epsilon(1e-8));

    SUBCASE("chi(0) equals R0 across models (dual solves)") {
        for (const RateModel& model :
             {bundled::logistic(), bundled::curved_table(), bundled::logistic_mild()}) {
            CHECK(characteristic_function(model, 0.0, 1e-12) ==
                  doctest::Approx(r0(model, 1e-12)).epsilon(1e-9));
        }
    }
    SUBCASE("chi decreases in lambda") {
        const RateModel model = bundled::logistic();
        double prev = characteristic_function(model, -0.2, 1e-11);
        for (double lam = -0.1; lam < 2.05; lam += 0.1) {
            const double value = characteristic_function(model, lam, 1e-11);
            CHECK(value < prev);
            prev = value;
        }
    }
}

TEST_CASE("characteristic root closed form and sign contract") {
    SUBCASE("subcritical constant model has root b - d - nu") {
        const auto lam = lambda0(bundled::linear_catastrophe(), 1e-9);
        REQUIRE(lam.has_value());
        CHECK(*lam == doctest::Approx(-0.5).epsilon(1e-7));
        const auto lam2 = lambda0(bundled::linear_subcritical(), 1e-9);
        REQUIRE(lam2.has_value());
        CHECK(*lam2 == doctest::Approx(-1.0).epsilon(1e-7));
    }
    SUBCASE("persistent model has a positive root") {
        const auto lam = lambda0(bundled::logistic(), 1e-9);
        REQUIRE(lam.has_value());
        CHECK(*lam > 0.0);
    }
}

TEST_CASE("dominant eigenvalue of the truncated linearization") {
    SUBCASE("agrees with the characteristic root on the workhorse model") {
        const auto lam = lambda0(bundled::logistic(), 1e-10);
        REQUIRE(lam.has_value());
        const double dom = dominant_eigenvalue_check(bundled::logistic(), 400);
        CHECK(std::fabs(dom - *lam) < 1e-6);
    }
    SUBCASE("subcritical constant model stays negative") {
        const double dom = dominant_eigenvalue_check(bundled::linear_subcritical(), 200);
        CHECK(dom < 0.0);
        CHECK(dom == doctest::Approx(-1.0).epsilon(1e-6));
    }
    SUBCASE("feedback only enters through the first state") {
        const auto op = linearized_at_extinction(bundled::logistic(), 16);
        std::vector<double> x(16, 0.0), with(16, 0.0), without(16, 0.0);
        x[7] = 1.0;
        op.apply(x, with);
        auto stripped = op;
        stripped.gamma = 0.0;
        stripped.apply(x, without);
        for (std::size_t k = 0; k < 16; ++k)
            if (k != 0) CHECK(with[k] == without[k]);
        CHECK(with[0] != without[0]);
    }
}

TEST_CASE("G is increasing and strictly concave on a grid") {
    const RateModel m = bundled::logistic();
    const double limit = 2.0 * s_tilde(m);
    std::vector<double> g;
    const int points = 12;
    for (int i = 0; i <= points; ++i)
        g.push_back(mean_G(m, limit * static_cast<double>(i) / points, 1e-11));
    for (int i = 0; i + 1 <= points; ++i) CHECK(g[i + 1] - g[i] > 0.0);
    for (int i = 0; i + 2 <= points; ++i) CHECK(g[i + 2] - 2.0 * g[i + 1] + g[i] < 0.0);
}

TEST_CASE("resolvent lower bound at the characteristic root") {
    const RateModel m = bundled::logistic();
    const auto lam = lambda0(m, 1e-9);
    REQUIRE(lam.has_value());
    const auto u = killed_mean_transform(m, *lam, 20, 1e-11);
    const double denom = *lam + m.gamma + m.d_inf + m.nu;
    for (std::size_t j = 1; j <= 20; ++j)
        CHECK(m.gamma * u[j - 1] >= m.gamma * static_cast<double>(j) / denom - 1e-9);
}

TEST_CASE("m1 distance pads shorter vectors") {
    CHECK(m1_distance({1.0, 0.0}, {0.5, 0.25, 0.25}) ==
          doctest::Approx(0.5 + 1.0 * 0.25 + 2.0 * 0.25));
    CHECK(m1_distance({}, {}) == 0.0);
}
