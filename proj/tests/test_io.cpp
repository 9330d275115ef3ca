#include <doctest.h>

#include <sstream>

#include "metapop/bundled.hpp"
#include "metapop/io.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/rng.hpp"

using namespace metapop;

TEST_CASE("float formatting round-trips doubles exactly") {
    CounterRng rng(123, 0);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.next_uniform() - 0.5) * std::pow(10.0, static_cast<double>(i % 40) - 20.0);
        CHECK(std::stod(format_float(v)) == v);
    }
    CHECK(format_float(0.1) == "0.10000000000000001");
}

TEST_CASE("model files round-trip through json") {
    for (const RateModel& m : {bundled::logistic(), bundled::curved_table(),
                               build_rate_model(ConstantParams{1.0, 2.0}, 1.0, 0.25, 0.8)}) {
        const RateModel back = model_from_json(model_to_json(m));
        CHECK(back.gamma == m.gamma);
        CHECK(back.nu == m.nu);
        CHECK(back.rho == m.rho);
        for (std::int64_t i = 1; i <= 20; ++i) {
            CHECK(back.birth(i) == m.birth(i));
            CHECK(back.death(i) == m.death(i));
        }
    }
}

TEST_CASE("malformed model specifications are rejected") {
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"family":"constant"})")), InvalidModel);
    CHECK_THROWS_AS(model_from_json(json::parse(R"({"family":"exotic","params":{},"gamma":1,"nu":0})")),
                    InvalidModel);
    CHECK_THROWS_AS(
        model_from_json(json::parse(R"({"family":"table","params":{"b":[1],"d":[1]},"gamma":1,"nu":0})")),
        InvalidModel);
}

TEST_CASE("csv writers emit stable headers and reproducible bytes") {
    const auto eq = stationary_distribution(chain_rates(bundled::logistic(), 1.0), 1e-10);
    std::ostringstream a, b;
    write_distribution_csv(a, eq);
    write_distribution_csv(b, eq);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("j,pi_j\n", 0) == 0);

    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto traj = integrate(bundled::logistic(), delta_state(32, 1), 3.0, ctl);
    std::ostringstream t;
    write_trajectory_csv(t, traj, 5);
    CHECK(t.str().rfind("t,s,mass_defect,p_0,p_1,p_2,p_3,p_4,p_5\n", 0) == 0);
}

TEST_CASE("binary trajectory dump carries the documented layout") {
    IntegrateControls ctl;
    ctl.dt_sample = 1.0;
    const auto traj = integrate(bundled::logistic(), delta_state(8, 1), 2.0, ctl);
    std::ostringstream os(std::ios::binary);
    write_trajectory_binary(os, traj);
    const std::string bytes = os.str();
    REQUIRE(bytes.size() >= 24);
    CHECK(bytes.substr(0, 8) == "MPTRAJ01");
    std::uint64_t n = 0, count = 0;
    std::memcpy(&n, bytes.data() + 8, 8);
    std::memcpy(&count, bytes.data() + 16, 8);
    CHECK(n == 8);
    CHECK(count == traj.samples.size());
    CHECK(bytes.size() == 24 + count * (3 + n + 1) * 8);
}

TEST_CASE("config hash is stable") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("metapop") != fnv1a_hex("metapoq"));
}
