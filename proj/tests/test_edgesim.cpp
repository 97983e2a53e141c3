#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "planoforge/edgesim.hpp"

using namespace planoforge;

TEST_CASE("warm latency at n=1 is exactly base plus overhead in both modes") {
    LatencyModel formula;
    formula.mode = LatencyModel::Mode::Formula;
    for (double k : {0.0, 3.7, 10.0, 123.4}) {
        formula.scaling_factor = k;
        CHECK(steady_latency(1.0, formula) == 450.0);
    }
    LatencyModel fitted;
    CHECK(steady_latency(1.0, fitted) == 450.0);
    CHECK_THROWS_AS(steady_latency(0.5, fitted), ValueError);
}

TEST_CASE("formula mode reproduces the stated example") {
    LatencyModel m;
    m.mode = LatencyModel::Mode::Formula;
    m.scaling_factor = 10.0;
    m.log_base = 10.0;
    CHECK(steady_latency(10.0, m) == doctest::Approx(460.0).epsilon(1e-12));
}

TEST_CASE("fitted profile reproduces the reference scaling rows within 3 percent") {
    const LatencyModel m;  // fitted by default
    const auto rows = scaling_table(m);
    const double expected[5] = {450.0, 460.0, 475.0, 495.0, 497.0};
    REQUIRE(rows.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(rows[i].response_ms == doctest::Approx(expected[i]).epsilon(0.03));
        CHECK(rows[i].response_ms >= 0.97 * expected[i]);
        CHECK(rows[i].response_ms <= 1.03 * expected[i]);
    }
    CHECK(rows[4].increase_pct == doctest::Approx(10.4).epsilon(0.01));
    const std::string table = render_scaling_table(rows);
    CHECK(table.find("450") != std::string::npos);
    CHECK(table.find("10.4%") != std::string::npos);
}

TEST_CASE("latency is monotone in load, and concave in formula mode") {
    LatencyModel formula;
    formula.mode = LatencyModel::Mode::Formula;
    formula.scaling_factor = 7.3;
    formula.log_base = 2.718281828459045;
    LatencyModel fitted;
    double prev_f = 0.0, prev_p = 0.0;
    double prev_delta = 1e300;
    for (int n = 1; n <= 20000; n += 7) {
        const double f = steady_latency(n, formula);
        const double p = steady_latency(n, fitted);
        CHECK(f >= prev_f);
        CHECK(p >= prev_p);
        if (prev_f > 0.0) {
            const double delta = f - prev_f;
            CHECK(delta <= prev_delta + 1e-9);  // concavity of k*log(n)
            prev_delta = delta;
        }
        prev_f = f;
        prev_p = p;
    }
}

TEST_CASE("single request percentiles collapse to the warm latency") {
    LoadScenario s;
    s.arrivals = {{0.0, 1}};
    s.duration_ms = 1000.0;
    LatencyModel m;
    m.provisioned_concurrency = 1;
    const LoadStats stats = run_load(s, m);
    CHECK(stats.completed == 1);
    CHECK(stats.cold_starts == 0);
    CHECK(stats.p50_ms == 450.0);
    CHECK(stats.p99_ms == 450.0);
}

TEST_CASE("provisioned concurrency above peak load eliminates cold starts") {
    const LoadScenario s = poisson_scenario(200.0, 2000.0, 7);
    LatencyModel cold;
    cold.provisioned_concurrency = 0;
    const LoadStats without = run_load(s, cold);
    REQUIRE(without.completed > 100);
    CHECK(without.cold_starts > 0);

    LatencyModel warm = cold;
    warm.provisioned_concurrency = without.max_in_flight;
    const LoadStats with = run_load(s, warm);
    CHECK(with.cold_starts == 0);
    CHECK(with.max_in_flight <= without.max_in_flight);

    // removing provisioned concurrency never improves any percentile
    CHECK(without.p50_ms >= with.p50_ms);
    CHECK(without.p95_ms >= with.p95_ms);
    CHECK(without.p99_ms >= with.p99_ms);
}

TEST_CASE("replaying a seeded scenario is deterministic") {
    const LoadScenario a = poisson_scenario(120.0, 3000.0, 99);
    const LoadScenario b = poisson_scenario(120.0, 3000.0, 99);
    REQUIRE(a.arrivals.size() == b.arrivals.size());
    for (std::size_t i = 0; i < a.arrivals.size(); ++i) CHECK(a.arrivals[i].t_ms == b.arrivals[i].t_ms);
    LatencyModel m;
    m.provisioned_concurrency = 4;
    const LoadStats sa = run_load(a, m);
    const LoadStats sb = run_load(b, m);
    CHECK(sa.p50_ms == sb.p50_ms);
    CHECK(sa.p95_ms == sb.p95_ms);
    CHECK(sa.p99_ms == sb.p99_ms);
    CHECK(sa.cold_starts == sb.cold_starts);
    CHECK(sa.max_in_flight == sb.max_in_flight);

    const LoadStats sc = run_load(poisson_scenario(120.0, 3000.0, 100), m);
    CHECK((sc.p99_ms != sa.p99_ms || sc.cold_starts != sa.cold_starts));
}

TEST_CASE("scenario and stats json round trips") {
    const LoadScenario s = poisson_scenario(50.0, 500.0, 3);
    const LoadScenario back = LoadScenario::from_json(s.to_json());
    CHECK(back.arrivals.size() == s.arrivals.size());
    CHECK(back.duration_ms == s.duration_ms);

    nlohmann::json bad = s.to_json();
    bad["arrivals"][0]["t_ms"] = 1e9;  // breaks monotonicity
    CHECK_THROWS_AS(LoadScenario::from_json(bad), InvariantError);

    const LatencyModel m = LatencyModel::from_json(nlohmann::json::parse(
        R"({"mode":"formula","scaling_factor":5.0,"log_base":2.0})"));
    CHECK(m.mode == LatencyModel::Mode::Formula);
    CHECK(steady_latency(2.0, m) == doctest::Approx(455.0));
    CHECK_THROWS_AS(LatencyModel::from_json(nlohmann::json::parse(R"({"mode":"warp"})")), IoError);
}
