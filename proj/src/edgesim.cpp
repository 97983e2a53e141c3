#include "planoforge/edgesim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "planoforge/rng.hpp"

namespace planoforge {

namespace {

// reference anchors: (log10 n, ms); extended past the last decade with the
// final slope
const double kAnchorLog[5] = {0.0, 1.0, 2.0, 3.0, 4.0};
const double kAnchorMs[5] = {450.0, 460.0, 475.0, 495.0, 497.0};

double fitted_profile(double n) {
    const double x = std::log10(std::max(1.0, n));
    if (x <= kAnchorLog[0]) return kAnchorMs[0];
    for (int i = 1; i < 5; ++i)
        if (x <= kAnchorLog[i]) {
            const double t = (x - kAnchorLog[i - 1]) / (kAnchorLog[i] - kAnchorLog[i - 1]);
            return kAnchorMs[i - 1] + t * (kAnchorMs[i] - kAnchorMs[i - 1]);
        }
    return kAnchorMs[4] + (x - kAnchorLog[4]) * (kAnchorMs[4] - kAnchorMs[3]);
}

}  // namespace

nlohmann::json LatencyModel::to_json() const {
    return {{"mode", mode == Mode::Formula ? "formula" : "fitted"},
            {"base_inference_ms", base_inference_ms},
            {"network_overhead_ms", network_overhead_ms},
            {"scaling_factor", scaling_factor},
            {"log_base", log_base},
            {"cold_start_ms", cold_start_ms},
            {"provisioned_concurrency", provisioned_concurrency}};
}

LatencyModel LatencyModel::from_json(const nlohmann::json& j) {
    LatencyModel m;
    const std::string mode = j.value("mode", "fitted");
    if (mode == "formula")
        m.mode = Mode::Formula;
    else if (mode == "fitted")
        m.mode = Mode::FittedProfile;
    else
        throw IoError("latency model: unknown mode '" + mode + "'");
    m.base_inference_ms = j.value("base_inference_ms", 400.0);
    m.network_overhead_ms = j.value("network_overhead_ms", 50.0);
    m.scaling_factor = j.value("scaling_factor", 0.0);
    m.log_base = j.value("log_base", 10.0);
    m.cold_start_ms = j.value("cold_start_ms", 900.0);
    m.provisioned_concurrency = j.value("provisioned_concurrency", 0);
    if (m.scaling_factor < 0.0 || !(m.log_base > 1.0) || m.cold_start_ms < 0.0 ||
        m.provisioned_concurrency < 0)
        throw ValueError("latency model: bad parameters");
    return m;
}

double steady_latency(double n_concurrent, const LatencyModel& model) {
    if (n_concurrent < 1.0) throw ValueError("steady_latency: n must be >= 1");
    if (model.mode == LatencyModel::Mode::FittedProfile) return fitted_profile(n_concurrent);
    return model.base_inference_ms + model.network_overhead_ms +
           model.scaling_factor * std::log(n_concurrent) / std::log(model.log_base);
}

std::vector<ScalingRow> scaling_table(const LatencyModel& model) {
    std::vector<ScalingRow> rows;
    const double base = steady_latency(1.0, model);
    for (long n : {1L, 10L, 100L, 1000L, 10000L}) {
        const double ms = steady_latency(static_cast<double>(n), model);
        rows.push_back({n, ms, 100.0 * (ms - base) / base});
    }
    return rows;
}

std::string render_scaling_table(const std::vector<ScalingRow>& rows) {
    std::ostringstream out;
    out << "Concurrent Requests | Response Time (ms) | Latency Increase\n";
    out.setf(std::ios::fixed);
    for (const ScalingRow& r : rows) {
        out.precision(0);
        out << r.concurrent << " | " << r.response_ms << " | ";
        if (r.concurrent == 1) {
            out << "--\n";
        } else {
            out.precision(1);
            out << r.increase_pct << "%\n";
        }
    }
    return out.str();
}

nlohmann::json LoadScenario::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const Arrival& a : arrivals) arr.push_back({{"t_ms", a.t_ms}, {"count", a.count}});
    return {{"arrivals", arr}, {"duration_ms", duration_ms}, {"rng_seed", rng_seed}};
}

LoadScenario LoadScenario::from_json(const nlohmann::json& j) {
    LoadScenario s;
    s.duration_ms = j.at("duration_ms").get<double>();
    s.rng_seed = j.value("rng_seed", std::uint64_t{0});
    double prev = -1.0;
    for (const auto& ja : j.at("arrivals")) {
        Arrival a;
        a.t_ms = ja.at("t_ms").get<double>();
        a.count = ja.at("count").get<int>();
        if (a.t_ms < prev) throw InvariantError("scenario: timestamps must be nondecreasing");
        prev = a.t_ms;
        s.arrivals.push_back(a);
    }
    return s;
}

LoadScenario poisson_scenario(double requests_per_sec, double duration_ms, std::uint64_t seed) {
    if (!(requests_per_sec > 0.0) || !(duration_ms > 0.0))
        throw ValueError("poisson_scenario: rate and duration must be positive");
    LoadScenario s;
    s.duration_ms = duration_ms;
    s.rng_seed = seed;
    Rng rng(seed);
    double t = 0.0;
    const double mean_gap_ms = 1000.0 / requests_per_sec;
    while (true) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        t += -std::log(u) * mean_gap_ms;
        if (t >= duration_ms) break;
        s.arrivals.push_back({t, 1});
    }
    return s;
}

nlohmann::json LoadStats::to_json() const {
    return {{"p50_ms", p50_ms},           {"p95_ms", p95_ms},
            {"p99_ms", p99_ms},           {"cold_starts", cold_starts},
            {"max_in_flight", max_in_flight}, {"completed", completed}};
}

LoadStats run_load(const LoadScenario& scenario, const LatencyModel& model) {
    double prev = -1.0;
    for (const Arrival& a : scenario.arrivals) {
        if (a.t_ms < prev) throw InvariantError("scenario: timestamps must be nondecreasing");
        if (a.count < 0) throw InvariantError("scenario: negative arrival count");
        prev = a.t_ms;
    }

    LoadStats stats;
    std::priority_queue<double, std::vector<double>, std::greater<>> completions;
    int warm_free = model.provisioned_concurrency;
    int in_flight = 0;
    std::vector<double> latencies;

    for (const Arrival& a : scenario.arrivals) {
        for (int i = 0; i < a.count; ++i) {
            while (!completions.empty() && completions.top() <= a.t_ms) {
                completions.pop();
                --in_flight;
                ++warm_free;
            }
            ++in_flight;
            stats.max_in_flight = std::max(stats.max_in_flight, in_flight);
            double latency = steady_latency(static_cast<double>(in_flight), model);
            if (warm_free > 0) {
                --warm_free;
            } else {
                latency += model.cold_start_ms;  // a fresh container joins the pool
                ++stats.cold_starts;
            }
            completions.push(a.t_ms + latency);
            latencies.push_back(latency);
        }
    }
    stats.completed = latencies.size();
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        const auto rank = [&](double q) {
            const std::size_t i =
                static_cast<std::size_t>(std::ceil(q * static_cast<double>(latencies.size())));
            return latencies[std::min(latencies.size() - 1, std::max<std::size_t>(1, i) - 1)];
        };
        stats.p50_ms = rank(0.50);
        stats.p95_ms = rank(0.95);
        stats.p99_ms = rank(0.99);
    }
    return stats;
}

}  // namespace planoforge
