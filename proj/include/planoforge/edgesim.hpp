#pragma once

#include <cstdint>
#include <json.hpp>
#include <vector>

#include "planoforge/errors.hpp"

namespace planoforge {

// Serverless inference latency model.
//
// Formula mode evaluates base + overhead + k * log(n) directly. The reference
// five-point scaling table is not consistent with any single k * log(n) term,
// so the default fitted mode interpolates those anchor points linearly in
// log10(n) instead (monotone, within measurement noise of the table).
struct LatencyModel {
    enum class Mode { Formula, FittedProfile };
    Mode mode = Mode::FittedProfile;
    double base_inference_ms = 400.0;
    double network_overhead_ms = 50.0;
    double scaling_factor = 0.0;  // k
    double log_base = 10.0;
    double cold_start_ms = 900.0;
    int provisioned_concurrency = 0;

    nlohmann::json to_json() const;
    static LatencyModel from_json(const nlohmann::json& j);
};

// Warm-path latency at a steady concurrency level; latency(1) is exactly
// base + overhead in both modes.
double steady_latency(double n_concurrent, const LatencyModel& model);

struct ScalingRow {
    long concurrent;
    double response_ms;
    double increase_pct;  // relative to n = 1
};

// Rows for n in {1, 10, 100, 1000, 10000}.
std::vector<ScalingRow> scaling_table(const LatencyModel& model);
std::string render_scaling_table(const std::vector<ScalingRow>& rows);

struct Arrival {
    double t_ms = 0.0;
    int count = 1;
};

struct LoadScenario {
    std::vector<Arrival> arrivals;  // nondecreasing timestamps
    double duration_ms = 0.0;
    std::uint64_t rng_seed = 0;

    nlohmann::json to_json() const;
    static LoadScenario from_json(const nlohmann::json& j);
};

LoadScenario poisson_scenario(double requests_per_sec, double duration_ms, std::uint64_t seed);

struct LoadStats {
    double p50_ms = 0.0, p95_ms = 0.0, p99_ms = 0.0;
    std::uint64_t cold_starts = 0;
    int max_in_flight = 0;
    std::uint64_t completed = 0;

    nlohmann::json to_json() const;
};

// Event-driven simulation. Containers beyond the provisioned pool pay the
// cold-start penalty once when first created and stay warm afterwards.
// Completions at a given instant are processed before arrivals at the same
// instant. Deterministic.
LoadStats run_load(const LoadScenario& scenario, const LatencyModel& model);

}  // namespace planoforge
