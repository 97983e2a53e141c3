#pragma once

#include <array>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "planoforge/codec.hpp"
#include "planoforge/constraints.hpp"
#include "planoforge/domain.hpp"

namespace planoforge {

// Linear revenue stand-in: facings x margin x category demand x shelf
// position multiplier, additive over placements.
struct RevenueModel {
    std::vector<double> position_multipliers;  // per shelf
    std::map<std::string, double> demand_proxy;
    double default_proxy = 1.0;

    double proxy_for(const std::string& category, bool* known = nullptr) const;
    double multiplier(int shelf) const;
};

// Eye-level boost: the shelf whose center sits nearest 60% of fixture height
// gets 1.5, all others 1.0; demand proxies default to 1.
RevenueModel default_revenue_model(const Fixture& fixture);

double expected_revenue(const Planogram& p, const Catalog& catalog, const RevenueModel& rm,
                        std::vector<std::string>* log = nullptr);

// Occupied column-width over total shelf column-width.
double space_utilization(const Planogram& p);

// Differentiable revenue readout over a normalized {5,S,K} grid node; equals
// expected_revenue on encoded grids.
NodeId revenue_node(Graph& g, NodeId grid, const GridCodec& codec, const RevenueModel& rm);

// Positive per-fixture scale that makes the revenue loss term dimensionless:
// the revenue of a hypothetical full fixture at catalog-average density.
double revenue_scale(const GridCodec& codec, const RevenueModel& rm);

// Aggregated evaluation over a sample batch. Counts are integers so merging
// partitions reproduces the whole-batch report exactly.
struct RunReport {
    std::array<std::uint64_t, kConstraintKinds> satisfied{};
    std::array<std::uint64_t, kConstraintKinds> total{};
    std::uint64_t samples = 0;
    double revenue_sum = 0.0;
    double util_sum = 0.0;
    double util_min = 1.0, util_max = 0.0;
    double overall_sum = 0.0, overall_sq_sum = 0.0;  // per-sample overall satisfaction
    double sampling_ms = 0.0;

    double rate(ConstraintKind k) const;
    double overall() const;  // mean of the five per-kind rates
    double mean_revenue() const;
    double mean_utilization() const;
    double overall_stddev() const;  // per-sample spread; resampling unit is a best guess

    static RunReport merge(const RunReport& a, const RunReport& b);
    nlohmann::json to_json() const;
    std::string render_table() const;  // five rows plus the overall mean
};

RunReport build_report(const std::vector<Planogram>& samples, const ConstraintSet& set,
                       const Catalog& catalog, const RevenueModel& rm, double sampling_ms = 0.0);

// Plain arithmetic mean of per-kind rates.
double overall_from_rates(const std::vector<double>& rates);

}  // namespace planoforge
