#include "planoforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace planoforge {

double RevenueModel::proxy_for(const std::string& category, bool* known) const {
    const auto it = demand_proxy.find(category);
    if (known) *known = (it != demand_proxy.end());
    return it == demand_proxy.end() ? default_proxy : it->second;
}

double RevenueModel::multiplier(int shelf) const {
    if (shelf < 0 || static_cast<std::size_t>(shelf) >= position_multipliers.size()) return 1.0;
    return position_multipliers[static_cast<std::size_t>(shelf)];
}

RevenueModel default_revenue_model(const Fixture& fixture) {
    RevenueModel rm;
    rm.position_multipliers.assign(static_cast<std::size_t>(fixture.shelf_count), 1.0);
    const double eye = 0.6 * fixture.height_cm;
    double base = 0.0;
    std::size_t best = 0;
    double best_dist = 1e300;
    for (std::size_t s = 0; s < rm.position_multipliers.size(); ++s) {
        const double center = base + fixture.per_shelf[s].clearance_height_cm / 2.0;
        base += fixture.per_shelf[s].clearance_height_cm;
        const double d = std::abs(center - eye);
        if (d < best_dist) {
            best_dist = d;
            best = s;
        }
    }
    rm.position_multipliers[best] = 1.5;
    return rm;
}

double expected_revenue(const Planogram& p, const Catalog& catalog, const RevenueModel& rm,
                        std::vector<std::string>* log) {
    double total = 0.0;
    for (const Placement& pl : p.placements) {
        const Product& prod = catalog.require(pl.sku);
        bool known = true;
        const double proxy = rm.proxy_for(prod.category, &known);
        if (!known && !rm.demand_proxy.empty() && log)
            log->push_back("unknown category '" + prod.category + "', using default proxy");
        total += static_cast<double>(pl.facings) * prod.margin * proxy * rm.multiplier(pl.shelf_index);
    }
    return total;
}

double space_utilization(const Planogram& p) {
    int occupied = 0;
    for (const Placement& pl : p.placements) occupied += pl.span_columns;
    return static_cast<double>(occupied) /
           static_cast<double>(p.fixture.shelf_count * p.fixture.slot_columns);
}

NodeId revenue_node(Graph& g, NodeId grid, const GridCodec& codec, const RevenueModel& rm) {
    const Fixture& f = codec.fixture();
    const auto s = static_cast<std::size_t>(f.shelf_count);
    const auto k = static_cast<std::size_t>(f.slot_columns);
    const double cw = f.column_width();

    // margin density x demand, per unit width
    const auto rev_density = codec.sku_attribute_table(
        [&](const Product& p) { return p.margin * rm.proxy_for(p.category) / p.width_cm; }, 0.0);

    const auto& ds = codec.scales()[kDimChannel];
    const NodeId sku = g.reshape(g.slice(grid, {kSkuChannel, 0, 0}, {1, s, k}), {s, k});
    const NodeId dim_raw =
        g.relu(g.affine(g.reshape(g.slice(grid, {kDimChannel, 0, 0}, {1, s, k}), {s, k}),
                        1.0 / ds.a, -ds.b / ds.a));
    const NodeId cell_rev = g.affine(g.mul(dim_raw, g.table(sku, rev_density)), cw, 0.0);

    NodeId total = g.input(Tensor::scalar(0.0));
    for (std::size_t shelf = 0; shelf < s; ++shelf) {
        const NodeId row = g.reduce_sum(g.slice(cell_rev, {shelf, 0}, {1, k}));
        total = g.add(total, g.affine(row, rm.multiplier(static_cast<int>(shelf)), 0.0));
    }
    return total;
}

double revenue_scale(const GridCodec& codec, const RevenueModel& rm) {
    const Fixture& f = codec.fixture();
    double density = 0.0;
    for (const Product& p : codec.catalog().products())
        density += std::max(0.0, p.margin) * rm.proxy_for(p.category) / p.width_cm;
    density /= static_cast<double>(codec.catalog().size());
    double mult_sum = 0.0;
    for (int shelf = 0; shelf < f.shelf_count; ++shelf) mult_sum += rm.multiplier(shelf);
    return std::max(1.0, density * f.column_width() * static_cast<double>(f.slot_columns) * mult_sum);
}

double RunReport::rate(ConstraintKind k) const {
    const auto i = static_cast<std::size_t>(k);
    if (total[i] == 0) return 1.0;
    return static_cast<double>(satisfied[i]) / static_cast<double>(total[i]);
}

double RunReport::overall() const {
    double acc = 0.0;
    for (ConstraintKind k : kAllConstraintKinds) acc += rate(k);
    return acc / static_cast<double>(kConstraintKinds);
}

double RunReport::mean_revenue() const {
    return samples == 0 ? 0.0 : revenue_sum / static_cast<double>(samples);
}

double RunReport::mean_utilization() const {
    return samples == 0 ? 0.0 : util_sum / static_cast<double>(samples);
}

double RunReport::overall_stddev() const {
    if (samples < 2) return 0.0;
    const double n = static_cast<double>(samples);
    const double mean = overall_sum / n;
    return std::sqrt(std::max(0.0, overall_sq_sum / n - mean * mean));
}

RunReport RunReport::merge(const RunReport& a, const RunReport& b) {
    RunReport r = a;
    for (std::size_t i = 0; i < kConstraintKinds; ++i) {
        r.satisfied[i] += b.satisfied[i];
        r.total[i] += b.total[i];
    }
    r.samples += b.samples;
    r.revenue_sum += b.revenue_sum;
    r.util_sum += b.util_sum;
    r.util_min = std::min(a.samples ? a.util_min : 1.0, b.samples ? b.util_min : 1.0);
    r.util_max = std::max(a.samples ? a.util_max : 0.0, b.samples ? b.util_max : 0.0);
    r.overall_sum += b.overall_sum;
    r.overall_sq_sum += b.overall_sq_sum;
    r.sampling_ms += b.sampling_ms;
    return r;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json rates = nlohmann::json::object();
    for (ConstraintKind k : kAllConstraintKinds) rates[kind_name(k)] = rate(k);
    return {{"samples", samples},
            {"per_kind_rate", rates},
            {"overall", overall()},
            {"overall_stddev", overall_stddev()},
            {"overall_stddev_note", "per-sample spread; the resampling unit is a best guess"},
            {"mean_expected_revenue", mean_revenue()},
            {"space_utilization",
             {{"min", samples ? util_min : 0.0}, {"mean", mean_utilization()},
              {"max", samples ? util_max : 0.0}}},
            {"sampling_ms", sampling_ms}};
}

std::string RunReport::render_table() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    const char* labels[kConstraintKinds] = {"Physical feasibility", "Weight limit compliance",
                                            "Category grouping", "Regulatory compliance",
                                            "Brand placement"};
    for (std::size_t i = 0; i < kConstraintKinds; ++i)
        out << labels[i] << ": " << 100.0 * rate(static_cast<ConstraintKind>(i)) << "%\n";
    out << "Overall: " << 100.0 * overall() << "%\n";
    return out.str();
}

RunReport build_report(const std::vector<Planogram>& samples, const ConstraintSet& set,
                       const Catalog& catalog, const RevenueModel& rm, double sampling_ms) {
    RunReport r;
    r.sampling_ms = sampling_ms;
    for (const Planogram& p : samples) {
        const ValidationReport v = validate(p, set, catalog);
        for (std::size_t i = 0; i < kConstraintKinds; ++i) {
            r.satisfied[i] += v.satisfied_count[i];
            r.total[i] += v.total_count[i];
        }
        r.samples += 1;
        r.revenue_sum += expected_revenue(p, catalog, rm);
        const double util = space_utilization(p);
        r.util_sum += util;
        r.util_min = std::min(r.util_min, util);
        r.util_max = std::max(r.util_max, util);
        const double overall = v.overall();
        r.overall_sum += overall;
        r.overall_sq_sum += overall * overall;
    }
    return r;
}

double overall_from_rates(const std::vector<double>& rates) {
    double acc = 0.0;
    for (double r : rates) acc += r;
    return rates.empty() ? 1.0 : acc / static_cast<double>(rates.size());
}

}  // namespace planoforge
