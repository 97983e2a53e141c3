#include "planoforge/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace planoforge {

std::string kind_name(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::PhysicalFit: return "physical-fit";
        case ConstraintKind::WeightLimit: return "weight-limit";
        case ConstraintKind::CategoryGrouping: return "category-grouping";
        case ConstraintKind::RegulatoryAge: return "regulatory-age";
        case ConstraintKind::BrandPlacement: return "brand-placement";
    }
    throw ValueError("unknown constraint kind");
}

ConstraintKind kind_from_name(const std::string& name) {
    for (ConstraintKind k : kAllConstraintKinds)
        if (kind_name(k) == name) return k;
    throw ValueError("unknown constraint kind '" + name + "'");
}

namespace {

// occupied[shelf][col] = category ordinal + 1, or 0 when empty
std::vector<std::vector<int>> category_cells(const Planogram& p, const Catalog& catalog) {
    std::vector<std::string> cats = catalog.categories();
    std::vector<std::vector<int>> cells(
        static_cast<std::size_t>(p.fixture.shelf_count),
        std::vector<int>(static_cast<std::size_t>(p.fixture.slot_columns), 0));
    for (const Placement& pl : p.placements) {
        const Product& prod = catalog.require(pl.sku);
        const auto it = std::lower_bound(cats.begin(), cats.end(), prod.category);
        const int cat_id = static_cast<int>(it - cats.begin()) + 1;
        for (int c = pl.start_column; c < pl.start_column + pl.span_columns; ++c)
            cells[static_cast<std::size_t>(pl.shelf_index)][static_cast<std::size_t>(c)] = cat_id;
    }
    return cells;
}

double grouping_fraction(const std::vector<std::vector<int>>& cells) {
    std::uint64_t pairs = 0, same = 0;
    for (const auto& row : cells)
        for (std::size_t c = 0; c + 1 < row.size(); ++c) {
            if (row[c] == 0 || row[c + 1] == 0) continue;
            ++pairs;
            if (row[c] == row[c + 1]) ++same;
        }
    if (pairs == 0) return 1.0;
    return static_cast<double>(same) / static_cast<double>(pairs);
}

// brand cells per shelf as sorted column lists
std::map<int, std::vector<int>> brand_cells(const Planogram& p, const Catalog& catalog,
                                            const std::string& brand) {
    std::map<int, std::vector<int>> by_shelf;
    for (const Placement& pl : p.placements) {
        if (catalog.require(pl.sku).brand != brand) continue;
        for (int c = pl.start_column; c < pl.start_column + pl.span_columns; ++c)
            by_shelf[pl.shelf_index].push_back(c);
    }
    for (auto& [shelf, cols] : by_shelf) std::sort(cols.begin(), cols.end());
    return by_shelf;
}

bool contract_violated(const std::map<int, std::vector<int>>& cells, const BrandContract& bc) {
    if (cells.empty()) return false;  // brand absent: nothing to honor
    for (const auto& [shelf, cols] : cells) {
        if (shelf < bc.shelf_lo || shelf > bc.shelf_hi) return true;
        if (cols.back() - cols.front() + 1 != static_cast<int>(cols.size())) return true;
    }
    return false;
}

double brand_margin_from_flags(std::size_t violated, std::size_t total) {
    if (total == 0 || violated == 0) return 1.0;
    return -(static_cast<double>(violated) / static_cast<double>(total));
}

}  // namespace

double constraint_margin(const Constraint& c, const Planogram& p, const Catalog& catalog) {
    const Fixture& f = p.fixture;
    const double cw = f.column_width();
    switch (c.kind) {
        case ConstraintKind::PhysicalFit: {
            double m = 1.0;
            for (const Placement& pl : p.placements) {
                const Product& prod = catalog.require(pl.sku);
                const double span_w = static_cast<double>(pl.span_columns) * cw;
                const double req_w = static_cast<double>(pl.facings) * prod.width_cm;
                m = std::min(m, (span_w - req_w) / cw);
            }
            std::vector<double> tallest(static_cast<std::size_t>(f.shelf_count), 0.0);
            for (const Placement& pl : p.placements) {
                const Product& prod = catalog.require(pl.sku);
                auto& t = tallest[static_cast<std::size_t>(pl.shelf_index)];
                t = std::max(t, prod.height_cm);
            }
            for (int s = 0; s < f.shelf_count; ++s) {
                const double clear = f.per_shelf[static_cast<std::size_t>(s)].clearance_height_cm;
                m = std::min(m, (clear - tallest[static_cast<std::size_t>(s)]) / clear);
            }
            return m;
        }
        case ConstraintKind::WeightLimit: {
            std::vector<double> load(static_cast<std::size_t>(f.shelf_count), 0.0);
            for (const Placement& pl : p.placements)
                load[static_cast<std::size_t>(pl.shelf_index)] +=
                    static_cast<double>(pl.facings) * catalog.require(pl.sku).weight_kg;
            double m = 1.0;
            for (int s = 0; s < f.shelf_count; ++s) {
                const double cap = f.per_shelf[static_cast<std::size_t>(s)].weight_capacity_kg;
                m = std::min(m, (cap - load[static_cast<std::size_t>(s)]) / cap);
            }
            return m;
        }
        case ConstraintKind::CategoryGrouping:
            return grouping_fraction(category_cells(p, catalog)) - c.category_threshold;
        case ConstraintKind::RegulatoryAge: {
            double m = 1.0;
            bool any = false;
            for (const Placement& pl : p.placements) {
                if (!catalog.require(pl.sku).age_restricted) continue;
                any = true;
                m = std::min(m, static_cast<double>(pl.shelf_index - c.min_shelf_index) /
                                    static_cast<double>(f.shelf_count));
            }
            return any ? m : 1.0;
        }
        case ConstraintKind::BrandPlacement: {
            std::size_t violated = 0;
            for (const BrandContract& bc : c.contracts)
                if (contract_violated(brand_cells(p, catalog, bc.brand), bc)) ++violated;
            return brand_margin_from_flags(violated, c.contracts.size());
        }
    }
    throw ValueError("unknown constraint kind");
}

double hinge_loss(const ConstraintSet& set, const Planogram& p, const Catalog& catalog) {
    double total = 0.0;
    for (const Constraint& c : set)
        total += c.weight * std::max(0.0, -constraint_margin(c, p, catalog));
    return total;
}

double ValidationReport::rate(ConstraintKind k) const {
    const auto i = static_cast<std::size_t>(k);
    if (total_count[i] == 0) return 1.0;
    return static_cast<double>(satisfied_count[i]) / static_cast<double>(total_count[i]);
}

double ValidationReport::overall() const {
    double acc = 0.0;
    for (ConstraintKind k : kAllConstraintKinds) acc += rate(k);
    return acc / static_cast<double>(kConstraintKinds);
}

ValidationReport validate(const Planogram& p, const ConstraintSet& set, const Catalog& catalog) {
    ValidationReport r;
    for (const Constraint& c : set) {
        const double m = constraint_margin(c, p, catalog);
        const bool ok = m >= 0.0;
        r.per_constraint.push_back({c.kind, ok, m});
        const auto i = static_cast<std::size_t>(c.kind);
        r.total_count[i] += 1;
        if (ok) r.satisfied_count[i] += 1;
    }
    return r;
}

nlohmann::json constraints_to_json(const ConstraintSet& set) {
    nlohmann::json out = nlohmann::json::array();
    for (const Constraint& c : set) {
        nlohmann::json params = nlohmann::json::object();
        switch (c.kind) {
            case ConstraintKind::CategoryGrouping:
                params["threshold"] = c.category_threshold;
                break;
            case ConstraintKind::RegulatoryAge:
                params["min_shelf_index"] = c.min_shelf_index;
                break;
            case ConstraintKind::BrandPlacement: {
                nlohmann::json arr = nlohmann::json::array();
                for (const BrandContract& bc : c.contracts)
                    arr.push_back({{"brand", bc.brand},
                                   {"shelf_lo", bc.shelf_lo},
                                   {"shelf_hi", bc.shelf_hi}});
                params["contracts"] = arr;
                break;
            }
            default:
                break;
        }
        out.push_back({{"kind", kind_name(c.kind)}, {"weight", c.weight}, {"params", params}});
    }
    return out;
}

ConstraintSet constraints_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw IoError("constraints: expected a JSON array");
    ConstraintSet set;
    for (const auto& jc : j) {
        Constraint c;
        c.kind = kind_from_name(jc.at("kind").get<std::string>());
        c.weight = jc.value("weight", 1.0);
        if (c.weight < 0.0) throw IoError("constraints: negative weight");
        const nlohmann::json params = jc.value("params", nlohmann::json::object());
        switch (c.kind) {
            case ConstraintKind::CategoryGrouping:
                c.category_threshold = params.value("threshold", 0.8);
                break;
            case ConstraintKind::RegulatoryAge:
                c.min_shelf_index = params.value("min_shelf_index", 2);
                break;
            case ConstraintKind::BrandPlacement:
                for (const auto& jb : params.value("contracts", nlohmann::json::array()))
                    c.contracts.push_back({jb.at("brand").get<std::string>(),
                                           jb.at("shelf_lo").get<int>(),
                                           jb.at("shelf_hi").get<int>()});
                break;
            default:
                if (!params.empty() && c.kind != ConstraintKind::CategoryGrouping &&
                    c.kind != ConstraintKind::RegulatoryAge)
                    throw IoError("constraints: " + kind_name(c.kind) + " takes no params");
                break;
        }
        set.push_back(std::move(c));
    }
    return set;
}

nlohmann::json validation_report_to_json(const ValidationReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const ConstraintResult& c : r.per_constraint)
        per.push_back(
            {{"kind", kind_name(c.kind)}, {"satisfied", c.satisfied}, {"margin", c.margin}});
    nlohmann::json rates = nlohmann::json::object();
    for (ConstraintKind k : kAllConstraintKinds) rates[kind_name(k)] = r.rate(k);
    return {{"per_constraint", per}, {"per_category_rate", rates}, {"overall", r.overall()}};
}

// ---------------------------------------------------------------------------
// Differentiable grid path
// ---------------------------------------------------------------------------

GridPenalty::GridPenalty(std::shared_ptr<const GridCodec> codec, ConstraintSet set)
    : codec_(std::move(codec)), set_(std::move(set)) {
    occupancy_ = codec_->sku_attribute_table([](const Product&) { return 1.0; }, 0.0);
    height_ = codec_->sku_attribute_table([](const Product& p) { return p.height_cm; }, 0.0);
    density_ = codec_->sku_attribute_table(
        [](const Product& p) { return p.weight_kg / p.width_cm; }, 0.0);
    age_flag_ = codec_->sku_attribute_table(
        [](const Product& p) { return p.age_restricted ? 1.0 : 0.0; }, 0.0);
}

std::vector<GridPenalty::Run> GridPenalty::segment(const Tensor& grid) const {
    const std::size_t s = grid.shape[1], k = grid.shape[2];
    std::vector<Run> runs;
    for (std::size_t shelf = 0; shelf < s; ++shelf) {
        std::size_t col = 0;
        while (col < k) {
            const std::size_t label = codec_->nearest_label(grid.at3(kSkuChannel, shelf, col));
            if (label == 0) {
                ++col;
                continue;
            }
            std::size_t end = col + 1;
            while (end < k && codec_->nearest_label(grid.at3(kSkuChannel, shelf, end)) == label)
                ++end;
            runs.push_back({shelf, col, end - col, label});
            col = end;
        }
    }
    return runs;
}

NodeId GridPenalty::margin_node(Graph& g, NodeId grid, const Constraint& c) const {
    const Fixture& f = codec_->fixture();
    const auto s = static_cast<std::size_t>(f.shelf_count);
    const auto k = static_cast<std::size_t>(f.slot_columns);
    const double cw = f.column_width();
    const auto& scales = codec_->scales();

    auto channel2d = [&](std::size_t ch) {
        return g.reshape(g.slice(grid, {ch, 0, 0}, {1, s, k}), {s, k});
    };
    auto shelf_row = [&](NodeId plane, std::size_t shelf) {
        return g.slice(plane, {shelf, 0}, {1, k});
    };

    switch (c.kind) {
        case ConstraintKind::PhysicalFit: {
            const NodeId sku = channel2d(kSkuChannel);
            // occupied width fraction per cell, floored at zero
            const ChannelScales& ds = scales[kDimChannel];
            const NodeId dim_raw = g.relu(g.affine(channel2d(kDimChannel), 1.0 / ds.a, -ds.b / ds.a));
            const NodeId slack = g.affine(dim_raw, -1.0, 1.0);  // 1 - fraction
            std::vector<NodeId> candidates;
            for (const Run& r : segment(g.value(grid)))
                candidates.push_back(
                    g.reduce_sum(g.slice(slack, {r.shelf, r.start}, {1, r.len})));
            const NodeId heights = g.table(sku, height_);
            for (std::size_t shelf = 0; shelf < s; ++shelf) {
                const double clear = f.per_shelf[shelf].clearance_height_cm;
                candidates.push_back(
                    g.affine(g.reduce_max(shelf_row(heights, shelf)), -1.0 / clear, 1.0));
            }
            return g.reduce_min(g.concat(candidates, 0));
        }
        case ConstraintKind::WeightLimit: {
            const NodeId sku = channel2d(kSkuChannel);
            const ChannelScales& ds = scales[kDimChannel];
            const NodeId dim_raw = g.relu(g.affine(channel2d(kDimChannel), 1.0 / ds.a, -ds.b / ds.a));
            const NodeId cell_load = g.affine(g.mul(dim_raw, g.table(sku, density_)), cw, 0.0);
            std::vector<NodeId> margins;
            for (std::size_t shelf = 0; shelf < s; ++shelf) {
                const double cap = f.per_shelf[shelf].weight_capacity_kg;
                margins.push_back(
                    g.affine(g.reduce_sum(shelf_row(cell_load, shelf)), -1.0 / cap, 1.0));
            }
            return g.reduce_min(g.concat(margins, 0));
        }
        case ConstraintKind::CategoryGrouping: {
            const NodeId occ = g.table(channel2d(kSkuChannel), occupancy_);
            const NodeId cat = channel2d(kCategoryChannel);
            const NodeId occ_l = g.slice(occ, {0, 0}, {s, k - 1});
            const NodeId occ_r = g.slice(occ, {0, 1}, {s, k - 1});
            const NodeId pair_w = g.mul(occ_l, occ_r);
            const NodeId dcat = g.sub(g.slice(cat, {0, 0}, {s, k - 1}), g.slice(cat, {0, 1}, {s, k - 1}));
            const NodeId absd = g.add(g.relu(dcat), g.relu(g.affine(dcat, -1.0, 0.0)));
            const double spacing = codec_->category_code_spacing();
            const NodeId sim = g.relu(g.affine(absd, -1.0 / spacing, 1.0));
            const NodeId same = g.reduce_sum(g.mul(pair_w, sim));
            const NodeId total = g.reduce_sum(pair_w);
            const double eps = 1e-9;  // vacuous (no pairs) resolves to 1
            const NodeId frac = g.div(g.affine(same, 1.0, eps), g.affine(total, 1.0, eps));
            return g.affine(frac, 1.0, -c.category_threshold);
        }
        case ConstraintKind::RegulatoryAge: {
            const NodeId aged = g.table(channel2d(kSkuChannel), age_flag_);
            std::vector<NodeId> rows;
            for (std::size_t shelf = 0; shelf < s; ++shelf) {
                const double base = static_cast<double>(static_cast<int>(shelf) - c.min_shelf_index) /
                                    static_cast<double>(f.shelf_count);
                // aged cell -> its shelf margin, empty/ordinary cell -> +1
                rows.push_back(g.affine(shelf_row(aged, shelf), base - 1.0, 1.0));
            }
            return g.reduce_min(g.concat(rows, 0));
        }
        case ConstraintKind::BrandPlacement: {
            // label-derived brand layout; discrete, so the margin enters as a
            // constant (zero gradient) but its value matches the hard path
            std::map<std::string, std::map<int, std::vector<int>>> cells_by_brand;
            for (const Run& r : segment(g.value(grid))) {
                const Product& prod = codec_->product_for_label(r.label);
                auto& cols = cells_by_brand[prod.brand][static_cast<int>(r.shelf)];
                for (std::size_t i = 0; i < r.len; ++i)
                    cols.push_back(static_cast<int>(r.start + i));
            }
            for (auto& [brand, shelves] : cells_by_brand)
                for (auto& [shelf, cols] : shelves) std::sort(cols.begin(), cols.end());
            std::size_t violated = 0;
            for (const BrandContract& bc : c.contracts) {
                const auto it = cells_by_brand.find(bc.brand);
                if (it == cells_by_brand.end()) continue;
                if (contract_violated(it->second, bc)) ++violated;
            }
            return g.input(Tensor::scalar(brand_margin_from_flags(violated, c.contracts.size())));
        }
    }
    throw ValueError("unknown constraint kind");
}

NodeId GridPenalty::hinge_node(Graph& g, NodeId grid) const {
    NodeId total = g.input(Tensor::scalar(0.0));
    for (const Constraint& c : set_) {
        const NodeId m = margin_node(g, grid, c);
        total = g.add(total, g.affine(g.relu(g.affine(m, -1.0, 0.0)), c.weight, 0.0));
    }
    return total;
}

double GridPenalty::hinge_value(const Tensor& grid) const {
    Graph g;
    return g.value(hinge_node(g, g.input(grid))).item();
}

}  // namespace planoforge
