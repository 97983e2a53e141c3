#include "planoforge/domain.hpp"

#include <algorithm>
#include <set>

namespace planoforge {

Catalog Catalog::from_products(std::vector<Product> products) {
    Catalog c;
    c.products_ = std::move(products);
    for (std::size_t i = 0; i < c.products_.size(); ++i) {
        const Product& p = c.products_[i];
        if (p.sku.empty()) throw InvariantError("catalog: empty sku at record " + std::to_string(i));
        if (!(p.width_cm > 0.0) || !(p.height_cm > 0.0) || !(p.depth_cm > 0.0))
            throw InvariantError("catalog: non-positive dimension for sku " + p.sku);
        if (!(p.weight_kg > 0.0))
            throw InvariantError("catalog: non-positive weight_kg for sku " + p.sku);
        if (p.price < 0.0) throw InvariantError("catalog: negative price for sku " + p.sku);
        if (!c.index_.emplace(p.sku, i).second)
            throw InvariantError("catalog: duplicate sku " + p.sku);
    }
    return c;
}

std::size_t Catalog::index_of(const std::string& sku) const {
    const auto it = index_.find(sku);
    if (it == index_.end()) throw InvariantError("unknown sku " + sku);
    return it->second;
}

std::vector<std::string> Catalog::categories() const {
    std::set<std::string> cats;
    for (const Product& p : products_) cats.insert(p.category);
    return {cats.begin(), cats.end()};
}

void Fixture::check() const {
    if (!(width_cm > 0.0) || !(height_cm > 0.0))
        throw InvariantError("fixture: width and height must be positive");
    if (shelf_count < 1 || static_cast<std::size_t>(shelf_count) != per_shelf.size())
        throw InvariantError("fixture: shelf_count must be >= 1 and match per_shelf length");
    if (slot_columns < 1) throw InvariantError("fixture: slot_columns must be >= 1");
    double total_clearance = 0.0;
    for (const ShelfSpec& s : per_shelf) {
        if (!(s.weight_capacity_kg > 0.0))
            throw InvariantError("fixture: weight capacity must be positive");
        if (!(s.clearance_height_cm > 0.0))
            throw InvariantError("fixture: clearance must be positive");
        total_clearance += s.clearance_height_cm;
    }
    if (total_clearance > height_cm + 1e-9)
        throw InvariantError("fixture: shelf clearances exceed fixture height");
}

std::vector<StructuralViolation> structural_violations(const Planogram& p, const Catalog* catalog) {
    std::vector<StructuralViolation> out;
    try {
        p.fixture.check();
    } catch (const InvariantError& e) {
        out.push_back({-1, -1, 0, e.what()});
        return out;
    }
    const int s_count = p.fixture.shelf_count;
    const int k = p.fixture.slot_columns;
    // per-shelf sweep for overlaps
    std::vector<std::vector<std::pair<int, int>>> spans(static_cast<std::size_t>(s_count));
    for (const Placement& pl : p.placements) {
        if (pl.shelf_index < 0 || pl.shelf_index >= s_count) {
            out.push_back({pl.shelf_index, pl.start_column, pl.span_columns,
                           "shelf_index out of range for sku " + pl.sku});
            continue;
        }
        if (pl.start_column < 0 || pl.span_columns < 1 || pl.start_column + pl.span_columns > k)
            out.push_back({pl.shelf_index, pl.start_column, pl.span_columns,
                           "column span outside the slot grid for sku " + pl.sku});
        if (pl.facings < 1)
            out.push_back({pl.shelf_index, pl.start_column, pl.span_columns,
                           "facings must be >= 1 for sku " + pl.sku});
        if (catalog && !catalog->contains(pl.sku))
            out.push_back({pl.shelf_index, pl.start_column, pl.span_columns, "unknown sku " + pl.sku});
        if (pl.shelf_index >= 0 && pl.shelf_index < s_count)
            spans[static_cast<std::size_t>(pl.shelf_index)].emplace_back(pl.start_column,
                                                                         pl.span_columns);
    }
    for (int shelf = 0; shelf < s_count; ++shelf) {
        auto& v = spans[static_cast<std::size_t>(shelf)];
        std::sort(v.begin(), v.end());
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i - 1].first + v[i - 1].second > v[i].first)
                out.push_back({shelf, v[i].first, v[i].second,
                               "overlapping placements on shelf " + std::to_string(shelf) +
                                   " at columns " + std::to_string(v[i].first) + ".." +
                                   std::to_string(v[i].first + v[i].second - 1)});
        }
    }
    return out;
}

void require_structural(const Planogram& p, const Catalog& catalog) {
    const auto violations = structural_violations(p, &catalog);
    if (violations.empty()) return;
    std::string msg = "planogram structural violations:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw InvariantError(msg);
}

std::vector<Placement> canonical_placements(const Planogram& p) {
    std::vector<Placement> out = p.placements;
    std::sort(out.begin(), out.end(), [](const Placement& a, const Placement& b) {
        if (a.shelf_index != b.shelf_index) return a.shelf_index < b.shelf_index;
        return a.start_column < b.start_column;
    });
    return out;
}

bool same_layout(const Planogram& a, const Planogram& b) {
    return canonical_placements(a) == canonical_placements(b);
}

}  // namespace planoforge
