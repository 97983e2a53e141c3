#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "planoforge/errors.hpp"

namespace planoforge {

struct Product {
    std::string sku;
    double width_cm = 0.0;
    double height_cm = 0.0;
    double depth_cm = 0.0;
    double weight_kg = 0.0;
    std::string category;
    std::string brand;
    double price = 0.0;
    double margin = 0.0;  // may be negative
    bool age_restricted = false;
};

// Validated product list with unique skus.
class Catalog {
  public:
    Catalog() = default;
    static Catalog from_products(std::vector<Product> products);

    const std::vector<Product>& products() const { return products_; }
    std::size_t size() const { return products_.size(); }
    bool contains(const std::string& sku) const { return index_.count(sku) > 0; }
    const Product& at(std::size_t i) const { return products_[i]; }
    std::size_t index_of(const std::string& sku) const;
    const Product& require(const std::string& sku) const { return products_[index_of(sku)]; }

    // Distinct categories, sorted ascending.
    std::vector<std::string> categories() const;

  private:
    std::vector<Product> products_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct ShelfSpec {
    double clearance_height_cm = 0.0;
    double weight_capacity_kg = 0.0;
};

struct Fixture {
    double width_cm = 0.0;
    double height_cm = 0.0;
    int shelf_count = 0;
    std::vector<ShelfSpec> per_shelf;
    int slot_columns = 0;

    double column_width() const { return width_cm / slot_columns; }
    void check() const;  // throws InvariantError
};

struct Placement {
    std::string sku;
    int shelf_index = 0;
    int start_column = 0;
    int span_columns = 1;
    int facings = 1;

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct Planogram {
    std::string store_id;
    Fixture fixture;
    std::vector<Placement> placements;
};

struct StructuralViolation {
    int shelf_index = -1;
    int start_column = -1;
    int span_columns = 0;
    std::string message;
};

// Grid-level invariants: placements inside the slot grid, positive facings,
// no per-shelf column overlap, skus resolving against the catalog (when one
// is given). Physical fit against product dimensions is a constraint, not a
// structural property, and is checked by the constraints module.
std::vector<StructuralViolation> structural_violations(const Planogram& p,
                                                       const Catalog* catalog = nullptr);
void require_structural(const Planogram& p, const Catalog& catalog);

// Sorted by (shelf_index, start_column); placements never overlap, so this is
// a total order on valid planograms.
std::vector<Placement> canonical_placements(const Planogram& p);
bool same_layout(const Planogram& a, const Planogram& b);

}  // namespace planoforge
