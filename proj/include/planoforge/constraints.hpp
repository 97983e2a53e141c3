#pragma once

#include <array>
#include <json.hpp>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "planoforge/codec.hpp"
#include "planoforge/domain.hpp"
#include "planoforge/graph.hpp"

namespace planoforge {

enum class ConstraintKind : int {
    PhysicalFit = 0,
    WeightLimit = 1,
    CategoryGrouping = 2,
    RegulatoryAge = 3,
    BrandPlacement = 4,
};
inline constexpr std::size_t kConstraintKinds = 5;
inline constexpr std::array<ConstraintKind, kConstraintKinds> kAllConstraintKinds = {
    ConstraintKind::PhysicalFit, ConstraintKind::WeightLimit, ConstraintKind::CategoryGrouping,
    ConstraintKind::RegulatoryAge, ConstraintKind::BrandPlacement};

std::string kind_name(ConstraintKind k);
ConstraintKind kind_from_name(const std::string& name);

struct BrandContract {
    std::string brand;
    int shelf_lo = 0;
    int shelf_hi = 0;  // inclusive band
};

// One constraint instance. Margins are signed and scale-normalized so that
// margin >= 0 <=> the hard validator passes and |margin| is O(1) at typical
// violations:
//   physical-fit     min over placements of (span width - needed width)/(W/K)
//                    and over shelves of (clearance - tallest)/clearance
//   weight-limit     min over shelves of (capacity - load)/capacity
//   category-group   same-category fraction of adjacent occupied cell pairs,
//                    minus the threshold; no pairs counts as fully grouped
//   regulatory-age   min over age-restricted placements of (shelf - min)/S,
//                    +1 when none are placed
//   brand-placement  +1 when every contract holds (brand inside its shelf
//                    band, contiguous per shelf), else -violated/contracts
struct Constraint {
    ConstraintKind kind = ConstraintKind::PhysicalFit;
    double weight = 1.0;
    double category_threshold = 0.8;       // category-grouping
    int min_shelf_index = 2;               // regulatory-age
    std::vector<BrandContract> contracts;  // brand-placement
};

using ConstraintSet = std::vector<Constraint>;

double constraint_margin(const Constraint& c, const Planogram& p, const Catalog& catalog);

// Weighted hinge penalty: sum_i weight_i * max(0, -margin_i). Zero exactly
// when every margin is nonnegative.
double hinge_loss(const ConstraintSet& set, const Planogram& p, const Catalog& catalog);

struct ConstraintResult {
    ConstraintKind kind;
    bool satisfied;
    double margin;
};

struct ValidationReport {
    std::vector<ConstraintResult> per_constraint;
    // satisfied/total instance counts per kind; rate is 1 for absent kinds
    std::array<std::uint64_t, kConstraintKinds> satisfied_count{};
    std::array<std::uint64_t, kConstraintKinds> total_count{};

    double rate(ConstraintKind k) const;
    double overall() const;  // arithmetic mean of the five per-kind rates
};

ValidationReport validate(const Planogram& p, const ConstraintSet& set, const Catalog& catalog);

nlohmann::json constraints_to_json(const ConstraintSet& set);
ConstraintSet constraints_from_json(const nlohmann::json& j);
nlohmann::json validation_report_to_json(const ValidationReport& r);

// Differentiable penalty over a normalized {5,S,K} grid node. Cell labels
// (which product, where runs begin and end) are read off the current values
// and held fixed; margins are then graph functions of the channel values, so
// gradients flow through facings, weights, heights and category mixing.
// Values agree with the planogram-path margins on encoded grids. The
// brand-placement margin is inherently discrete and enters as a constant.
class GridPenalty {
  public:
    GridPenalty(std::shared_ptr<const GridCodec> codec, ConstraintSet set);

    const ConstraintSet& set() const { return set_; }
    const GridCodec& codec() const { return *codec_; }

    NodeId margin_node(Graph& g, NodeId grid, const Constraint& c) const;
    NodeId hinge_node(Graph& g, NodeId grid) const;
    double hinge_value(const Tensor& grid) const;

  private:
    struct Run {
        std::size_t shelf, start, len, label;
    };
    std::vector<Run> segment(const Tensor& grid) const;

    std::shared_ptr<const GridCodec> codec_;
    ConstraintSet set_;
    std::shared_ptr<const PiecewiseTable> occupancy_, height_, density_, age_flag_;
};

}  // namespace planoforge
