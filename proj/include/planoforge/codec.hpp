#pragma once

#include <array>
#include <functional>
#include <memory>

#include "planoforge/domain.hpp"
#include "planoforge/graph.hpp"
#include "planoforge/tensor.hpp"

namespace planoforge {

// Channel layout of the grid encoding.
inline constexpr std::size_t kSkuChannel = 0;       // scalar embedding code, empty = -1
inline constexpr std::size_t kDimChannel = 1;       // occupied width fraction of the cell
inline constexpr std::size_t kWeightChannel = 2;    // per-cell weight share
inline constexpr std::size_t kCategoryChannel = 3;  // category embedding code
inline constexpr std::size_t kPriceChannel = 4;
inline constexpr std::size_t kChannels = 5;
inline constexpr double kEmptyCode = -1.0;

// Affine map between raw channel units and the [-1, 1] model range.
struct ChannelScales {
    double a = 1.0, b = 0.0;
    double norm(double raw) const { return a * raw + b; }
    double denorm(double v) const { return (v - b) / a; }
};

struct PlanogramTensor {
    Tensor grid;  // {kChannels, S, K}
    std::array<ChannelScales, kChannels> norm;
};

// Bidirectional mapping between planograms and their grid encoding for one
// (catalog, fixture) pair.
//
// Sku codes: products sorted by (category, sku) get evenly spaced codes in
// (-1, 1]; -1 is the reserved empty code, so the code axis is a uniform grid
// and nearest-code decoding is well defined. Category codes use the same
// scheme over sorted category names.
//
// Decoding labels every cell with its nearest code (ties break toward the
// lower code), merges maximal same-label runs into placements, drops runs
// shorter than the product's minimum span, and reads facings from the
// dim channel. It is total: any finite grid of the right shape decodes to a
// structurally valid planogram. Adjacent same-sku placements merge into one
// run; corpus generation never emits those.
class GridCodec {
  public:
    GridCodec(Catalog catalog, Fixture fixture);

    PlanogramTensor encode(const Planogram& p) const;
    Planogram decode(const Tensor& grid, std::string store_id = "generated") const;

    const Catalog& catalog() const { return catalog_; }
    const Fixture& fixture() const { return fixture_; }
    const std::array<ChannelScales, kChannels>& scales() const { return scales_; }

    std::size_t product_count() const { return catalog_.size(); }
    // code for the product at catalog index i
    double sku_code(std::size_t catalog_index) const { return code_of_catalog_[catalog_index]; }
    double category_code(const std::string& category) const;
    double category_code_spacing() const { return 2.0 / static_cast<double>(category_count_); }

    // label 0 = empty; label k >= 1 = product at sorted position k-1
    std::size_t nearest_label(double sku_value) const;
    const Product& product_for_label(std::size_t label) const;

    // Piecewise-linear readout of a per-product attribute along the sku-code
    // axis; exact at the codes, linearly interpolated between them.
    std::shared_ptr<const PiecewiseTable> sku_attribute_table(
        const std::function<double(const Product&)>& attr, double empty_value) const;

    int min_span(const Product& p) const;  // columns needed for one facing

  private:
    Catalog catalog_;
    Fixture fixture_;
    std::array<ChannelScales, kChannels> scales_;
    std::vector<std::size_t> sorted_to_catalog_;  // sorted position -> catalog index
    std::vector<double> code_of_catalog_;         // catalog index -> code
    std::vector<double> codes_sorted_;            // sorted position -> code
    std::vector<std::string> categories_;
    std::size_t category_count_ = 0;
};

}  // namespace planoforge
