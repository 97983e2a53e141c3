#include "planoforge/codec.hpp"

#include <algorithm>
#include <cmath>

namespace planoforge {

namespace {
constexpr double kDimClampHi = 1.5;  // facing reads saturate here on wild grids
}

GridCodec::GridCodec(Catalog catalog, Fixture fixture)
    : catalog_(std::move(catalog)), fixture_(std::move(fixture)) {
    fixture_.check();
    const std::size_t n = catalog_.size();
    if (n == 0) throw InvariantError("codec: empty catalog");

    sorted_to_catalog_.resize(n);
    for (std::size_t i = 0; i < n; ++i) sorted_to_catalog_[i] = i;
    std::sort(sorted_to_catalog_.begin(), sorted_to_catalog_.end(),
              [&](std::size_t a, std::size_t b) {
                  const Product& pa = catalog_.at(a);
                  const Product& pb = catalog_.at(b);
                  if (pa.category != pb.category) return pa.category < pb.category;
                  return pa.sku < pb.sku;
              });
    code_of_catalog_.resize(n);
    codes_sorted_.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const double code = -1.0 + 2.0 * static_cast<double>(pos + 1) / static_cast<double>(n);
        codes_sorted_[pos] = code;
        code_of_catalog_[sorted_to_catalog_[pos]] = code;
    }

    categories_ = catalog_.categories();
    category_count_ = categories_.size();

    const double cw = fixture_.column_width();
    double max_cell_weight = 0.0;
    double max_price = 0.0;
    for (const Product& p : catalog_.products()) {
        max_cell_weight = std::max(max_cell_weight, cw * p.weight_kg / p.width_cm);
        max_price = std::max(max_price, p.price);
    }
    if (max_cell_weight <= 0.0) max_cell_weight = 1.0;
    if (max_price <= 0.0) max_price = 1.0;

    scales_[kSkuChannel] = {1.0, 0.0};
    scales_[kDimChannel] = {2.0, -1.0};                     // raw in [0,1]
    scales_[kWeightChannel] = {2.0 / max_cell_weight, -1.0};
    scales_[kCategoryChannel] = {1.0, 0.0};
    scales_[kPriceChannel] = {2.0 / max_price, -1.0};
}

double GridCodec::category_code(const std::string& category) const {
    const auto it = std::lower_bound(categories_.begin(), categories_.end(), category);
    if (it == categories_.end() || *it != category)
        throw InvariantError("codec: unknown category " + category);
    const auto pos = static_cast<std::size_t>(it - categories_.begin());
    return -1.0 + 2.0 * static_cast<double>(pos + 1) / static_cast<double>(category_count_);
}

std::size_t GridCodec::nearest_label(double sku_value) const {
    const double v = std::min(1.0, std::max(-1.0, sku_value));
    const double n = static_cast<double>(catalog_.size());
    // uniform grid {-1, codes...}; half-way points round down (lower code wins)
    const double pos = std::ceil((v + 1.0) * n / 2.0 - 0.5);
    const auto label = static_cast<std::size_t>(std::max(0.0, std::min(n, pos)));
    return label;
}

const Product& GridCodec::product_for_label(std::size_t label) const {
    return catalog_.at(sorted_to_catalog_[label - 1]);
}

int GridCodec::min_span(const Product& p) const {
    return static_cast<int>(std::ceil(p.width_cm / fixture_.column_width() - 1e-9));
}

std::shared_ptr<const PiecewiseTable> GridCodec::sku_attribute_table(
    const std::function<double(const Product&)>& attr, double empty_value) const {
    auto t = std::make_shared<PiecewiseTable>();
    t->xs.reserve(catalog_.size() + 1);
    t->ys.reserve(catalog_.size() + 1);
    t->xs.push_back(kEmptyCode);
    t->ys.push_back(empty_value);
    for (std::size_t pos = 0; pos < catalog_.size(); ++pos) {
        t->xs.push_back(codes_sorted_[pos]);
        t->ys.push_back(attr(catalog_.at(sorted_to_catalog_[pos])));
    }
    return t;
}

PlanogramTensor GridCodec::encode(const Planogram& p) const {
    require_structural(p, catalog_);
    const auto s = static_cast<std::size_t>(fixture_.shelf_count);
    const auto k = static_cast<std::size_t>(fixture_.slot_columns);
    if (p.fixture.shelf_count != fixture_.shelf_count || p.fixture.slot_columns != fixture_.slot_columns)
        throw ShapeError("encode: planogram fixture grid does not match codec fixture");

    PlanogramTensor out;
    out.norm = scales_;
    out.grid = Tensor::full({kChannels, s, k}, kEmptyCode);

    const double cw = fixture_.column_width();
    for (const Placement& pl : p.placements) {
        const Product& prod = catalog_.require(pl.sku);
        const double span_w = static_cast<double>(pl.span_columns) * cw;
        const double dim_raw = static_cast<double>(pl.facings) * prod.width_cm / span_w;
        const double weight_raw =
            static_cast<double>(pl.facings) * prod.weight_kg / static_cast<double>(pl.span_columns);
        const double sku_v = code_of_catalog_[catalog_.index_of(pl.sku)];
        const double dim_v = scales_[kDimChannel].norm(dim_raw);
        const double weight_v = scales_[kWeightChannel].norm(weight_raw);
        const double cat_v = category_code(prod.category);
        const double price_v = scales_[kPriceChannel].norm(prod.price);
        for (int col = pl.start_column; col < pl.start_column + pl.span_columns; ++col) {
            const auto c = static_cast<std::size_t>(col);
            const auto sh = static_cast<std::size_t>(pl.shelf_index);
            out.grid.at3(kSkuChannel, sh, c) = sku_v;
            out.grid.at3(kDimChannel, sh, c) = dim_v;
            out.grid.at3(kWeightChannel, sh, c) = weight_v;
            out.grid.at3(kCategoryChannel, sh, c) = cat_v;
            out.grid.at3(kPriceChannel, sh, c) = price_v;
        }
    }
    return out;
}

Planogram GridCodec::decode(const Tensor& grid, std::string store_id) const {
    const auto s = static_cast<std::size_t>(fixture_.shelf_count);
    const auto k = static_cast<std::size_t>(fixture_.slot_columns);
    if (grid.shape != Shape{kChannels, s, k})
        throw ShapeError("decode: grid shape " + shape_str(grid.shape) + " does not match fixture " +
                         shape_str({kChannels, s, k}));

    Planogram out;
    out.store_id = std::move(store_id);
    out.fixture = fixture_;

    const double cw = fixture_.column_width();
    for (std::size_t shelf = 0; shelf < s; ++shelf) {
        std::size_t col = 0;
        while (col < k) {
            const std::size_t label = nearest_label(grid.at3(kSkuChannel, shelf, col));
            if (label == 0) {
                ++col;
                continue;
            }
            std::size_t end = col + 1;
            while (end < k && nearest_label(grid.at3(kSkuChannel, shelf, end)) == label) ++end;
            const Product& prod = product_for_label(label);
            const auto len = static_cast<int>(end - col);
            if (len >= min_span(prod)) {
                double dim_sum = 0.0;
                for (std::size_t c = col; c < end; ++c) {
                    const double raw = scales_[kDimChannel].denorm(grid.at3(kDimChannel, shelf, c));
                    dim_sum += std::min(kDimClampHi, std::max(0.0, raw));
                }
                const double dim_mean = dim_sum / static_cast<double>(len);
                const double facing_est = dim_mean * static_cast<double>(len) * cw / prod.width_cm;
                const int facings = std::max(1, static_cast<int>(std::lround(facing_est)));
                out.placements.push_back({prod.sku, static_cast<int>(shelf), static_cast<int>(col),
                                          len, facings});
            }
            col = end;
        }
    }
    return out;
}

}  // namespace planoforge
