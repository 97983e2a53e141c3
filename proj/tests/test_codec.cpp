#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "planoforge/codec.hpp"
#include "planoforge/corpus.hpp"

using namespace planoforge;

namespace {
Fixture basic_fixture() {
    Fixture f;
    f.width_cm = 96;
    f.height_cm = 180;
    f.shelf_count = 4;
    f.slot_columns = 16;
    for (int i = 0; i < 4; ++i) f.per_shelf.push_back({42.0, 30.0});
    return f;
}
}  // namespace

TEST_CASE("empty planogram encodes to the empty code everywhere") {
    Rng rng(1);
    GridCodec codec(oracle::small_catalog(rng), basic_fixture());
    Planogram p;
    p.store_id = "s";
    p.fixture = basic_fixture();
    const PlanogramTensor t = codec.encode(p);
    REQUIRE(t.grid.shape == Shape{5, 4, 16});
    for (double v : t.grid.data) CHECK(v == kEmptyCode);
}

TEST_CASE("single placement occupies exactly its span in the sku channel") {
    Rng rng(2);
    Catalog cat = oracle::small_catalog(rng);
    GridCodec codec(cat, basic_fixture());
    Planogram p;
    p.store_id = "s";
    p.fixture = basic_fixture();
    p.placements = {{cat.at(0).sku, 0, 0, 2, 1}};
    const PlanogramTensor t = codec.encode(p);
    int occupied = 0;
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t k = 0; k < 16; ++k)
            if (t.grid.at3(kSkuChannel, s, k) != kEmptyCode) ++occupied;
    CHECK(occupied == 2);
}

TEST_CASE("encode rejects unknown skus and overlaps") {
    Rng rng(3);
    GridCodec codec(oracle::small_catalog(rng), basic_fixture());
    Planogram p;
    p.store_id = "s";
    p.fixture = basic_fixture();
    p.placements = {{"ghost", 0, 0, 2, 1}};
    CHECK_THROWS_WITH_AS(codec.encode(p), doctest::Contains("ghost"), InvariantError);
    p.placements = {{codec.catalog().at(0).sku, 0, 0, 4, 1}, {codec.catalog().at(1).sku, 0, 2, 3, 1}};
    CHECK_THROWS_WITH_AS(codec.encode(p), doctest::Contains("overlap"), InvariantError);
}

TEST_CASE("nearest label ties break toward the lower code") {
    Rng rng(4);
    Catalog cat = oracle::small_catalog(rng, 10);
    GridCodec codec(cat, basic_fixture());
    // halfway between empty (-1) and the first code
    const double first_code = -1.0 + 2.0 / 10.0;
    const double mid = (-1.0 + first_code) / 2.0;
    CHECK(codec.nearest_label(mid) == 0);
    CHECK(codec.nearest_label(std::nextafter(mid, 1.0)) == 1);
    CHECK(codec.nearest_label(-1.0) == 0);
    CHECK(codec.nearest_label(1.0) == 10);
    CHECK(codec.nearest_label(37.0) == 10);   // clamped
    CHECK(codec.nearest_label(-37.0) == 0);
}

TEST_CASE("channel normalization round-trips within 1e-9") {
    Rng rng(5);
    GridCodec codec(oracle::small_catalog(rng), basic_fixture());
    for (const ChannelScales& s : codec.scales())
        for (int i = 0; i < 50; ++i) {
            const double raw = rng.uniform(0.0, 10.0);
            CHECK(s.denorm(s.norm(raw)) == doctest::Approx(raw).epsilon(1e-12));
        }
}

// Round-trip oracle: encode then decode recovers the exact placement list.
TEST_CASE("encode-decode round trip on random planograms") {
    Rng rng(6);
    Catalog cat = oracle::small_catalog(rng, 30);
    oracle::RandomPlanogramOptions opt;
    opt.avoid_same_sku_adjacency = true;
    int total_placements = 0;
    for (int trial = 0; trial < 60; ++trial) {
        // repair placements so every one physically fits (fit-violating
        // layouts decode to saturated facings by design)
        Planogram p = oracle::random_planogram(cat, rng, opt);
        const GridCodec codec(cat, p.fixture);
        std::vector<Placement> kept;
        for (Placement pl : p.placements) {
            const Product& prod = cat.require(pl.sku);
            if (pl.span_columns < codec.min_span(prod)) continue;
            const int max_facings = static_cast<int>(pl.span_columns * p.fixture.column_width() /
                                                     prod.width_cm);
            pl.facings = std::max(1, std::min(pl.facings, max_facings));
            kept.push_back(pl);
        }
        p.placements = std::move(kept);
        const PlanogramTensor t = codec.encode(p);
        const Planogram back = codec.decode(t.grid);
        CHECK(same_layout(p, back));
        total_placements += static_cast<int>(p.placements.size());
    }
    CHECK(total_placements > 100);
}

TEST_CASE("idempotence: encode of decode equals the original encoding") {
    CorpusConfig cfg;
    cfg.store_count = 6;
    cfg.planograms_per_store = 3;
    cfg.rng_seed = 77;
    const Corpus corpus = generate_corpus(cfg);
    for (const CorpusEntry& e : corpus.entries) {
        GridCodec codec(corpus.catalog, e.planogram.fixture);
        const PlanogramTensor t1 = codec.encode(e.planogram);
        const Planogram round = codec.decode(t1.grid);
        const PlanogramTensor t2 = codec.encode(round);
        REQUIRE(t1.grid.shape == t2.grid.shape);
        for (std::size_t i = 0; i < t1.grid.size(); ++i) CHECK(t1.grid.data[i] == t2.grid.data[i]);
    }
}

TEST_CASE("encoded grids of valid planograms stay inside the model range") {
    CorpusConfig cfg;
    cfg.store_count = 5;
    cfg.planograms_per_store = 2;
    cfg.rng_seed = 31;
    const Corpus corpus = generate_corpus(cfg);
    for (const CorpusEntry& e : corpus.entries) {
        const GridCodec codec(corpus.catalog, e.planogram.fixture);
        const PlanogramTensor t = codec.encode(e.planogram);
        for (double v : t.grid.data) {
            CHECK(v >= -1.05);
            CHECK(v <= 1.05);
        }
    }
}

TEST_CASE("decode is total on arbitrary grids") {
    Rng rng(8);
    Catalog cat = oracle::small_catalog(rng);
    Fixture f = basic_fixture();
    GridCodec codec(cat, f);

    SUBCASE("all empty codes") {
        const Planogram p = codec.decode(Tensor::full({5, 4, 16}, kEmptyCode));
        CHECK(p.placements.empty());
    }
    SUBCASE("pure gaussian noise decodes to a structurally valid planogram") {
        for (int trial = 0; trial < 25; ++trial) {
            const Planogram p = codec.decode(Tensor::randn({5, 4, 16}, rng));
            CHECK(structural_violations(p, &cat).empty());
        }
    }
    SUBCASE("saturated values decode without error") {
        CHECK_NOTHROW(codec.decode(Tensor::full({5, 4, 16}, 9e9)));
        CHECK_NOTHROW(codec.decode(Tensor::full({5, 4, 16}, -9e9)));
    }
    SUBCASE("wrong shape is rejected") {
        CHECK_THROWS_AS(codec.decode(Tensor::zeros({5, 3, 16})), ShapeError);
    }
}

TEST_CASE("decoded facings follow the dim channel") {
    Rng rng(9);
    Catalog cat = oracle::small_catalog(rng);
    // pick a narrow product so several facings fit in a few columns
    std::size_t narrow = 0;
    for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat.at(i).width_cm < cat.at(narrow).width_cm) narrow = i;
    Fixture f = basic_fixture();
    GridCodec codec(cat, f);
    Planogram p;
    p.store_id = "s";
    p.fixture = f;
    const int span = 4;
    const int facings =
        static_cast<int>(span * f.column_width() / cat.at(narrow).width_cm);  // max that fits
    REQUIRE(facings >= 2);
    p.placements = {{cat.at(narrow).sku, 2, 3, span, facings}};
    const Planogram back = codec.decode(codec.encode(p).grid);
    REQUIRE(back.placements.size() == 1);
    CHECK(back.placements[0].facings == facings);
}
