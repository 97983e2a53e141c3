#include "planoforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "planoforge/domain_io.hpp"

namespace planoforge {

namespace {

const std::vector<std::string> kCategories = {"bakery",    "beverages", "dairy",
                                              "household", "personal-care", "snacks",
                                              "spirits",   "tobacco"};
const std::vector<std::string> kAgeRestrictedCategories = {"spirits", "tobacco"};
const std::vector<std::string> kBrandPool = {"crest", "dune", "echo", "flint", "gala", "halo"};

// Contract brands live in a single category each so brand blocks are also
// category blocks.
constexpr const char* kContractBrandA = "acme";      // beverages, shelves 1..2
constexpr const char* kContractBrandB = "bolt";      // snacks, shelves 0..1

bool is_age_restricted_category(const std::string& cat) {
    return std::find(kAgeRestrictedCategories.begin(), kAgeRestrictedCategories.end(), cat) !=
           kAgeRestrictedCategories.end();
}

bool is_contract_brand(const std::string& brand) {
    return brand == kContractBrandA || brand == kContractBrandB;
}

}  // namespace

void CorpusConfig::check() const {
    if (store_count < 1 || planograms_per_store < 1 || catalog_size < 1)
        throw ValueError("corpus config: counts must be >= 1");
    if (store_style_variance < 0.0 || store_style_variance > 1.0)
        throw ValueError("corpus config: store_style_variance must lie in [0,1]");
    if (fixtures.shelf_min < 1 || fixtures.shelf_max < fixtures.shelf_min ||
        fixtures.slot_columns < 1)
        throw ValueError("corpus config: bad fixture ranges");
    if (!(fixtures.width_min > 0.0) || fixtures.width_max < fixtures.width_min ||
        !(fixtures.height_min > 0.0) || fixtures.height_max < fixtures.height_min)
        throw ValueError("corpus config: bad fixture dimension ranges");
}

Catalog synthesize_catalog(int size, Rng rng) {
    std::vector<Product> products;
    products.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        Product p;
        p.category = kCategories[static_cast<std::size_t>(i) % kCategories.size()];
        char buf[16];
        std::snprintf(buf, sizeof buf, "%03d", i);
        p.sku = p.category + "-" + buf;
        p.width_cm = rng.uniform(6.0, 26.0);
        p.height_cm = rng.uniform() < 0.1 ? rng.uniform(26.0, 36.0) : rng.uniform(8.0, 24.0);
        p.depth_cm = rng.uniform(5.0, 25.0);
        p.weight_kg = rng.uniform(0.2, 3.2);
        p.price = rng.uniform(1.0, 20.0);
        p.margin = rng.uniform() < 0.05 ? rng.uniform(-1.0, 0.0) : rng.uniform(0.15, 5.0);
        p.age_restricted = is_age_restricted_category(p.category);
        if (p.category == "beverages" && rng.uniform() < 0.4)
            p.brand = kContractBrandA;
        else if (p.category == "snacks" && rng.uniform() < 0.4)
            p.brand = kContractBrandB;
        else
            p.brand = kBrandPool[rng.uniform_u64(kBrandPool.size())];
        products.push_back(std::move(p));
    }
    return Catalog::from_products(std::move(products));
}

ConstraintSet default_constraint_set() {
    ConstraintSet set(5);
    set[0].kind = ConstraintKind::PhysicalFit;
    set[1].kind = ConstraintKind::WeightLimit;
    set[2].kind = ConstraintKind::CategoryGrouping;
    set[2].category_threshold = 0.8;
    set[3].kind = ConstraintKind::RegulatoryAge;
    set[3].min_shelf_index = 2;
    set[4].kind = ConstraintKind::BrandPlacement;
    set[4].contracts = {{kContractBrandA, 1, 2}, {kContractBrandB, 0, 1}};
    return set;
}

namespace {

Fixture synthesize_fixture(const FixtureRanges& r, Rng& rng) {
    Fixture f;
    f.shelf_count = rng.uniform_int(r.shelf_min, r.shelf_max);
    f.slot_columns = r.slot_columns;
    f.width_cm = rng.uniform(r.width_min, r.width_max);
    f.height_cm = rng.uniform(r.height_min, r.height_max);
    const double per = f.height_cm / f.shelf_count;
    for (int s = 0; s < f.shelf_count; ++s)
        f.per_shelf.push_back({per * rng.uniform(0.82, 0.94), rng.uniform(16.0, 34.0)});
    return f;
}

struct GenParams {
    int min_age_shelf = 2;
    double category_threshold = 0.8;
    std::vector<BrandContract> contracts;
};

GenParams gen_params(const ConstraintSet& set) {
    GenParams g;
    for (const Constraint& c : set) {
        if (c.kind == ConstraintKind::RegulatoryAge) g.min_age_shelf = c.min_shelf_index;
        if (c.kind == ConstraintKind::CategoryGrouping) g.category_threshold = c.category_threshold;
        if (c.kind == ConstraintKind::BrandPlacement)
            g.contracts.insert(g.contracts.end(), c.contracts.begin(), c.contracts.end());
    }
    return g;
}

// One attempt at a shelf-filling pass; the caller validates and retries.
std::optional<Planogram> try_generate(const Catalog& catalog, const Fixture& fixture,
                                      const ConstraintSet& set, const GenParams& gp,
                                      const std::vector<double>& category_weight,
                                      const std::string& store_id, Rng& rng) {
    Planogram p;
    p.store_id = store_id;
    p.fixture = fixture;
    const double cw = fixture.column_width();
    const int k = fixture.slot_columns;

    std::vector<int> pending_contracts;
    for (std::size_t i = 0; i < gp.contracts.size(); ++i)
        if (rng.uniform() < 0.6) pending_contracts.push_back(static_cast<int>(i));

    auto pick_category = [&](bool allow_age) {
        double total = 0.0;
        for (std::size_t c = 0; c < kCategories.size(); ++c) {
            if (!allow_age && is_age_restricted_category(kCategories[c])) continue;
            total += category_weight[c];
        }
        double ticket = rng.uniform() * total;
        for (std::size_t c = 0; c < kCategories.size(); ++c) {
            if (!allow_age && is_age_restricted_category(kCategories[c])) continue;
            ticket -= category_weight[c];
            if (ticket <= 0.0) return kCategories[c];
        }
        return kCategories.back();
    };

    for (int shelf = 0; shelf < fixture.shelf_count; ++shelf) {
        const ShelfSpec& spec = fixture.per_shelf[static_cast<std::size_t>(shelf)];
        const double budget = spec.weight_capacity_kg * rng.uniform(0.70, 0.95);
        double load = 0.0;
        std::string last_sku;
        int col = 0;
        while (col < k) {
            const int remaining = k - col;
            if (remaining < 2) break;
            int block_cols = std::min(remaining, rng.uniform_int(4, 8));

            // brand or plain category block
            std::string want_category;
            std::string want_brand;
            bool contract_block = false;
            for (std::size_t i = 0; i < pending_contracts.size(); ++i) {
                const BrandContract& bc = gp.contracts[static_cast<std::size_t>(pending_contracts[i])];
                if (shelf >= bc.shelf_lo && shelf <= bc.shelf_hi) {
                    want_brand = bc.brand;
                    contract_block = true;
                    pending_contracts.erase(pending_contracts.begin() + static_cast<long>(i));
                    break;
                }
            }
            if (!contract_block) want_category = pick_category(shelf >= gp.min_age_shelf);

            int filled = 0;
            while (filled < block_cols) {
                const int room = block_cols - filled;
                // candidates in catalog order for determinism
                std::vector<std::size_t> cands;
                for (std::size_t pi = 0; pi < catalog.size(); ++pi) {
                    const Product& prod = catalog.at(pi);
                    if (contract_block) {
                        if (prod.brand != want_brand) continue;
                    } else {
                        if (prod.category != want_category) continue;
                        if (is_contract_brand(prod.brand)) continue;
                    }
                    if (prod.age_restricted && shelf < gp.min_age_shelf) continue;
                    if (prod.height_cm > spec.clearance_height_cm) continue;
                    if (prod.sku == last_sku) continue;
                    const int span1 = static_cast<int>(std::ceil(prod.width_cm / cw - 1e-9));
                    if (span1 > room) continue;
                    if (load + prod.weight_kg > budget) continue;
                    cands.push_back(pi);
                }
                if (cands.empty()) break;
                const Product& prod = catalog.at(cands[rng.uniform_u64(cands.size())]);
                int f_max = 3;
                while (f_max > 1 &&
                       (std::ceil(f_max * prod.width_cm / cw - 1e-9) > room ||
                        load + f_max * prod.weight_kg > budget))
                    --f_max;
                const int facings = rng.uniform_int(1, f_max);
                const int span = static_cast<int>(std::ceil(facings * prod.width_cm / cw - 1e-9));
                p.placements.push_back({prod.sku, shelf, col + filled, span, facings});
                load += facings * prod.weight_kg;
                last_sku = prod.sku;
                filled += span;
            }
            if (filled == 0) {
                ++col;  // nothing fit here, leave a gap and move on
                last_sku.clear();
                continue;
            }
            col += filled;
            if (rng.uniform() < 0.15 && col < k) {
                ++col;  // occasional gap between blocks
                last_sku.clear();
            }
        }
    }

    // reject sparse fills; real planograms keep shelves close to full
    int occupied = 0;
    for (const Placement& pl : p.placements) occupied += pl.span_columns;
    if (occupied < static_cast<int>(0.78 * fixture.shelf_count * k)) return std::nullopt;

    const ValidationReport report = validate(p, set, catalog);
    for (const ConstraintResult& r : report.per_constraint)
        if (!r.satisfied) return std::nullopt;
    return p;
}

std::vector<double> store_category_weights(double variance, Rng& rng) {
    std::vector<double> w(kCategories.size());
    for (double& v : w) v = std::exp(2.0 * variance * rng.gaussian());
    return w;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& config, const ConstraintSet* constraints) {
    config.check();
    Rng master(config.rng_seed);
    Corpus corpus;
    corpus.config = config;
    corpus.catalog = synthesize_catalog(config.catalog_size, master.fork(0xCA7A106));
    corpus.constraints = constraints ? *constraints : default_constraint_set();

    for (int store = 0; store < config.store_count; ++store) {
        Rng store_rng = master.fork(1000 + static_cast<std::uint64_t>(store));
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d", store);
        const std::string store_id = std::string("store-") + buf;
        const Fixture fixture = synthesize_fixture(config.fixtures, store_rng);
        const std::vector<double> weights =
            store_category_weights(config.store_style_variance, store_rng);
        for (int i = 0; i < config.planograms_per_store; ++i) {
            Rng plan_rng = store_rng.fork(static_cast<std::uint64_t>(i));
            std::optional<Planogram> made;
            for (int attempt = 0; attempt < 50 && !made; ++attempt) {
                Rng attempt_rng = plan_rng.fork(static_cast<std::uint64_t>(attempt));
                made = try_generate(corpus.catalog, fixture, corpus.constraints,
                                    gen_params(corpus.constraints), weights, store_id, attempt_rng);
            }
            if (!made)
                throw InvariantError(
                    "infeasible config: catalog cannot fill fixtures under the constraints (store " +
                    store_id + ")");
            corpus.entries.push_back({std::move(*made), store_id});
        }
    }
    return corpus;
}

namespace {

double shelf_load(const Planogram& p, const Catalog& catalog, int shelf) {
    double load = 0.0;
    for (const Placement& pl : p.placements)
        if (pl.shelf_index == shelf) load += pl.facings * catalog.require(pl.sku).weight_kg;
    return load;
}

bool all_satisfied(const Planogram& p, const ConstraintSet& set, const Catalog& catalog) {
    for (const Constraint& c : set)
        if (constraint_margin(c, p, catalog) < 0.0) return false;
    return true;
}

Planogram substitute(const Planogram& p, const Catalog& catalog, const ConstraintSet& set,
                     Rng& rng) {
    if (p.placements.empty()) return p;
    const std::size_t idx = rng.uniform_u64(p.placements.size());
    const Placement& pl = p.placements[idx];
    const Product& old = catalog.require(pl.sku);
    const Fixture& f = p.fixture;
    const double cw = f.column_width();
    const ShelfSpec& spec = f.per_shelf[static_cast<std::size_t>(pl.shelf_index)];
    const double load = shelf_load(p, catalog, pl.shelf_index);

    // skus of runs touching this placement
    std::vector<std::string> neighbor_skus;
    for (const Placement& other : p.placements) {
        if (other.shelf_index != pl.shelf_index) continue;
        if (other.start_column + other.span_columns == pl.start_column ||
            pl.start_column + pl.span_columns == other.start_column)
            neighbor_skus.push_back(other.sku);
    }

    std::vector<std::size_t> cands;
    for (std::size_t pi = 0; pi < catalog.size(); ++pi) {
        const Product& cand = catalog.at(pi);
        if (cand.sku == old.sku || cand.category != old.category) continue;
        if (is_contract_brand(cand.brand)) continue;
        if (cand.height_cm > spec.clearance_height_cm) continue;
        if (pl.facings * cand.width_cm > pl.span_columns * cw + 1e-9) continue;
        if (load - pl.facings * old.weight_kg + pl.facings * cand.weight_kg >
            spec.weight_capacity_kg)
            continue;
        if (std::find(neighbor_skus.begin(), neighbor_skus.end(), cand.sku) != neighbor_skus.end())
            continue;
        cands.push_back(pi);
    }
    if (cands.empty()) return p;

    Planogram out = p;
    out.placements[idx].sku = catalog.at(cands[rng.uniform_u64(cands.size())]).sku;
    if (!all_satisfied(out, set, catalog)) return p;
    return out;
}

Planogram rotate_shelves(const Planogram& p, const Catalog& catalog, const ConstraintSet& set,
                         Rng& rng) {
    const int s = p.fixture.shelf_count;
    if (s < 2) return p;
    const int i = rng.uniform_int(0, s - 1);
    int j = rng.uniform_int(0, s - 2);
    if (j >= i) ++j;

    Planogram out = p;
    for (Placement& pl : out.placements) {
        if (pl.shelf_index == i)
            pl.shelf_index = j;
        else if (pl.shelf_index == j)
            pl.shelf_index = i;
    }
    if (!all_satisfied(out, set, catalog)) return p;
    return out;
}

}  // namespace

Planogram augment(const Planogram& p, const Catalog& catalog, const ConstraintSet& set, Rng& rng) {
    if (rng.uniform() < 0.5) return substitute(p, catalog, set, rng);
    return rotate_shelves(p, catalog, set, rng);
}

namespace {

json config_to_json(const CorpusConfig& c) {
    return {{"store_count", c.store_count},
            {"planograms_per_store", c.planograms_per_store},
            {"catalog_size", c.catalog_size},
            {"rng_seed", c.rng_seed},
            {"store_style_variance", c.store_style_variance},
            {"fixtures",
             {{"shelf_min", c.fixtures.shelf_min},
              {"shelf_max", c.fixtures.shelf_max},
              {"slot_columns", c.fixtures.slot_columns},
              {"width_min", c.fixtures.width_min},
              {"width_max", c.fixtures.width_max},
              {"height_min", c.fixtures.height_min},
              {"height_max", c.fixtures.height_max}}}};
}

CorpusConfig config_from_json(const json& j) {
    CorpusConfig c;
    c.store_count = j.at("store_count").get<int>();
    c.planograms_per_store = j.at("planograms_per_store").get<int>();
    c.catalog_size = j.at("catalog_size").get<int>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.store_style_variance = j.at("store_style_variance").get<double>();
    const json& f = j.at("fixtures");
    c.fixtures.shelf_min = f.at("shelf_min").get<int>();
    c.fixtures.shelf_max = f.at("shelf_max").get<int>();
    c.fixtures.slot_columns = f.at("slot_columns").get<int>();
    c.fixtures.width_min = f.at("width_min").get<double>();
    c.fixtures.width_max = f.at("width_max").get<double>();
    c.fixtures.height_min = f.at("height_min").get<double>();
    c.fixtures.height_max = f.at("height_max").get<double>();
    return c;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_catalog(corpus.catalog, dir + "/catalog.csv");
    write_file(dir + "/constraints.json", constraints_to_json(corpus.constraints).dump(2) + "\n");
    write_file(dir + "/manifest.json", config_to_json(corpus.config).dump(2) + "\n");
    std::ostringstream lines;
    for (const CorpusEntry& e : corpus.entries) lines << planogram_to_json(e.planogram).dump() << "\n";
    write_file(dir + "/planograms.jsonl", lines.str());
}

Corpus load_corpus(const std::string& dir) {
    Corpus corpus;
    corpus.catalog = load_catalog(dir + "/catalog.csv");
    corpus.constraints = constraints_from_json(json::parse(read_file(dir + "/constraints.json")));
    corpus.config = config_from_json(json::parse(read_file(dir + "/manifest.json")));
    std::istringstream in(read_file(dir + "/planograms.jsonl"));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            Planogram p = planogram_from_json(json::parse(line));
            std::string sid = p.store_id;
            corpus.entries.push_back({std::move(p), std::move(sid)});
        } catch (const json::exception& e) {
            throw IoError(dir + "/planograms.jsonl: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace planoforge
