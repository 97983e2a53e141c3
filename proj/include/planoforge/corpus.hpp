#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "planoforge/constraints.hpp"
#include "planoforge/domain.hpp"
#include "planoforge/rng.hpp"

namespace planoforge {

struct FixtureRanges {
    int shelf_min = 3, shelf_max = 5;
    int slot_columns = 16;
    double width_min = 80.0, width_max = 120.0;
    double height_min = 150.0, height_max = 200.0;
};

struct CorpusConfig {
    int store_count = 50;
    int planograms_per_store = 10;
    int catalog_size = 120;
    FixtureRanges fixtures;
    std::uint64_t rng_seed = 1234;
    double store_style_variance = 0.5;  // 0 = identical stores, 1 = strongly skewed

    void check() const;
};

struct CorpusEntry {
    Planogram planogram;
    std::string store_id;
};

struct Corpus {
    Catalog catalog;
    ConstraintSet constraints;
    std::vector<CorpusEntry> entries;
    CorpusConfig config;
};

// Synthetic product catalog over eight fixed categories (two of them
// age-restricted) and a shared brand pool.
Catalog synthesize_catalog(int size, Rng rng);

// One constraint of each kind with default parameters; brand contracts cover
// the two reserved contract brands.
ConstraintSet default_constraint_set();

// Constructive generation: shelves fill left to right in category blocks,
// age-restricted products only on permitted shelves, contracted brands only
// as single blocks inside their shelf band, loads kept inside a per-shelf
// budget. Every emitted planogram passes hard validation; throws
// InvariantError("infeasible config...") when the catalog cannot fill the
// fixtures under the constraints. Deterministic given the seed, with one
// derived stream per store.
Corpus generate_corpus(const CorpusConfig& config, const ConstraintSet* constraints = nullptr);

// Random product substitution within a category (same span, same facings,
// inside the weight budget) or whole-shelf rotation between compatible
// shelves. Output always passes hard validation; when no legal move exists
// the planogram is returned unchanged.
Planogram augment(const Planogram& p, const Catalog& catalog, const ConstraintSet& set, Rng& rng);

// Directory layout: catalog.csv, planograms.jsonl, constraints.json,
// manifest.json (config + seed).
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

}  // namespace planoforge
