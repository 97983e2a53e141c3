#pragma once

#include <json.hpp>
#include <string>

#include "planoforge/domain.hpp"

namespace planoforge {

using json = nlohmann::json;

// Catalog CSV, header:
//   sku,width_cm,height_cm,depth_cm,weight_kg,category,brand,price,margin,age_restricted
Catalog load_catalog(const std::string& path);
Catalog parse_catalog_csv(const std::string& text, const std::string& origin = "<string>");
void save_catalog(const Catalog& c, const std::string& path);
std::string catalog_to_csv(const Catalog& c);

// JSON documents mirror the domain types field for field; unknown fields are
// rejected.
json fixture_to_json(const Fixture& f);
Fixture fixture_from_json(const json& j);
json planogram_to_json(const Planogram& p);
Planogram planogram_from_json(const json& j);

void save_planogram(const Planogram& p, const std::string& path);
Planogram load_planogram(const std::string& path);
void save_fixture(const Fixture& f, const std::string& path);
Fixture load_fixture(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace planoforge
