#include "planoforge/domain_io.hpp"

#include <fstream>
#include <sstream>

namespace planoforge {

namespace {

constexpr const char* kCatalogHeader =
    "sku,width_cm,height_cm,depth_cm,weight_kg,category,brand,price,margin,age_restricted";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw IoError(where + ": not a number: '" + s + "'");
    }
}

bool parse_bool(const std::string& s, const std::string& where) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw IoError(where + ": not a boolean: '" + s + "'");
}

void reject_unknown_fields(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& what) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw IoError(what + ": unknown field '" + key + "'");
    }
    for (const char* a : allowed)
        if (!j.contains(a)) throw IoError(what + ": missing field '" + std::string(a) + "'");
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& what) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw IoError(what + ": bad field '" + key + "': " + e.what());
    }
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << contents;
}

Catalog parse_catalog_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(origin + ": empty catalog file");
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line != kCatalogHeader)
        throw IoError(origin + ": line 1: expected header '" + std::string(kCatalogHeader) + "'");

    std::vector<Product> products;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const std::string where = origin + ": line " + std::to_string(lineno);
        const auto fields = split_csv_line(line);
        if (fields.size() != 10)
            throw IoError(where + ": expected 10 fields, got " + std::to_string(fields.size()));
        Product p;
        p.sku = fields[0];
        p.width_cm = parse_double(fields[1], where + ", width_cm");
        p.height_cm = parse_double(fields[2], where + ", height_cm");
        p.depth_cm = parse_double(fields[3], where + ", depth_cm");
        p.weight_kg = parse_double(fields[4], where + ", weight_kg");
        p.category = fields[5];
        p.brand = fields[6];
        p.price = parse_double(fields[7], where + ", price");
        p.margin = parse_double(fields[8], where + ", margin");
        p.age_restricted = parse_bool(fields[9], where + ", age_restricted");
        products.push_back(std::move(p));
    }
    return Catalog::from_products(std::move(products));
}

Catalog load_catalog(const std::string& path) { return parse_catalog_csv(read_file(path), path); }

namespace {
std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}
}  // namespace

std::string catalog_to_csv(const Catalog& c) {
    std::string out = std::string(kCatalogHeader) + "\n";
    for (const Product& p : c.products()) {
        out += p.sku + "," + fmt(p.width_cm) + "," + fmt(p.height_cm) + "," + fmt(p.depth_cm) + "," +
               fmt(p.weight_kg) + "," + p.category + "," + p.brand + "," + fmt(p.price) + "," +
               fmt(p.margin) + "," + (p.age_restricted ? "true" : "false") + "\n";
    }
    return out;
}

void save_catalog(const Catalog& c, const std::string& path) { write_file(path, catalog_to_csv(c)); }

json fixture_to_json(const Fixture& f) {
    json shelves = json::array();
    for (const ShelfSpec& s : f.per_shelf)
        shelves.push_back({{"clearance_height_cm", s.clearance_height_cm},
                           {"weight_capacity_kg", s.weight_capacity_kg}});
    return {{"width_cm", f.width_cm},
            {"height_cm", f.height_cm},
            {"shelf_count", f.shelf_count},
            {"per_shelf", shelves},
            {"slot_columns", f.slot_columns}};
}

Fixture fixture_from_json(const json& j) {
    if (!j.is_object()) throw IoError("fixture: expected a JSON object");
    reject_unknown_fields(j, {"width_cm", "height_cm", "shelf_count", "per_shelf", "slot_columns"},
                          "fixture");
    Fixture f;
    f.width_cm = get_field<double>(j, "width_cm", "fixture");
    f.height_cm = get_field<double>(j, "height_cm", "fixture");
    f.shelf_count = get_field<int>(j, "shelf_count", "fixture");
    f.slot_columns = get_field<int>(j, "slot_columns", "fixture");
    if (!j.at("per_shelf").is_array()) throw IoError("fixture: per_shelf must be an array");
    for (const json& js : j.at("per_shelf")) {
        reject_unknown_fields(js, {"clearance_height_cm", "weight_capacity_kg"}, "fixture.per_shelf");
        f.per_shelf.push_back({get_field<double>(js, "clearance_height_cm", "fixture.per_shelf"),
                               get_field<double>(js, "weight_capacity_kg", "fixture.per_shelf")});
    }
    f.check();
    return f;
}

json planogram_to_json(const Planogram& p) {
    json placements = json::array();
    for (const Placement& pl : p.placements)
        placements.push_back({{"sku", pl.sku},
                              {"shelf_index", pl.shelf_index},
                              {"start_column", pl.start_column},
                              {"span_columns", pl.span_columns},
                              {"facings", pl.facings}});
    return {{"store_id", p.store_id}, {"fixture", fixture_to_json(p.fixture)},
            {"placements", placements}};
}

Planogram planogram_from_json(const json& j) {
    if (!j.is_object()) throw IoError("planogram: expected a JSON object");
    reject_unknown_fields(j, {"store_id", "fixture", "placements"}, "planogram");
    Planogram p;
    p.store_id = get_field<std::string>(j, "store_id", "planogram");
    p.fixture = fixture_from_json(j.at("fixture"));
    if (!j.at("placements").is_array()) throw IoError("planogram: placements must be an array");
    for (const json& jp : j.at("placements")) {
        reject_unknown_fields(jp, {"sku", "shelf_index", "start_column", "span_columns", "facings"},
                              "placement");
        Placement pl;
        pl.sku = get_field<std::string>(jp, "sku", "placement");
        pl.shelf_index = get_field<int>(jp, "shelf_index", "placement");
        pl.start_column = get_field<int>(jp, "start_column", "placement");
        pl.span_columns = get_field<int>(jp, "span_columns", "placement");
        pl.facings = get_field<int>(jp, "facings", "placement");
        p.placements.push_back(std::move(pl));
    }
    const auto violations = structural_violations(p);
    if (!violations.empty()) {
        std::string msg = "planogram: structural violations:";
        for (const auto& v : violations) msg += "\n  " + v.message;
        throw InvariantError(msg);
    }
    return p;
}

void save_planogram(const Planogram& p, const std::string& path) {
    write_file(path, planogram_to_json(p).dump(2) + "\n");
}

Planogram load_planogram(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return planogram_from_json(j);
}

void save_fixture(const Fixture& f, const std::string& path) {
    write_file(path, fixture_to_json(f).dump(2) + "\n");
}

Fixture load_fixture(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return fixture_from_json(j);
}

}  // namespace planoforge
