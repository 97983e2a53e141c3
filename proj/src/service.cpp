#include "planoforge/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include "planoforge/domain_io.hpp"
#include "planoforge/sampler.hpp"

namespace planoforge {

void ModelRegistry::load(DenoiserModel model, NoiseSchedule schedule, const std::string& label) {
    auto snap = std::make_shared<ModelSnapshot>();
    snap->model = std::move(model);
    snap->schedule = std::move(schedule);
    std::lock_guard lock(mu_);
    ++load_counter_;
    snap->version = "v" + std::to_string(load_counter_) + (label.empty() ? "" : ":" + label);
    previous_ = active_;
    active_ = std::move(snap);
}

bool ModelRegistry::rollback() {
    std::lock_guard lock(mu_);
    if (!previous_) return false;
    std::swap(active_, previous_);
    return true;
}

std::shared_ptr<const ModelSnapshot> ModelRegistry::active() const {
    std::lock_guard lock(mu_);
    return active_;
}

std::shared_ptr<const ModelSnapshot> ModelRegistry::previous() const {
    std::lock_guard lock(mu_);
    return previous_;
}

PlanogramService::PlanogramService(Catalog catalog, ConstraintSet constraints)
    : catalog_(std::move(catalog)), constraints_(std::move(constraints)) {}

nlohmann::json PlanogramService::generate(const nlohmann::json& body) const {
    const auto snapshot = models_.active();
    if (!snapshot) throw ApiError{503, {{"error", "no model loaded"}}};
    if (!body.is_object() || !body.contains("fixture") || !body.contains("count"))
        throw ApiError{400, {{"error", "body must carry fixture and count"}}};

    Fixture fixture;
    try {
        fixture = fixture_from_json(body.at("fixture"));
    } catch (const Error& e) {
        throw ApiError{400, {{"error", e.what()}}};
    }
    int count = 0;
    std::uint64_t seed = 0;
    try {
        count = body.at("count").get<int>();
        seed = body.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ApiError{400, {{"error", e.what()}}};
    }
    if (count < 0) throw ApiError{400, {{"error", "count must be >= 0"}}};

    const auto planograms = sample_planograms(snapshot->model, snapshot->schedule, fixture,
                                              catalog_, seed, count);
    nlohmann::json out = nlohmann::json::array();
    for (const Planogram& p : planograms) {
        const ValidationReport report = validate(p, constraints_, catalog_);
        out.push_back({{"planogram", planogram_to_json(p)},
                       {"report", validation_report_to_json(report)}});
    }
    return {{"model_version", snapshot->version}, {"planograms", out}};
}

nlohmann::json PlanogramService::validate_planogram(const nlohmann::json& body) const {
    if (!body.is_object() || !body.contains("planogram"))
        throw ApiError{400, {{"error", "body must carry a planogram"}}};
    Planogram p;
    try {
        p = planogram_from_json(body.at("planogram"));
    } catch (const InvariantError& e) {
        nlohmann::json violations = nlohmann::json::array();
        // reparse leniently to list every structural violation
        try {
            const nlohmann::json& jp = body.at("planogram");
            Planogram raw;
            raw.store_id = jp.value("store_id", "");
            raw.fixture = fixture_from_json(jp.at("fixture"));
            for (const auto& jpl : jp.value("placements", nlohmann::json::array()))
                raw.placements.push_back({jpl.value("sku", ""), jpl.value("shelf_index", 0),
                                          jpl.value("start_column", 0), jpl.value("span_columns", 1),
                                          jpl.value("facings", 1)});
            for (const StructuralViolation& v : structural_violations(raw, &catalog_))
                violations.push_back({{"shelf_index", v.shelf_index},
                                      {"start_column", v.start_column},
                                      {"span_columns", v.span_columns},
                                      {"message", v.message}});
        } catch (...) {
        }
        throw ApiError{422, {{"error", e.what()}, {"violations", violations}}};
    } catch (const Error& e) {
        throw ApiError{400, {{"error", e.what()}}};
    }

    ConstraintSet set = constraints_;
    if (body.contains("constraints")) {
        try {
            set = constraints_from_json(body.at("constraints"));
        } catch (const std::exception& e) {
            throw ApiError{400, {{"error", e.what()}}};
        }
    }
    try {
        return validation_report_to_json(validate(p, set, catalog_));
    } catch (const Error& e) {
        throw ApiError{422, {{"error", e.what()}}};
    }
}

nlohmann::json PlanogramService::rollback() {
    if (!models_.rollback()) throw ApiError{409, {{"error", "no previous model version"}}};
    return {{"active_version", models_.active()->version}};
}

nlohmann::json PlanogramService::health() const {
    const auto active = models_.active();
    const auto previous = models_.previous();
    return {{"status", "ok"},
            {"active_version", active ? nlohmann::json(active->version) : nlohmann::json()},
            {"previous_version", previous ? nlohmann::json(previous->version) : nlohmann::json()}};
}

void PlanogramService::record(const std::string& endpoint, int status, double ms) {
    std::lock_guard lock(metrics_mu_);
    ++counters_["requests_total"];
    ++counters_["requests_" + endpoint];
    if (status >= 400) ++counters_["errors_total"];
    latencies_ms_.push_back(ms);
    if (latencies_ms_.size() > 4096) latencies_ms_.erase(latencies_ms_.begin());
}

std::string PlanogramService::metrics_text() const {
    std::lock_guard lock(metrics_mu_);
    std::string out;
    for (const auto& [key, value] : counters_) out += key + " " + std::to_string(value) + "\n";
    if (!latencies_ms_.empty()) {
        std::vector<double> sorted = latencies_ms_;
        std::sort(sorted.begin(), sorted.end());
        const auto pick = [&](double q) {
            return sorted[std::min(sorted.size() - 1,
                                   static_cast<std::size_t>(q * static_cast<double>(sorted.size())))];
        };
        out += "latency_ms_p50 " + std::to_string(pick(0.50)) + "\n";
        out += "latency_ms_p95 " + std::to_string(pick(0.95)) + "\n";
        out += "latency_ms_p99 " + std::to_string(pick(0.99)) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP layer
// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    PlanogramService& service;
    httplib::Server server;
    std::string host;
    int port;
    std::thread worker;

    Impl(PlanogramService& s, std::string h, int p) : service(s), host(std::move(h)), port(p) {}

    void route_json(const std::string& endpoint,
                    const std::function<nlohmann::json(const nlohmann::json&)>& handler,
                    const httplib::Request& req, httplib::Response& res) {
        const auto begin = std::chrono::steady_clock::now();
        int status = 200;
        try {
            if (!service.shared_secret().empty() &&
                req.get_header_value("X-Api-Key") != service.shared_secret())
                throw ApiError{401, {{"error", "missing or wrong X-Api-Key"}}};
            nlohmann::json body;
            if (!req.body.empty()) {
                try {
                    body = nlohmann::json::parse(req.body);
                } catch (const nlohmann::json::exception& e) {
                    throw ApiError{400, {{"error", std::string("malformed JSON: ") + e.what()}}};
                }
            }
            res.set_content(handler(body).dump(), "application/json");
        } catch (const ApiError& e) {
            status = e.status;
            res.status = e.status;
            res.set_content(e.body.dump(), "application/json");
        } catch (const std::exception& e) {
            status = 500;
            res.status = 500;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begin)
                .count();
        service.record(endpoint, status, ms);
    }

    void wire() {
        server.Post("/v1/planograms/generate",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        route_json("generate",
                                   [this](const nlohmann::json& b) { return service.generate(b); },
                                   req, res);
                    });
        server.Post("/v1/planograms/validate",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        route_json("validate",
                                   [this](const nlohmann::json& b) {
                                       return service.validate_planogram(b);
                                   },
                                   req, res);
                    });
        server.Post("/v1/admin/rollback",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        route_json("rollback",
                                   [this](const nlohmann::json&) { return service.rollback(); }, req,
                                   res);
                    });
        server.Get("/v1/health", [this](const httplib::Request& req, httplib::Response& res) {
            route_json("health", [this](const nlohmann::json&) { return service.health(); }, req,
                       res);
        });
        server.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(service.metrics_text(), "text/plain");
            service.record("metrics", 200, 0.0);
        });
    }
};

HttpServer::HttpServer(PlanogramService& service, std::string host, int port)
    : impl_(std::make_unique<Impl>(service, std::move(host), port)) {
    impl_->wire();
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::start() {
    if (impl_->port == 0) {
        impl_->port = impl_->server.bind_to_any_port(impl_->host);
        if (impl_->port <= 0) return false;
    } else if (!impl_->server.bind_to_port(impl_->host, impl_->port)) {
        return false;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

int HttpServer::port() const { return impl_->port; }

void HttpServer::stop() {
    if (impl_->worker.joinable()) {
        impl_->server.stop();
        impl_->worker.join();
    }
}

}  // namespace planoforge
