#pragma once

#include <json.hpp>
#include <memory>
#include <mutex>
#include <string>

#include "planoforge/checkpoint.hpp"
#include "planoforge/constraints.hpp"
#include "planoforge/denoiser.hpp"
#include "planoforge/diffusion.hpp"
#include "planoforge/domain.hpp"

namespace planoforge {

// HTTP-level failure carrying the status code and a JSON body.
struct ApiError {
    int status;
    nlohmann::json body;
};

// Immutable model snapshot; requests hold a shared_ptr for their whole
// lifetime, so a concurrent swap or rollback never affects an in-flight
// request.
struct ModelSnapshot {
    DenoiserModel model;
    NoiseSchedule schedule;
    std::string version;
};

// Two-slot registry: active plus previous for instant rollback.
class ModelRegistry {
  public:
    void load(DenoiserModel model, NoiseSchedule schedule, const std::string& label);
    bool rollback();  // false when no previous snapshot exists
    std::shared_ptr<const ModelSnapshot> active() const;
    std::shared_ptr<const ModelSnapshot> previous() const;

  private:
    mutable std::mutex mu_;
    std::shared_ptr<const ModelSnapshot> active_, previous_;
    int load_counter_ = 0;
};

// Request handlers behind the REST endpoints; also usable directly, which is
// how the equivalence tests compare service responses against library calls.
class PlanogramService {
  public:
    PlanogramService(Catalog catalog, ConstraintSet constraints);

    ModelRegistry& models() { return models_; }
    const Catalog& catalog() const { return catalog_; }
    const ConstraintSet& constraints() const { return constraints_; }

    // Optional shared secret: when set, requests must carry it in the
    // X-Api-Key header; empty (the default) disables the check.
    void set_shared_secret(std::string secret) { shared_secret_ = std::move(secret); }
    const std::string& shared_secret() const { return shared_secret_; }

    // {fixture, count, seed} -> {model_version, planograms:[{planogram,report}]}
    nlohmann::json generate(const nlohmann::json& body) const;
    // {planogram, constraints?} -> validation report
    nlohmann::json validate_planogram(const nlohmann::json& body) const;
    nlohmann::json rollback();
    nlohmann::json health() const;
    std::string metrics_text() const;

    void record(const std::string& endpoint, int status, double ms);

  private:
    Catalog catalog_;
    ConstraintSet constraints_;
    std::string shared_secret_;
    ModelRegistry models_;

    mutable std::mutex metrics_mu_;
    std::map<std::string, std::uint64_t> counters_;
    std::vector<double> latencies_ms_;
};

// Blocking HTTP server on /v1 (pimpl keeps the HTTP library out of this
// header). start() returns once the socket is listening.
class HttpServer {
  public:
    // port 0 binds any free port; port() reports the bound one.
    HttpServer(PlanogramService& service, std::string host, int port);
    ~HttpServer();
    bool start();
    void stop();
    int port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace planoforge
