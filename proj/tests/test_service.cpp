#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <future>

#include "planoforge/corpus.hpp"
#include "planoforge/domain_io.hpp"
#include "planoforge/service.hpp"

using namespace planoforge;

namespace {

struct TestRig {
    Corpus corpus;
    PlanogramService service;
    HttpServer server;
    std::unique_ptr<httplib::Client> client_ptr;

    static Corpus make_corpus() {
        CorpusConfig cfg;
        cfg.store_count = 4;
        cfg.planograms_per_store = 2;
        cfg.catalog_size = 40;
        cfg.rng_seed = 2025;
        cfg.fixtures.slot_columns = 8;
        return generate_corpus(cfg);
    }

    TestRig()
        : corpus(make_corpus()),
          service(corpus.catalog, corpus.constraints),
          server(service, "127.0.0.1", 0) {
        REQUIRE(server.start());
        client_ptr = std::make_unique<httplib::Client>("127.0.0.1", server.port());
        client_ptr->set_read_timeout(60, 0);
    }

    httplib::Client& client() { return *client_ptr; }

    DenoiserModel tiny_model(std::uint64_t seed) {
        DenoiserConfig arch;
        arch.widths = {4, 6, 8};
        arch.time_embed_dim = 8;
        return DenoiserModel::init(arch, seed);
    }

    void load_model(std::uint64_t seed, const std::string& label, int steps = 8) {
        service.models().load(tiny_model(seed), NoiseSchedule::linear(steps), label);
    }

    nlohmann::json generate_body(int count, std::uint64_t seed) {
        return {{"fixture", fixture_to_json(corpus.entries[0].planogram.fixture)},
                {"count", count},
                {"seed", seed}};
    }
};

}  // namespace

TEST_CASE("health and generate without a model") {
    TestRig rig;
    auto health = rig.client().Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(nlohmann::json::parse(health->body)["active_version"].is_null());

    auto res = rig.client().Post("/v1/planograms/generate", rig.generate_body(1, 7).dump(),
                               "application/json");
    REQUIRE(res);
    CHECK(res->status == 503);
}

TEST_CASE("generate endpoint contract") {
    TestRig rig;
    rig.load_model(1, "m1");

    SUBCASE("count zero returns an empty list") {
        auto res = rig.client().Post("/v1/planograms/generate", rig.generate_body(0, 7).dump(),
                                   "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
        const auto body = nlohmann::json::parse(res->body);
        CHECK(body["planograms"].empty());
        CHECK(body["model_version"].get<std::string>().find("m1") != std::string::npos);
    }
    SUBCASE("malformed json is a 400 with diagnostics") {
        auto res = rig.client().Post("/v1/planograms/generate", "{nope", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
        CHECK(nlohmann::json::parse(res->body)["error"].get<std::string>().find("malformed") !=
              std::string::npos);
        auto res2 = rig.client().Post("/v1/planograms/generate", R"({"count": 1})",
                                    "application/json");
        REQUIRE(res2);
        CHECK(res2->status == 400);
    }
    SUBCASE("fixed seed is byte-identical across calls and model-version stamped") {
        const std::string body = rig.generate_body(3, 424242).dump();
        auto a = rig.client().Post("/v1/planograms/generate", body, "application/json");
        auto b = rig.client().Post("/v1/planograms/generate", body, "application/json");
        REQUIRE(a);
        REQUIRE(b);
        CHECK(a->status == 200);
        CHECK(a->body == b->body);

        const auto parsed = nlohmann::json::parse(a->body);
        REQUIRE(parsed["planograms"].size() == 3);
        for (const auto& item : parsed["planograms"]) {
            const Planogram p = planogram_from_json(item["planogram"]);
            CHECK(structural_violations(p, &rig.corpus.catalog).empty());
            CHECK(item["report"].contains("overall"));
        }
    }
}

TEST_CASE("validate endpoint equals the direct library call on 100 planograms") {
    TestRig rig;
    Rng rng(5);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        const Planogram& base = rig.corpus.entries[i % rig.corpus.entries.size()].planogram;
        const Planogram p = augment(base, rig.corpus.catalog, rig.corpus.constraints, rng);
        const nlohmann::json body = {{"planogram", planogram_to_json(p)}};
        auto res = rig.client().Post("/v1/planograms/validate", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const std::string direct =
            validation_report_to_json(validate(p, rig.corpus.constraints, rig.corpus.catalog))
                .dump();
        CHECK(res->body == direct);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("validate endpoint error paths") {
    TestRig rig;
    SUBCASE("overlap yields 422 naming shelf and columns") {
        Planogram p = rig.corpus.entries[0].planogram;
        Placement clash = p.placements[0];
        p.placements.push_back(clash);  // exact duplicate overlaps
        nlohmann::json jp = planogram_to_json(p);
        auto res = rig.client().Post("/v1/planograms/validate",
                                   nlohmann::json{{"planogram", jp}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 422);
        const auto body = nlohmann::json::parse(res->body);
        CHECK(body["error"].get<std::string>().find("overlap") != std::string::npos);
        REQUIRE(!body["violations"].empty());
        CHECK(body["violations"][0]["shelf_index"] == clash.shelf_index);
    }
    SUBCASE("missing planogram is a 400") {
        auto res = rig.client().Post("/v1/planograms/validate", R"({"x":1})", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    SUBCASE("custom constraint sets are honored") {
        const Planogram& p = rig.corpus.entries[0].planogram;
        ConstraintSet strict = rig.corpus.constraints;
        for (Constraint& c : strict)
            if (c.kind == ConstraintKind::CategoryGrouping) c.category_threshold = 1.01;
        const nlohmann::json body = {{"planogram", planogram_to_json(p)},
                                     {"constraints", constraints_to_json(strict)}};
        auto res = rig.client().Post("/v1/planograms/validate", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        CHECK(nlohmann::json::parse(res->body)["overall"].get<double>() < 1.0);
    }
}

TEST_CASE("rollback state machine") {
    TestRig rig;
    auto res = rig.client().Post("/v1/admin/rollback", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);  // nothing loaded

    rig.load_model(1, "m1");
    res = rig.client().Post("/v1/admin/rollback", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);  // single version, no previous

    rig.load_model(2, "m2");
    auto health = nlohmann::json::parse(rig.client().Get("/v1/health")->body);
    CHECK(health["active_version"].get<std::string>().find("m2") != std::string::npos);

    res = rig.client().Post("/v1/admin/rollback", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    health = nlohmann::json::parse(rig.client().Get("/v1/health")->body);
    CHECK(health["active_version"].get<std::string>().find("m1") != std::string::npos);
    CHECK(health["previous_version"].get<std::string>().find("m2") != std::string::npos);
}

TEST_CASE("in-flight generation finishes on the snapshot it started with") {
    TestRig rig;
    rig.load_model(1, "m1", 40);  // enough steps to stay busy for a moment

    const std::string body = rig.generate_body(24, 9).dump();
    auto slow = std::async(std::launch::async, [&] {
        httplib::Client own("127.0.0.1", rig.server.port());
        own.set_read_timeout(120, 0);
        return own.Post("/v1/planograms/generate", body, "application/json");
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(60));  // let the request begin
    rig.load_model(2, "m2", 8);  // swap while the request runs
    auto res = slow.get();
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(nlohmann::json::parse(res->body)["model_version"].get<std::string>().find("m1") !=
          std::string::npos);

    // the service itself now reports m2
    const auto health = nlohmann::json::parse(rig.client().Get("/v1/health")->body);
    CHECK(health["active_version"].get<std::string>().find("m2") != std::string::npos);
}

TEST_CASE("shared secret gates requests when configured") {
    TestRig rig;
    rig.service.set_shared_secret("hunter2");
    auto res = rig.client().Get("/v1/health");
    REQUIRE(res);
    CHECK(res->status == 401);

    httplib::Headers with_key = {{"X-Api-Key", "hunter2"}};
    res = rig.client().Get("/v1/health", with_key);
    REQUIRE(res);
    CHECK(res->status == 200);
}

TEST_CASE("metrics expose request counters and latency percentiles") {
    TestRig rig;
    rig.load_model(1, "m1");
    rig.client().Post("/v1/planograms/generate", rig.generate_body(1, 1).dump(), "application/json");
    rig.client().Post("/v1/planograms/validate", "{bad", "application/json");
    const auto res = rig.client().Get("/v1/metrics");
    REQUIRE(res);
    CHECK(res->body.find("requests_total") != std::string::npos);
    CHECK(res->body.find("requests_generate 1") != std::string::npos);
    CHECK(res->body.find("errors_total 1") != std::string::npos);
    CHECK(res->body.find("latency_ms_p50") != std::string::npos);
}
