// planoforge: corpus generation, training, sampling, validation, reporting,
// quantization, latency simulation, and the REST service in one binary.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <thread>

#include "planoforge/checkpoint.hpp"
#include "planoforge/corpus.hpp"
#include "planoforge/domain_io.hpp"
#include "planoforge/edgesim.hpp"
#include "planoforge/evaluation.hpp"
#include "planoforge/sampler.hpp"
#include "planoforge/service.hpp"
#include "planoforge/train.hpp"

using namespace planoforge;

namespace {

DenoiserConfig arch_preset(const std::string& name) {
    DenoiserConfig a;
    if (name == "default") return a;
    if (name == "small") {
        a.widths = {12, 24, 48};
        a.time_embed_dim = 32;
        return a;
    }
    if (name == "tiny") {
        a.widths = {8, 16, 32};
        a.time_embed_dim = 32;
        return a;
    }
    throw ValueError("unknown architecture preset '" + name + "' (default|small|tiny)");
}

std::vector<Planogram> load_planograms_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<Planogram> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(planogram_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw IoError(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_planograms_jsonl(const std::vector<Planogram>& ps, const std::string& path) {
    std::ostringstream out;
    for (const Planogram& p : ps) out << planogram_to_json(p).dump() << "\n";
    write_file(path, out.str());
}

int cmd_corpus_gen(const CorpusConfig& cfg, const std::string& out_dir, bool as_json) {
    const Corpus corpus = generate_corpus(cfg);
    save_corpus(corpus, out_dir);
    double util = 0.0;
    for (const CorpusEntry& e : corpus.entries) util += space_utilization(e.planogram);
    util /= static_cast<double>(corpus.entries.size());
    const json summary = {{"planograms", corpus.entries.size()},
                          {"stores", cfg.store_count},
                          {"catalog_size", corpus.catalog.size()},
                          {"mean_utilization", util},
                          {"out", out_dir}};
    if (as_json)
        std::cout << summary.dump() << "\n";
    else
        std::cout << "wrote " << corpus.entries.size() << " planograms for " << cfg.store_count
                  << " stores to " << out_dir << " (mean utilization " << util << ")\n";
    return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& out_path, TrainConfig cfg,
              const std::string& preset, const std::string& history_path, int log_every,
              bool as_json) {
    cfg.arch = arch_preset(preset);
    const Corpus corpus = load_corpus(corpus_dir);
    const std::vector<TrainItem> items = build_training_set(corpus);
    const TrainResult result =
        Trainer::train(items, cfg, [&](int step, const LossBreakdown& loss) {
            if (log_every > 0 && (step % log_every == 0 || step + 1 == cfg.steps))
                std::cerr << "step " << step << " total " << loss.total << " diffusion "
                          << loss.diffusion << " constraint " << loss.constraint << " revenue "
                          << loss.revenue << "\n";
        });
    save_checkpoint(result.model, out_path);
    if (!history_path.empty()) {
        json hist = json::array();
        for (const LossBreakdown& l : result.history)
            hist.push_back({{"diffusion", l.diffusion},
                            {"constraint", l.constraint},
                            {"revenue", l.revenue},
                            {"total", l.total}});
        write_file(history_path, hist.dump() + "\n");
    }
    const json summary = {{"steps", cfg.steps},
                          {"parameters", result.model.parameter_count()},
                          {"final_total", result.history.empty() ? 0.0 : result.history.back().total},
                          {"checkpoint", out_path}};
    std::cout << (as_json ? summary.dump() : "trained " + std::to_string(cfg.steps) +
                                                 " steps -> " + out_path)
              << "\n";
    return 0;
}

int cmd_sample(const std::string& model_path, const std::string& corpus_dir, int count,
               std::uint64_t seed, int t_steps, const std::string& fixture_path,
               const std::string& out_path, bool as_json) {
    const DenoiserModel model = load_checkpoint(model_path);
    const Corpus corpus = load_corpus(corpus_dir);
    const Fixture fixture = fixture_path.empty() ? corpus.entries.at(0).planogram.fixture
                                                 : load_fixture(fixture_path);
    const NoiseSchedule schedule = NoiseSchedule::linear(t_steps);
    SamplingStats stats;
    const auto samples =
        sample_planograms(model, schedule, fixture, corpus.catalog, seed, count, &stats);
    save_planograms_jsonl(samples, out_path);
    const json summary = {{"count", count},
                          {"seed", seed},
                          {"total_ms", stats.total_ms},
                          {"out", out_path}};
    std::cout << (as_json ? summary.dump()
                          : "sampled " + std::to_string(count) + " planograms in " +
                                std::to_string(stats.total_ms) + " ms -> " + out_path)
              << "\n";
    return 0;
}

int cmd_validate(const std::string& corpus_dir, const std::string& planograms_path, bool as_json) {
    const Corpus corpus = load_corpus(corpus_dir);
    std::vector<Planogram> planograms;
    if (planograms_path.empty())
        for (const CorpusEntry& e : corpus.entries) planograms.push_back(e.planogram);
    else
        planograms = load_planograms_jsonl(planograms_path);

    RunReport report;
    for (const Planogram& p : planograms) {
        const ValidationReport v = validate(p, corpus.constraints, corpus.catalog);
        for (std::size_t i = 0; i < kConstraintKinds; ++i) {
            report.satisfied[i] += v.satisfied_count[i];
            report.total[i] += v.total_count[i];
        }
        report.samples += 1;
        const double overall = v.overall();
        report.overall_sum += overall;
        report.overall_sq_sum += overall * overall;
    }
    if (as_json)
        std::cout << report.to_json().dump() << "\n";
    else
        std::cout << report.render_table();
    return report.samples > 0 ? 0 : 1;
}

int cmd_report(const std::string& corpus_dir, const std::string& samples_path, bool as_json) {
    const Corpus corpus = load_corpus(corpus_dir);
    const std::vector<Planogram> samples = load_planograms_jsonl(samples_path);
    if (samples.empty()) throw ValueError("report: no samples in " + samples_path);
    const RevenueModel rm = default_revenue_model(samples[0].fixture);
    const RunReport report = build_report(samples, corpus.constraints, corpus.catalog, rm);
    if (as_json)
        std::cout << report.to_json().dump() << "\n";
    else
        std::cout << report.render_table() << "mean expected revenue: " << report.mean_revenue()
                  << "\nspace utilization: " << report.util_min << " .. " << report.util_max
                  << " (mean " << report.mean_utilization() << ")\n";
    return 0;
}

int cmd_quantize(const std::string& model_path, const std::string& out_path, bool as_json) {
    const DenoiserModel model = load_checkpoint(model_path);
    const std::string fp32_copy = out_path + ".fp32";
    const QuantizationReport r = quantize_checkpoint(model, fp32_copy, out_path);
    std::filesystem::remove(fp32_copy);
    if (as_json)
        std::cout << r.to_json().dump() << "\n";
    else
        std::cout << "quantized " << model_path << " -> " << out_path << " (" << r.quant_bytes
                  << " of " << r.full_bytes << " bytes, ratio " << r.size_ratio << ")\n";
    return 0;
}

int cmd_edgesim(bool table2, const LatencyModel& model, const std::string& scenario_path,
                double poisson_rate, double duration_ms, std::uint64_t seed, bool as_json) {
    if (table2) {
        const auto rows = scaling_table(model);
        if (as_json) {
            json arr = json::array();
            for (const ScalingRow& r : rows)
                arr.push_back({{"concurrent", r.concurrent},
                               {"response_ms", r.response_ms},
                               {"increase_pct", r.increase_pct}});
            std::cout << arr.dump() << "\n";
        } else {
            std::cout << render_scaling_table(rows);
        }
        return 0;
    }
    LoadScenario scenario;
    if (!scenario_path.empty())
        scenario = LoadScenario::from_json(json::parse(read_file(scenario_path)));
    else
        scenario = poisson_scenario(poisson_rate, duration_ms, seed);
    const LoadStats stats = run_load(scenario, model);
    if (as_json)
        std::cout << stats.to_json().dump() << "\n";
    else
        std::cout << "completed " << stats.completed << " requests, p50 " << stats.p50_ms
                  << " ms, p95 " << stats.p95_ms << " ms, p99 " << stats.p99_ms << " ms, "
                  << stats.cold_starts << " cold starts, max in-flight " << stats.max_in_flight
                  << "\n";
    return 0;
}

int cmd_serve(const std::string& corpus_dir, const std::string& model_path, int t_steps,
              const std::string& host, int port, const std::string& secret) {
    const Corpus corpus = load_corpus(corpus_dir);
    PlanogramService service(corpus.catalog, corpus.constraints);
    if (!secret.empty()) service.set_shared_secret(secret);
    if (!model_path.empty()) {
        const DenoiserModel model = load_checkpoint(model_path);
        service.models().load(model, NoiseSchedule::linear(t_steps),
                              std::filesystem::path(model_path).filename().string());
    }
    HttpServer server(service, host, port);
    if (!server.start()) throw Error("serve: cannot bind " + host + ":" + std::to_string(port));
    std::cout << "listening on " << host << ":" << server.port() << " (/v1)\n";
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale planogram synthesis pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config", "", "read option defaults from a TOML file");
    bool as_json = false;
    app.add_flag("--json", as_json, "machine-readable output");

    // corpus-gen
    auto* gen = app.add_subcommand("corpus-gen", "generate a synthetic training corpus");
    CorpusConfig ccfg;
    std::string gen_out = "corpus";
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--stores", ccfg.store_count);
    gen->add_option("--per-store", ccfg.planograms_per_store);
    gen->add_option("--catalog-size", ccfg.catalog_size);
    gen->add_option("--seed", ccfg.rng_seed);
    gen->add_option("--style-variance", ccfg.store_style_variance);
    gen->add_option("--shelf-min", ccfg.fixtures.shelf_min);
    gen->add_option("--shelf-max", ccfg.fixtures.shelf_max);
    gen->add_option("--columns", ccfg.fixtures.slot_columns);

    // train
    auto* train = app.add_subcommand("train", "train the denoiser on a corpus");
    std::string train_corpus = "corpus", train_out = "model.ckpt";
    std::string train_preset = "default", train_history;
    int log_every = 500;
    TrainConfig tcfg;
    train->add_option("--corpus", train_corpus);
    train->add_option("--out", train_out);
    train->add_option("--steps", tcfg.steps);
    train->add_option("--batch", tcfg.batch_size);
    train->add_option("--t", tcfg.diffusion_steps, "diffusion steps T");
    train->add_option("--lr", tcfg.learning_rate);
    train->add_option("--lambda1", tcfg.lambda1);
    train->add_option("--lambda2", tcfg.lambda2);
    train->add_option("--seed", tcfg.rng_seed);
    train->add_option("--threads", tcfg.threads);
    train->add_option("--arch", train_preset, "default|small|tiny");
    train->add_option("--history", train_history, "write per-step losses as JSON");
    train->add_option("--log-every", log_every);

    // sample
    auto* sample = app.add_subcommand("sample", "sample planograms from a checkpoint");
    std::string sample_model = "model.ckpt", sample_corpus = "corpus", sample_fixture;
    std::string sample_out = "samples.jsonl";
    int sample_count = 16, sample_t = 200;
    std::uint64_t sample_seed = 0;
    sample->add_option("--model", sample_model);
    sample->add_option("--corpus", sample_corpus, "corpus dir (catalog + constraints)");
    sample->add_option("--fixture", sample_fixture, "fixture JSON (default: first corpus fixture)");
    sample->add_option("--count", sample_count);
    sample->add_option("--seed", sample_seed);
    sample->add_option("--t", sample_t, "diffusion steps T");
    sample->add_option("--out", sample_out);

    // validate
    auto* val = app.add_subcommand("validate", "validate planograms against the constraint set");
    std::string val_corpus = "corpus", val_planograms;
    val->add_option("--corpus", val_corpus);
    val->add_option("--planograms", val_planograms, "JSONL file (default: the corpus itself)");

    // report
    auto* rep = app.add_subcommand("report", "full evaluation report for a sample file");
    std::string rep_corpus = "corpus", rep_samples = "samples.jsonl";
    rep->add_option("--corpus", rep_corpus);
    rep->add_option("--samples", rep_samples);

    // quantize
    auto* quant = app.add_subcommand("quantize", "write an int8 checkpoint");
    std::string quant_model = "model.ckpt", quant_out = "model.int8.ckpt";
    quant->add_option("--model", quant_model);
    quant->add_option("--out", quant_out);

    // edgesim
    auto* edge = app.add_subcommand("edgesim", "serverless latency simulation");
    bool table2 = false;
    std::string edge_mode = "fitted", edge_scenario;
    double edge_rate = 100.0, edge_duration = 10000.0, edge_k = 10.0, edge_logbase = 10.0;
    double edge_cold = 900.0;
    int edge_provisioned = 0;
    std::uint64_t edge_seed = 1;
    edge->add_flag("--table2", table2, "print the concurrency scaling table");
    edge->add_option("--mode", edge_mode, "fitted|formula");
    edge->add_option("--k", edge_k, "scaling factor (formula mode)");
    edge->add_option("--log-base", edge_logbase);
    edge->add_option("--cold-ms", edge_cold);
    edge->add_option("--provisioned", edge_provisioned);
    edge->add_option("--scenario", edge_scenario, "scenario JSON file");
    edge->add_option("--rate", edge_rate, "poisson arrivals per second");
    edge->add_option("--duration-ms", edge_duration);
    edge->add_option("--seed", edge_seed);

    // serve
    auto* serve = app.add_subcommand("serve", "run the REST service");
    std::string serve_corpus = "corpus", serve_model, serve_host = "127.0.0.1", serve_secret;
    int serve_port = 8080, serve_t = 200;
    serve->add_option("--corpus", serve_corpus);
    serve->add_option("--model", serve_model);
    serve->add_option("--t", serve_t, "diffusion steps T");
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);
    serve->add_option("--secret", serve_secret, "require this X-Api-Key header");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_corpus_gen(ccfg, gen_out, as_json);
        if (train->parsed())
            return cmd_train(train_corpus, train_out, tcfg, train_preset, train_history, log_every,
                             as_json);
        if (sample->parsed())
            return cmd_sample(sample_model, sample_corpus, sample_count, sample_seed, sample_t,
                              sample_fixture, sample_out, as_json);
        if (val->parsed()) return cmd_validate(val_corpus, val_planograms, as_json);
        if (rep->parsed()) return cmd_report(rep_corpus, rep_samples, as_json);
        if (quant->parsed()) return cmd_quantize(quant_model, quant_out, as_json);
        if (edge->parsed()) {
            LatencyModel model;
            if (edge_mode == "formula") {
                model.mode = LatencyModel::Mode::Formula;
                model.scaling_factor = edge_k;
                model.log_base = edge_logbase;
            } else if (edge_mode != "fitted") {
                throw ValueError("edgesim: unknown mode '" + edge_mode + "'");
            }
            model.cold_start_ms = edge_cold;
            model.provisioned_concurrency = edge_provisioned;
            return cmd_edgesim(table2, model, edge_scenario, edge_rate, edge_duration, edge_seed,
                               as_json);
        }
        if (serve->parsed())
            return cmd_serve(serve_corpus, serve_model, serve_t, serve_host, serve_port,
                             serve_secret);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 1;
}
