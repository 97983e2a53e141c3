#include "planoforge/train.hpp"

#include <cmath>
#include <thread>

namespace planoforge {

void TrainConfig::check() const {
    if (!(learning_rate > 0.0)) throw ValueError("train: learning_rate must be positive");
    if (batch_size < 1 || diffusion_steps < 2 || steps < 0)
        throw ValueError("train: batch_size >= 1, T >= 2, steps >= 0 required");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw ValueError("train: lambdas must be nonnegative");
}

std::vector<TrainItem> build_training_set(const Corpus& corpus) {
    std::vector<TrainItem> items;
    items.reserve(corpus.entries.size());
    for (const CorpusEntry& e : corpus.entries) {
        TrainItem item;
        auto codec = std::make_shared<GridCodec>(corpus.catalog, e.planogram.fixture);
        item.grid = codec->encode(e.planogram).grid;
        item.penalty = std::make_shared<GridPenalty>(codec, corpus.constraints);
        item.revenue_model = default_revenue_model(e.planogram.fixture);
        item.revenue_scale = revenue_scale(*codec, item.revenue_model);
        item.codec = std::move(codec);
        items.push_back(std::move(item));
    }
    return items;
}

Trainer::Trainer(DenoiserModel model, const TrainConfig& cfg)
    : model_(std::move(model)),
      schedule_(NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta1, cfg.betaT)),
      cfg_(cfg),
      rng_(cfg.rng_seed) {
    cfg_.check();
    for (const auto& [name, t] : model_.parameters()) {
        adam_m_.emplace(name, Tensor::zeros(t.shape));
        adam_v_.emplace(name, Tensor::zeros(t.shape));
    }
}

Trainer::ItemGrad Trainer::item_pass(const TrainItem& item, int t, const Tensor& eps) const {
    Graph g;
    const Tensor xt = forward_sample(item.grid, t, eps, schedule_);
    const NodeId eps_hat = model_.predict(g, g.input(xt), t, schedule_.steps, true);

    const NodeId diff = g.sub(eps_hat, g.input(eps));
    const NodeId l_diff = g.reduce_mean(g.mul(diff, diff));
    NodeId total = l_diff;

    ItemGrad out;
    const bool wants_x0 = cfg_.lambda1 > 0.0 || cfg_.lambda2 > 0.0;
    if (wants_x0) {
        const double ab = schedule_.alpha_bar[static_cast<std::size_t>(t)];
        const double c0 = std::sqrt(ab);
        const double c1 = std::sqrt(1.0 - ab);
        Tensor xt_scaled = xt;
        for (double& v : xt_scaled.data) v /= c0;
        // denoised estimate: xt/sqrt(ab) - sqrt(1-ab)/sqrt(ab) * eps_hat
        const NodeId x0_hat = g.add(g.input(xt_scaled), g.affine(eps_hat, -c1 / c0, 0.0));
        if (cfg_.lambda1 > 0.0) {
            const NodeId l_con = item.penalty->hinge_node(g, x0_hat);
            out.losses.constraint = g.value(l_con).item();
            total = g.add(total, g.affine(l_con, cfg_.lambda1, 0.0));
        }
        if (cfg_.lambda2 > 0.0) {
            const NodeId l_rev = g.affine(revenue_node(g, x0_hat, *item.codec, item.revenue_model),
                                          -1.0 / item.revenue_scale, 0.0);
            out.losses.revenue = g.value(l_rev).item();
            total = g.add(total, g.affine(l_rev, cfg_.lambda2, 0.0));
        }
    }
    out.losses.diffusion = g.value(l_diff).item();
    out.losses.total = g.value(total).item();
    out.grads = g.backward(total);
    return out;
}

LossBreakdown Trainer::step(const std::vector<const TrainItem*>& batch) {
    if (batch.empty()) throw ValueError("train: empty batch");
    const std::size_t b = batch.size();

    // draw all randomness up front so worker threads never touch the stream
    std::vector<int> ts(b);
    std::vector<Tensor> eps(b);
    for (std::size_t i = 0; i < b; ++i) {
        ts[i] = static_cast<int>(rng_.uniform_u64(static_cast<std::uint64_t>(schedule_.steps)));
        eps[i] = Tensor::randn(batch[i]->grid.shape, rng_);
    }

    std::vector<ItemGrad> results(b);
    unsigned workers = cfg_.threads > 0 ? static_cast<unsigned>(cfg_.threads)
                                        : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(b)));
    if (workers == 1) {
        for (std::size_t i = 0; i < b; ++i) results[i] = item_pass(*batch[i], ts[i], eps[i]);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < b; i += workers)
                    results[i] = item_pass(*batch[i], ts[i], eps[i]);
            });
        for (auto& th : pool) th.join();
    }

    // reduce in element order: results are independent of thread count
    LossBreakdown mean;
    GradientMap grads;
    for (const auto& [name, t] : model_.parameters()) grads.emplace(name, Tensor::zeros(t.shape));
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        mean.diffusion += results[i].losses.diffusion * inv_b;
        mean.constraint += results[i].losses.constraint * inv_b;
        mean.revenue += results[i].losses.revenue * inv_b;
        mean.total += results[i].losses.total * inv_b;
        for (auto& [name, acc] : grads) {
            const Tensor& gi = results[i].grads.at(name);
            for (std::size_t j = 0; j < acc.size(); ++j) acc.data[j] += gi.data[j] * inv_b;
        }
    }
    if (!std::isfinite(mean.total))
        throw ValueError("train: non-finite loss at step " + std::to_string(adam_steps_) +
                         " (diffusion=" + std::to_string(mean.diffusion) +
                         ", constraint=" + std::to_string(mean.constraint) +
                         ", revenue=" + std::to_string(mean.revenue) + ")");

    apply_adam(grads);
    return mean;
}

void Trainer::apply_adam(const GradientMap& grads) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++adam_steps_;
    double lr = cfg_.learning_rate;
    if (cfg_.cosine_anneal && cfg_.steps > 0) {
        const double frac = static_cast<double>(adam_steps_ - 1) / static_cast<double>(cfg_.steps);
        lr *= 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, frac)));
    }
    const double c1 = 1.0 - std::pow(b1, adam_steps_);
    const double c2 = 1.0 - std::pow(b2, adam_steps_);
    for (auto& [name, theta] : model_.parameters()) {
        const Tensor& gt = grads.at(name);
        Tensor& m = adam_m_.at(name);
        Tensor& v = adam_v_.at(name);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gval = gt.data[i];
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gval;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gval * gval;
            theta.data[i] -= lr * (m.data[i] / c1) / (std::sqrt(v.data[i] / c2) + eps);
        }
    }
}

TrainResult Trainer::train(const std::vector<TrainItem>& items, const TrainConfig& cfg,
                           const std::function<void(int, const LossBreakdown&)>& progress) {
    cfg.check();
    if (items.empty()) throw ValueError("train: empty training set");
    Trainer tr(DenoiserModel::init(cfg.arch, cfg.rng_seed ^ 0x5eedULL), cfg);
    Rng batch_rng(cfg.rng_seed ^ 0xba7c4ULL);

    TrainResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<const TrainItem*> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_size));
        for (int i = 0; i < cfg.batch_size; ++i)
            batch.push_back(&items[batch_rng.uniform_u64(items.size())]);
        const LossBreakdown loss = tr.step(batch);
        result.history.push_back(loss);
        if (progress) progress(step, loss);
    }
    result.model = tr.model();
    result.schedule = tr.schedule();
    return result;
}

}  // namespace planoforge
