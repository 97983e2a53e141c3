#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "planoforge/constraints.hpp"
#include "planoforge/corpus.hpp"
#include "planoforge/denoiser.hpp"
#include "planoforge/diffusion.hpp"
#include "planoforge/evaluation.hpp"

namespace planoforge {

struct TrainConfig {
    double learning_rate = 2e-4;
    bool cosine_anneal = true;
    int batch_size = 16;
    int diffusion_steps = 200;  // longer schedules (e.g. 1000) supported via config
    int steps = 20000;
    double lambda1 = 1.0;  // constraint penalty weight
    double lambda2 = 0.1;  // revenue term weight
    std::uint64_t rng_seed = 42;
    double beta1 = 1e-4, betaT = 0.02;
    DenoiserConfig arch;
    int threads = 0;  // 0 = hardware concurrency, capped by batch size

    void check() const;
};

struct LossBreakdown {
    double diffusion = 0.0;
    double constraint = 0.0;
    double revenue = 0.0;
    double total = 0.0;
};

// One encoded planogram plus everything the penalty and revenue terms need.
struct TrainItem {
    Tensor grid;
    std::shared_ptr<const GridCodec> codec;
    std::shared_ptr<const GridPenalty> penalty;
    RevenueModel revenue_model;
    double revenue_scale = 1.0;
};

std::vector<TrainItem> build_training_set(const Corpus& corpus);

struct TrainResult {
    DenoiserModel model;
    NoiseSchedule schedule;
    std::vector<LossBreakdown> history;  // one entry per optimizer step
};

// Noise-prediction training with the composite objective
//   total = diffusion + lambda1 * constraint + lambda2 * revenue
// where the diffusion term is the mean squared error between sampled and
// predicted noise, the constraint term is the grid-path hinge on the model's
// denoised estimate, and the revenue term is the negated normalized expected
// revenue of that estimate. Lambda = 0 disables a term entirely: it is
// neither built nor reported (exact zero). Adam with optional cosine
// annealing; deterministic given the seed. Batch elements may evaluate on
// worker threads; gradients reduce in element order, so thread count never
// changes the result.
class Trainer {
  public:
    Trainer(DenoiserModel model, const TrainConfig& cfg);

    LossBreakdown step(const std::vector<const TrainItem*>& batch);
    const DenoiserModel& model() const { return model_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    int steps_taken() const { return adam_steps_; }

    // Full run over the training set with uniform batch sampling.
    static TrainResult train(const std::vector<TrainItem>& items, const TrainConfig& cfg,
                             const std::function<void(int, const LossBreakdown&)>& progress = {});

  private:
    struct ItemGrad {
        GradientMap grads;
        LossBreakdown losses;
    };
    ItemGrad item_pass(const TrainItem& item, int t, const Tensor& eps) const;
    void apply_adam(const GradientMap& grads);

    DenoiserModel model_;
    NoiseSchedule schedule_;
    TrainConfig cfg_;
    std::map<std::string, Tensor> adam_m_, adam_v_;
    int adam_steps_ = 0;
    Rng rng_;
};

}  // namespace planoforge
