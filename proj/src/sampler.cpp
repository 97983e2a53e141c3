#include "planoforge/sampler.hpp"

#include <chrono>
#include <cmath>

namespace planoforge {

Tensor sample_grid(const DenoiserModel& model, const NoiseSchedule& schedule, const Shape& shape,
                   Rng& rng) {
    Tensor x = Tensor::randn(shape, rng);
    for (int t = schedule.steps - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const Tensor eps_hat = model.predict_value(x, t, schedule.steps);
        const double beta = schedule.beta[ti];
        const double alpha = schedule.alpha[ti];
        const double ab = schedule.alpha_bar[ti];
        const double coef = beta / std::sqrt(1.0 - ab);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double sigma = std::sqrt(beta);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double mu = inv_sqrt_alpha * (x.data[i] - coef * eps_hat.data[i]);
            x.data[i] = t > 0 ? mu + sigma * rng.gaussian() : mu;
        }
    }
    return x;
}

std::vector<Planogram> sample_planograms(const DenoiserModel& model, const NoiseSchedule& schedule,
                                         const Fixture& fixture, const Catalog& catalog,
                                         std::uint64_t seed, int count, SamplingStats* stats) {
    const GridCodec codec(catalog, fixture);
    const Shape shape = {kChannels, static_cast<std::size_t>(fixture.shelf_count),
                         static_cast<std::size_t>(fixture.slot_columns)};
    Rng rng(seed);
    std::vector<Planogram> out;
    out.reserve(static_cast<std::size_t>(count));
    const auto begin = std::chrono::steady_clock::now();
    for (int i = 0; i < count; ++i) {
        const Tensor grid = sample_grid(model, schedule, shape, rng);
        char buf[24];
        std::snprintf(buf, sizeof buf, "generated-%04d", i);
        out.push_back(codec.decode(grid, buf));
    }
    if (stats) {
        stats->total_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - begin)
                              .count();
        stats->count = count;
    }
    return out;
}

}  // namespace planoforge
