#pragma once

#include <vector>

#include "planoforge/codec.hpp"
#include "planoforge/denoiser.hpp"
#include "planoforge/diffusion.hpp"

namespace planoforge {

struct SamplingStats {
    double total_ms = 0.0;
    int count = 0;
};

// Ancestral sampling from pure noise: at each step the posterior mean is
// computed from the predicted noise and the transition variance is fixed to
// beta_t. Deterministic given the rng state.
Tensor sample_grid(const DenoiserModel& model, const NoiseSchedule& schedule, const Shape& shape,
                   Rng& rng);

// Samples `count` grids for the fixture and decodes each one. Every returned
// planogram satisfies the structural grid invariants (decode is total).
std::vector<Planogram> sample_planograms(const DenoiserModel& model, const NoiseSchedule& schedule,
                                         const Fixture& fixture, const Catalog& catalog,
                                         std::uint64_t seed, int count,
                                         SamplingStats* stats = nullptr);

}  // namespace planoforge
