#pragma once

#include <vector>

#include "planoforge/tensor.hpp"

namespace planoforge {

// Linear variance schedule. beta[i] interpolates beta1..betaT inclusive;
// alpha_bar is the running product of (1 - beta).
struct NoiseSchedule {
    int steps = 0;  // T
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    static NoiseSchedule linear(int steps, double beta1 = 1e-4, double betaT = 0.02);
};

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s);

// x0_hat = (x_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t)
Tensor predict_x0(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s);

}  // namespace planoforge
