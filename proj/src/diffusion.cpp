#include "planoforge/diffusion.hpp"

#include <cmath>

namespace planoforge {

NoiseSchedule NoiseSchedule::linear(int steps, double beta1, double betaT) {
    if (steps < 2) throw ValueError("schedule: T must be >= 2");
    if (!(0.0 < beta1 && beta1 < betaT && betaT < 1.0))
        throw ValueError("schedule: need 0 < beta1 < betaT < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(static_cast<std::size_t>(steps));
    s.alpha.resize(static_cast<std::size_t>(steps));
    s.alpha_bar.resize(static_cast<std::size_t>(steps));
    double running = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
        const double b = beta1 + (betaT - beta1) * frac;
        s.beta[static_cast<std::size_t>(i)] = b;
        s.alpha[static_cast<std::size_t>(i)] = 1.0 - b;
        running *= 1.0 - b;
        s.alpha_bar[static_cast<std::size_t>(i)] = running;
    }
    return s;
}

namespace {
void check_t(int t, const NoiseSchedule& s) {
    if (t < 0 || t >= s.steps) throw ValueError("diffusion: step index out of range");
}
}  // namespace

Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s) {
    check_t(t, s);
    if (!same_shape(x0, eps))
        throw ShapeError("forward_sample: x0 " + shape_str(x0.shape) + " vs eps " +
                         shape_str(eps.shape));
    const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    Tensor out = Tensor::zeros(x0.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c0 * x0.data[i] + c1 * eps.data[i];
    return out;
}

Tensor predict_x0(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s) {
    check_t(t, s);
    if (!same_shape(xt, eps_hat))
        throw ShapeError("predict_x0: xt " + shape_str(xt.shape) + " vs eps_hat " +
                         shape_str(eps_hat.shape));
    const double ab = s.alpha_bar[static_cast<std::size_t>(t)];
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    Tensor out = Tensor::zeros(xt.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (xt.data[i] - c1 * eps_hat.data[i]) / c0;
    return out;
}

}  // namespace planoforge
