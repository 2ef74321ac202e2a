#pragma once

#include "dfm/rng.hpp"
#include "dfm/tensor.hpp"

namespace dfm {

// Linear corruption path: alpha(t) = 1 - t, sigma(t) = t on [0, 1].
// t_min is the lower clamp used when sampling training timesteps and as the
// last grid point before the exact final jump during generation; it keeps the
// 1/t step factor and the conditional density away from the t = 0 singularity.
struct NoiseSchedule {
    double t_min = 1e-3;
    double t_max = 1.0;

    static double alpha(double t) { return 1.0 - t; }
    static double sigma(double t) { return t; }
};

// (1 - t) * x0 + t * eps.
Tensor forward_noise(const Tensor& x0, const Tensor& eps, double t);

// Regression target for the velocity net: x0 - xt.
Tensor velocity_target(const Tensor& x0, const Tensor& xt);

// One probability-flow Euler step toward t - dt. With v predicting
// E[x0|xt] - xt the exact reverse velocity is v / t, so the update is
// xt + (dt / t) * v; dt == t lands on the predicted posterior mean.
Tensor euler_denoise_step(const Tensor& xt, const Tensor& v, double t, double dt);

// t ~ Uniform[t_min, t_max].
double sample_timestep(RngStream& stream, const NoiseSchedule& sched = NoiseSchedule{});

// Generation grid: `steps` values from 1 down to t_min (just {1} when
// steps == 1). The step from grid.back() uses dt == t, jumping to 0 exactly.
std::vector<double> sampling_grid(int64_t steps, const NoiseSchedule& sched = NoiseSchedule{});

}  // namespace dfm
