#include "dfm/schedule.hpp"

#include <string>

namespace dfm {

Tensor forward_noise(const Tensor& x0, const Tensor& eps, double t) {
    if (x0.shape() != eps.shape()) {
        throw ContractError("forward_noise: x0 shape " + shape_str(x0.shape()) + " != eps shape " +
                            shape_str(eps.shape()));
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw ContractError("forward_noise: t = " + std::to_string(t) + " outside [0, 1]");
    }
    return add(scale(x0, 1.0 - t), scale(eps, t));
}

Tensor velocity_target(const Tensor& x0, const Tensor& xt) {
    if (x0.shape() != xt.shape()) {
        throw ContractError("velocity_target: x0 shape " + shape_str(x0.shape()) + " != xt shape " +
                            shape_str(xt.shape()));
    }
    return sub(x0, xt);
}

Tensor euler_denoise_step(const Tensor& xt, const Tensor& v, double t, double dt) {
    if (xt.shape() != v.shape()) {
        throw ContractError("euler_denoise_step: xt shape " + shape_str(xt.shape()) + " != v shape " +
                            shape_str(v.shape()));
    }
    if (!(t > 0.0)) {
        throw ContractError("euler_denoise_step: t = " + std::to_string(t) + " must be positive");
    }
    if (!(dt > 0.0 && dt <= t && t <= 1.0)) {
        throw ContractError("euler_denoise_step: need 0 < dt <= t <= 1, got dt = " + std::to_string(dt) +
                            ", t = " + std::to_string(t));
    }
    return add(xt, scale(v, dt / t));
}

double sample_timestep(RngStream& stream, const NoiseSchedule& sched) {
    return stream.next_uniform(sched.t_min, sched.t_max);
}

std::vector<double> sampling_grid(int64_t steps, const NoiseSchedule& sched) {
    if (steps < 1) {
        throw ContractError("sampling_grid: steps must be >= 1, got " + std::to_string(steps));
    }
    std::vector<double> grid;
    grid.reserve(static_cast<size_t>(steps));
    if (steps == 1) {
        grid.push_back(sched.t_max);
        return grid;
    }
    for (int64_t i = 0; i < steps; ++i) {
        double f = static_cast<double>(i) / static_cast<double>(steps - 1);
        grid.push_back(sched.t_max + f * (sched.t_min - sched.t_max));
    }
    grid.back() = sched.t_min;
    return grid;
}

}  // namespace dfm
