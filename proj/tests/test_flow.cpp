#include <doctest.h>

#include <cmath>

#include "dfm/oracle.hpp"
#include "dfm/rng.hpp"
#include "dfm/schedule.hpp"

using namespace dfm;

TEST_CASE("forward_noise endpoints and interpolation") {
    Tensor x0 = Tensor::from_data({3}, {1, 2, 3});
    RngStream s{1, 0, 0};
    Tensor eps = gaussian(s, {3});

    Tensor at0 = forward_noise(x0, eps, 0.0);
    Tensor at1 = forward_noise(x0, eps, 1.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(at0.data()[i] == x0.data()[i]);
        CHECK(at1.data()[i] == eps.data()[i]);
    }

    Tensor two = Tensor::from_data({1}, {2.0});
    Tensor zero = Tensor::from_data({1}, {0.0});
    CHECK(forward_noise(two, zero, 0.25).item() == doctest::Approx(1.5));

    CHECK_THROWS_AS(forward_noise(x0, eps, 1.5), ContractError);
    CHECK_THROWS_AS(forward_noise(x0, eps, -0.1), ContractError);
}

TEST_CASE("forward_noise is affine in both arguments") {
    RngStream s{2, 0, 0};
    Tensor x1 = gaussian(s, {5});
    Tensor x2 = gaussian(s, {5});
    Tensor e1 = gaussian(s, {5});
    Tensor e2 = gaussian(s, {5});
    double t = 0.37;
    // superposition: f(x1+x2, e1+e2) == f(x1,e1) + f(x2,e2)
    Tensor lhs = forward_noise(add(x1, x2), add(e1, e2), t);
    Tensor rhs = add(forward_noise(x1, e1, t), forward_noise(x2, e2, t));
    for (int i = 0; i < 5; ++i) CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-14));
}

TEST_CASE("velocity_target basics and the t-scaled identity") {
    Tensor x0 = Tensor::from_data({2}, {1, 0});
    Tensor xt = Tensor::from_data({2}, {0, 1});
    Tensor v = velocity_target(x0, xt);
    CHECK(v.data()[0] == 1);
    CHECK(v.data()[1] == -1);

    Tensor same = velocity_target(x0, x0);
    CHECK(same.data()[0] == 0);
    CHECK(same.data()[1] == 0);

    // with xt on the corruption path, target == t * (x0 - eps)
    RngStream s{3, 0, 0};
    Tensor x = gaussian(s, {6});
    Tensor eps = gaussian(s, {6});
    double t = 0.62;
    Tensor path = forward_noise(x, eps, t);
    Tensor target = velocity_target(x, path);
    Tensor expect = scale(sub(x, eps), t);
    for (int i = 0; i < 6; ++i)
        CHECK(target.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("euler step leaves xt unchanged for zero velocity") {
    Tensor xt = Tensor::from_data({3}, {1, 2, 3});
    Tensor v = Tensor::zeros({3});
    Tensor out = euler_denoise_step(xt, v, 0.5, 0.1);
    for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == xt.data()[i]);
    CHECK_THROWS_AS(euler_denoise_step(xt, v, 0.0, 0.1), ContractError);
    CHECK_THROWS_AS(euler_denoise_step(xt, v, 0.5, 0.6), ContractError);
}

TEST_CASE("final euler step with the oracle velocity lands on the posterior mean") {
    auto ds = DiscreteDataset::from_points({{1.0, 0.0}, {-1.0, 2.0}});
    Tensor xt = Tensor::from_data({2}, {0.3, 0.4});
    double t = 0.2;
    Tensor v = marginal_velocity(xt, t, ds);
    Tensor out = euler_denoise_step(xt, v, t, t);
    // posterior mean = xt + v
    auto logw = log_posterior_weights(xt, t, ds);
    double m0 = std::exp(logw[0]) * 1.0 + std::exp(logw[1]) * -1.0;
    double m1 = std::exp(logw[0]) * 0.0 + std::exp(logw[1]) * 2.0;
    CHECK(out.data()[0] == doctest::Approx(m0).epsilon(1e-12));
    CHECK(out.data()[1] == doctest::Approx(m1).epsilon(1e-12));
}

TEST_CASE("oracle flow on a singleton dataset reaches x0 exactly for any step count") {
    auto ds = DiscreteDataset::from_points({{0.7, -1.4, 0.2}});
    for (int steps : {1, 3, 8, 33}) {
        RngStream s{17, static_cast<uint64_t>(steps), 0};
        Tensor x = gaussian(s, {3});
        auto grid = sampling_grid(steps);
        for (size_t j = 0; j < grid.size(); ++j) {
            double t = grid[j];
            double dt = j + 1 < grid.size() ? t - grid[j + 1] : t;
            Tensor v = marginal_velocity(x, t, ds);
            x = euler_denoise_step(x, v, t, dt);
        }
        for (int i = 0; i < 3; ++i) CHECK(x.data()[i] == doctest::Approx(ds.points[0][i]).epsilon(1e-12));
    }
}

TEST_CASE("sample_timestep is uniform on [t_min, 1] and reproducible") {
    RngStream s{7, 0, 0};
    NoiseSchedule sched;
    const int n = 100'000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double t = sample_timestep(s, sched);
        REQUIRE(t >= sched.t_min);
        REQUIRE(t <= 1.0);
        sum += t;
    }
    CHECK(std::abs(sum / n - (sched.t_min + 1.0) / 2) <= 0.01);

    RngStream a{9, 1, 0}, b{9, 1, 0};
    for (int i = 0; i < 10; ++i) CHECK(sample_timestep(a) == sample_timestep(b));
}

TEST_CASE("sampling grid shape") {
    auto g1 = sampling_grid(1);
    CHECK(g1.size() == 1);
    CHECK(g1[0] == 1.0);

    auto g4 = sampling_grid(4);
    CHECK(g4.size() == 4);
    CHECK(g4.front() == 1.0);
    CHECK(g4.back() == doctest::Approx(1e-3));
    for (size_t i = 1; i < g4.size(); ++i) CHECK(g4[i] < g4[i - 1]);
}
