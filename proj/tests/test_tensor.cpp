#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dfm/rng.hpp"
#include "dfm/tensor.hpp"
#include "testutil.hpp"

using namespace dfm;

namespace {

Tensor random_param(RngStream& s, Shape shape) {
    Tensor g = gaussian(s, shape);
    return Tensor::param(shape, std::vector<double>(g.data().begin(), g.data().end()));
}

// Worst finite-difference error for a unary op folded into a scalar by
// mean_sq against a shifted random target.
double check_unary(const std::function<Tensor(const Tensor&)>& op, Shape shape, uint64_t seed) {
    RngStream s{seed, 0, 0};
    Tensor x = random_param(s, shape);
    Tensor target = gaussian(s, op(x).shape());
    auto loss_t = [&] { return mean_sq(sub(op(x), target)); };
    Tensor l = loss_t();
    backward(l);
    auto loss = [&] { return loss_t().item(); };
    return testutil::max_grad_error(x, loss);
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
    Tensor x = Tensor::from_data({3}, {0, 0, 0});
    Tensor y = softmax(x);
    for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("layer_norm of a constant vector is zero") {
    Tensor x = Tensor::full({5}, 3.25);
    Tensor y = layer_norm(x);
    for (int i = 0; i < 5; ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("mean_sq gradient vanishes at the stationary point") {
    Tensor c = Tensor::from_data({4}, {1, -2, 0.5, 3});
    Tensor x = Tensor::param({4}, {1, -2, 0.5, 3});
    Tensor l = mean_sq(sub(x, c));
    backward(l);
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 0.0);
}

TEST_CASE("finite-difference gradients for every differentiable op") {
    CHECK(check_unary([](const Tensor& x) { return gelu(x); }, {3, 4}, 11) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return softmax(x); }, {3, 4}, 12) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return layer_norm(x); }, {3, 4}, 13) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return scale(x, -1.7); }, {3, 4}, 14) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return reshape(x, {4, 3}); }, {3, 4}, 15) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return transpose(x); }, {3, 4}, 16) <= 1e-6);
    CHECK(check_unary([](const Tensor& x) { return slice_cols(x, 1, 2); }, {3, 4}, 17) <= 1e-6);
}

TEST_CASE("finite-difference gradients for binary ops") {
    RngStream s{21, 0, 0};
    Tensor a = random_param(s, {3, 4});
    Tensor b = random_param(s, {4, 2});
    Tensor bias = random_param(s, {2});
    Tensor target = gaussian(s, {3, 2});
    auto loss_t = [&] { return mean_sq(sub(add(matmul(a, b), bias), target)); };
    backward(loss_t());
    auto loss = [&] { return loss_t().item(); };
    CHECK(testutil::max_grad_error(a, loss) <= 1e-6);
    CHECK(testutil::max_grad_error(b, loss) <= 1e-6);
    CHECK(testutil::max_grad_error(bias, loss) <= 1e-6);
}

TEST_CASE("finite-difference gradients for mul with row broadcast") {
    RngStream s{22, 0, 0};
    Tensor a = random_param(s, {3, 4});
    Tensor g = random_param(s, {4});
    Tensor target = gaussian(s, {3, 4});
    auto loss_t = [&] { return mean_sq(sub(mul(a, g), target)); };
    backward(loss_t());
    auto loss = [&] { return loss_t().item(); };
    CHECK(testutil::max_grad_error(a, loss) <= 1e-6);
    CHECK(testutil::max_grad_error(g, loss) <= 1e-6);
}

TEST_CASE("finite-difference gradient for nll_from_logits") {
    RngStream s{23, 0, 0};
    Tensor logits = random_param(s, {4, 3});
    std::vector<int> labels{0, 2, 1, 2};
    auto loss_t = [&] { return nll_from_logits(logits, labels); };
    backward(loss_t());
    auto loss = [&] { return loss_t().item(); };
    CHECK(testutil::max_grad_error(logits, loss) <= 1e-6);
}

TEST_CASE("nll_from_logits matches log K for uniform logits and clamps extremes") {
    Tensor logits = Tensor::zeros({2, 8});
    Tensor l = nll_from_logits(logits, {3, 5});
    CHECK(l.item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));

    Tensor bad = Tensor::from_data({1, 2}, {100.0, -100.0});
    Tensor lb = nll_from_logits(bad, {1});
    CHECK(lb.item() == doctest::Approx(30.0));
}

TEST_CASE("concat and permute round-trip") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 1}, {5, 6});
    Tensor c = concat_cols({a, b});
    CHECK(c.shape() == Shape{2, 3});
    CHECK(c.data()[2] == 5);
    CHECK(c.data()[5] == 6);

    std::vector<int64_t> perm{5, 4, 3, 2, 1, 0};
    Tensor p = permute_flat(c, perm, {6});
    Tensor back = permute_flat(p, perm, {2, 3});
    for (int64_t i = 0; i < 6; ++i) CHECK(back.data()[i] == c.data()[i]);
}

TEST_CASE("gradient accumulates across backward calls until cleared") {
    Tensor x = Tensor::param({2}, {1.0, 2.0});
    backward(mean_sq(x));
    std::vector<double> once(x.grad().begin(), x.grad().end());
    backward(mean_sq(x));
    for (size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * once[i]));
    x.clear_grad();
    CHECK(!x.has_grad());
}

TEST_CASE("shape mismatches raise contract errors naming both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), ContractError);
    CHECK_THROWS_WITH_AS(matmul(a, a), doctest::Contains("matmul"), ContractError);
    CHECK_THROWS_AS(mul(a, b), ContractError);
}

TEST_CASE("matmul against a hand-computed product") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    CHECK(c.data()[0] == 58);
    CHECK(c.data()[1] == 64);
    CHECK(c.data()[2] == 139);
    CHECK(c.data()[3] == 154);
}
