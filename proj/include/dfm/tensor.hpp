#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfm/common.hpp"
#include "dfm/rng.hpp"

namespace dfm {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Pushes this node's grad into its parents' grads. Empty for leaves and
    // for nodes built in inference mode (no differentiable parents).
    std::function<void(TensorImpl&)> backprop;
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats. Value-semantics handle onto a
// shared payload; immutable once built except gradient accumulation during a
// backward pass and explicit parameter updates between graphs
// (mutable_data, for optimizers and finite-difference probes).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double v) { return from_data({1}, {v}); }
    // Leaf with gradient tracking (a trainable parameter).
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }
    bool requires_grad() const { return impl_->requires_grad; }

    std::span<const double> data() const { return impl_->value; }
    std::vector<double>& mutable_data() { return impl_->value; }
    double item() const;

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const;
    void accumulate_grad(std::span<const double> g);
    void clear_grad() { impl_->grad.clear(); }

    detail::TensorImpl* node() const { return impl_.get(); }
    std::shared_ptr<detail::TensorImpl> handle() const { return impl_; }

    friend Tensor make_op(Shape shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(detail::TensorImpl&)> backprop);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// --- graph construction ----------------------------------------------------

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(detail::TensorImpl&)> backprop);

// Elementwise; b may share a's shape, be a vector matching a's last axis
// (broadcast over leading axes), or be a scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// 2-D only.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Normalizes over the last axis; learned affine intentionally absent
// (modulation is applied separately). Variance epsilon 1e-6.
Tensor layer_norm(const Tensor& a);
// Exact Gaussian-CDF GELU: x * Phi(x).
Tensor gelu(const Tensor& a);
// Softmax over the last axis.
Tensor softmax(const Tensor& a);
// Mean of squared entries; returns a scalar.
Tensor mean_sq(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_cols(const Tensor& a, int64_t col0, int64_t width);
Tensor concat_cols(const std::vector<Tensor>& parts);
// out.flat[i] = a.flat[src_index[i]]; src_index must be a permutation when the
// output is later inverted. Carrier for patchify/unpatchify layouts.
Tensor permute_flat(const Tensor& a, const std::vector<int64_t>& src_index, Shape out_shape);

// Mean negative log-likelihood of the labelled class from raw logits [B, K].
// Log-probabilities are clamped at -30 (gradient is zero where clamped).
Tensor nll_from_logits(const Tensor& logits, const std::vector<int>& labels);

// Runs reverse-mode accumulation from a scalar. Leaf gradients accumulate
// across calls until clear_grad().
void backward(const Tensor& loss);

// i.i.d. standard normal entries; advances the stream by 2*numel slots.
Tensor gaussian(RngStream& stream, Shape shape);

}  // namespace dfm
