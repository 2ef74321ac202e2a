#include "dfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace dfm {

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kLogProbClamp = -30.0;

void check(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

std::string op_shape_msg(const char* op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
    return os.str();
}

// Broadcast classes accepted by add/sub/mul.
enum class Bcast { Same, LastAxis, Scalar };

Bcast classify_broadcast(const char* op, const Shape& a, const Shape& b) {
    if (a == b) return Bcast::Same;
    int64_t bn = shape_numel(b);
    if (bn == 1) return Bcast::Scalar;
    if (!a.empty() && (b.size() == 1 || (b.size() == 2 && b[0] == 1)) && b.back() == a.back()) {
        return Bcast::LastAxis;
    }
    throw ContractError(op_shape_msg(op, a, b));
}

}  // namespace

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(detail::TensorImpl&)> backprop) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(value);
    bool track = false;
    for (const auto& p : parents) track = track || p.requires_grad();
    if (track) {
        impl->requires_grad = true;
        impl->parents.reserve(parents.size());
        for (const auto& p : parents) impl->parents.push_back(p.handle());
        impl->backprop = std::move(backprop);
    }
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor Tensor::zeros(Shape shape) {
    return from_data(std::move(shape), {});
}

Tensor Tensor::full(Shape shape, double v) {
    int64_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    int64_t n = shape_numel(shape);
    if (data.empty()) data.assign(static_cast<size_t>(n), 0.0);
    check(static_cast<int64_t>(data.size()) == n,
          "Tensor: data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(data);
    Tensor t;
    t.impl_ = impl;
    return t;
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.impl_->requires_grad = true;
    return t;
}

double Tensor::item() const {
    check(numel() == 1, "Tensor::item: tensor has " + std::to_string(numel()) + " entries");
    return impl_->value[0];
}

std::span<const double> Tensor::grad() const {
    check(has_grad(), "Tensor::grad: no gradient has been accumulated");
    return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const double> g) {
    check(static_cast<int64_t>(g.size()) == numel(), "Tensor::accumulate_grad: size mismatch");
    if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
    for (size_t i = 0; i < g.size(); ++i) impl_->grad[i] += g[i];
}

namespace {

std::vector<double>& ensure_grad(detail::TensorImpl& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

// Elementwise combine with the three supported broadcast classes.
template <class Fwd, class BwdA, class BwdB>
Tensor elementwise(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
    Bcast bc = classify_broadcast(op, a.shape(), b.shape());
    auto av = a.data();
    auto bv = b.data();
    size_t n = av.size();
    size_t bn = bv.size();
    std::vector<double> out(n);
    switch (bc) {
        case Bcast::Same:
            for (size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
            break;
        case Bcast::Scalar:
            for (size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[0]);
            break;
        case Bcast::LastAxis:
            for (size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % bn]);
            break;
    }
    auto an = a.node();
    auto bnode = b.node();
    return make_op(a.shape(), std::move(out), {a, b}, [an, bnode, bc, bn, bwd_a, bwd_b](detail::TensorImpl& self) {
        size_t n = self.value.size();
        if (an->requires_grad) {
            auto& ga = ensure_grad(*an);
            for (size_t i = 0; i < n; ++i) {
                size_t bi = bc == Bcast::Same ? i : (bc == Bcast::Scalar ? 0 : i % bn);
                ga[i] += self.grad[i] * bwd_a(an->value[i], bnode->value[bi]);
            }
        }
        if (bnode->requires_grad) {
            auto& gb = ensure_grad(*bnode);
            for (size_t i = 0; i < n; ++i) {
                size_t bi = bc == Bcast::Same ? i : (bc == Bcast::Scalar ? 0 : i % bn);
                gb[bi] += self.grad[i] * bwd_b(an->value[i], bnode->value[bi]);
            }
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
    auto av = a.data();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an, s](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * s;
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
          op_shape_msg("matmul", a.shape(), b.shape()));
    int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int64_t i = 0; i < m; ++i) {
        double* O = out.data() + i * n;
        const double* Ai = A + i * k;
        for (int64_t p = 0; p < k; ++p) {
            double aip = Ai[p];
            const double* Bp = B + p * n;
            for (int64_t j = 0; j < n; ++j) O[j] += aip * Bp[j];
        }
    }
    auto an = a.node();
    auto bn = b.node();
    return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](detail::TensorImpl& self) {
        const double* G = self.grad.data();
        if (an->requires_grad) {
            // dA = G . B^T
            auto& ga = ensure_grad(*an);
            const double* B = bn->value.data();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* Gi = G + i * n;
                    const double* Bp = B + p * n;
                    for (int64_t j = 0; j < n; ++j) s += Gi[j] * Bp[j];
                    ga[static_cast<size_t>(i * k + p)] += s;
                }
        }
        if (bn->requires_grad) {
            // dB = A^T . G
            auto& gb = ensure_grad(*bn);
            const double* A = an->value.data();
            for (int64_t i = 0; i < m; ++i) {
                const double* Ai = A + i * k;
                const double* Gi = G + i * n;
                for (int64_t p = 0; p < k; ++p) {
                    double aip = Ai[p];
                    double* gbp = gb.data() + p * n;
                    for (int64_t j = 0; j < n; ++j) gbp[j] += aip * Gi[j];
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check(a.shape().size() == 2, "transpose: expected 2-D tensor, got " + shape_str(a.shape()));
    int64_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(static_cast<size_t>(m * n));
    auto av = a.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = av[static_cast<size_t>(i * n + j)];
    auto an = a.node();
    return make_op({n, m}, std::move(out), {a}, [an, m, n](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j)
                ga[static_cast<size_t>(i * n + j)] += self.grad[static_cast<size_t>(j * m + i)];
    });
}

Tensor layer_norm(const Tensor& a) {
    check(!a.shape().empty(), "layer_norm: scalar input");
    int64_t cols = a.shape().back();
    int64_t rows = a.numel() / cols;
    auto av = a.data();
    std::vector<double> out(av.size());
    std::vector<double> inv_std(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * cols;
        double mean = 0.0;
        for (int64_t j = 0; j < cols; ++j) mean += x[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            double d = x[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<size_t>(r)] = inv;
        double* y = out.data() + r * cols;
        for (int64_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) * inv;
    }
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a},
                   [an, rows, cols, inv_std = std::move(inv_std)](detail::TensorImpl& self) {
                       auto& ga = ensure_grad(*an);
                       for (int64_t r = 0; r < rows; ++r) {
                           const double* g = self.grad.data() + r * cols;
                           const double* y = self.value.data() + r * cols;
                           double inv = inv_std[static_cast<size_t>(r)];
                           double gmean = 0.0, gymean = 0.0;
                           for (int64_t j = 0; j < cols; ++j) {
                               gmean += g[j];
                               gymean += g[j] * y[j];
                           }
                           gmean /= static_cast<double>(cols);
                           gymean /= static_cast<double>(cols);
                           double* o = ga.data() + r * cols;
                           for (int64_t j = 0; j < cols; ++j) o[j] += inv * (g[j] - gmean - y[j] * gymean);
                       }
                   });
}

Tensor gelu(const Tensor& a) {
    auto av = a.data();
    std::vector<double> out(av.size());
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    for (size_t i = 0; i < out.size(); ++i) {
        double x = av[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        for (size_t i = 0; i < ga.size(); ++i) {
            double x = an->value[i];
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            ga[i] += self.grad[i] * (cdf + x * pdf);
        }
    });
}

Tensor softmax(const Tensor& a) {
    check(!a.shape().empty(), "softmax: scalar input");
    int64_t cols = a.shape().back();
    int64_t rows = a.numel() / cols;
    auto av = a.data();
    std::vector<double> out(av.size());
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = av.data() + r * cols;
        double* y = out.data() + r * cols;
        double mx = x[0];
        for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int64_t j = 0; j < cols; ++j) y[j] /= sum;
    }
    auto an = a.node();
    return make_op(a.shape(), std::move(out), {a}, [an, rows, cols](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (int64_t r = 0; r < rows; ++r) {
            const double* g = self.grad.data() + r * cols;
            const double* y = self.value.data() + r * cols;
            double dot = 0.0;
            for (int64_t j = 0; j < cols; ++j) dot += g[j] * y[j];
            double* o = ga.data() + r * cols;
            for (int64_t j = 0; j < cols; ++j) o[j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor mean_sq(const Tensor& a) {
    auto av = a.data();
    double s = 0.0;
    for (double x : av) s += x * x;
    double n = static_cast<double>(av.size());
    auto an = a.node();
    return make_op({1}, {s / n}, {a}, [an, n](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        double g = self.grad[0];
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g * 2.0 * an->value[i] / n;
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check(shape_numel(shape) == a.numel(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    std::vector<double> out(a.data().begin(), a.data().end());
    auto an = a.node();
    return make_op(std::move(shape), std::move(out), {a}, [an](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int64_t col0, int64_t width) {
    check(a.shape().size() == 2, "slice_cols: expected 2-D tensor, got " + shape_str(a.shape()));
    int64_t m = a.shape()[0], n = a.shape()[1];
    check(col0 >= 0 && width > 0 && col0 + width <= n, "slice_cols: range out of bounds");
    std::vector<double> out(static_cast<size_t>(m * width));
    auto av = a.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < width; ++j)
            out[static_cast<size_t>(i * width + j)] = av[static_cast<size_t>(i * n + col0 + j)];
    auto an = a.node();
    return make_op({m, width}, std::move(out), {a}, [an, m, n, col0, width](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < width; ++j)
                ga[static_cast<size_t>(i * n + col0 + j)] += self.grad[static_cast<size_t>(i * width + j)];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat_cols: empty input");
    int64_t m = parts[0].shape().size() == 2 ? parts[0].shape()[0] : -1;
    check(m > 0, "concat_cols: expected 2-D tensors");
    int64_t total = 0;
    for (const auto& p : parts) {
        check(p.shape().size() == 2 && p.shape()[0] == m,
              op_shape_msg("concat_cols", parts[0].shape(), p.shape()));
        total += p.shape()[1];
    }
    std::vector<double> out(static_cast<size_t>(m * total));
    int64_t off = 0;
    for (const auto& p : parts) {
        int64_t w = p.shape()[1];
        auto pv = p.data();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                out[static_cast<size_t>(i * total + off + j)] = pv[static_cast<size_t>(i * w + j)];
        off += w;
    }
    std::vector<detail::TensorImpl*> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    std::vector<int64_t> widths;
    for (const auto& p : parts) widths.push_back(p.shape()[1]);
    return make_op({m, total}, std::move(out), parts,
                   [nodes, widths, m, total](detail::TensorImpl& self) {
                       int64_t off = 0;
                       for (size_t pi = 0; pi < nodes.size(); ++pi) {
                           int64_t w = widths[pi];
                           if (nodes[pi]->requires_grad) {
                               auto& ga = ensure_grad(*nodes[pi]);
                               for (int64_t i = 0; i < m; ++i)
                                   for (int64_t j = 0; j < w; ++j)
                                       ga[static_cast<size_t>(i * w + j)] +=
                                           self.grad[static_cast<size_t>(i * total + off + j)];
                           }
                           off += w;
                       }
                   });
}

Tensor permute_flat(const Tensor& a, const std::vector<int64_t>& src_index, Shape out_shape) {
    check(shape_numel(out_shape) == static_cast<int64_t>(src_index.size()),
          "permute_flat: index length does not match output shape");
    auto av = a.data();
    std::vector<double> out(src_index.size());
    for (size_t i = 0; i < src_index.size(); ++i) {
        check(src_index[i] >= 0 && src_index[i] < a.numel(), "permute_flat: index out of range");
        out[i] = av[static_cast<size_t>(src_index[i])];
    }
    auto an = a.node();
    return make_op(std::move(out_shape), std::move(out), {a}, [an, src_index](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*an);
        for (size_t i = 0; i < src_index.size(); ++i)
            ga[static_cast<size_t>(src_index[i])] += self.grad[i];
    });
}

Tensor nll_from_logits(const Tensor& logits, const std::vector<int>& labels) {
    check(logits.shape().size() == 2, "nll_from_logits: expected [batch, classes], got " + shape_str(logits.shape()));
    int64_t b = logits.shape()[0], k = logits.shape()[1];
    check(static_cast<int64_t>(labels.size()) == b, "nll_from_logits: label count does not match batch");
    auto lv = logits.data();
    double loss = 0.0;
    std::vector<char> clamped(static_cast<size_t>(b), 0);
    for (int64_t r = 0; r < b; ++r) {
        check(labels[static_cast<size_t>(r)] >= 0 && labels[static_cast<size_t>(r)] < k,
              "nll_from_logits: label " + std::to_string(labels[static_cast<size_t>(r)]) + " out of range [0," +
                  std::to_string(k) + ")");
        const double* x = lv.data() + r * k;
        double mx = x[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) sum += std::exp(x[j] - mx);
        double logp = x[labels[static_cast<size_t>(r)]] - mx - std::log(sum);
        if (logp < kLogProbClamp) {
            logp = kLogProbClamp;
            clamped[static_cast<size_t>(r)] = 1;
        }
        loss -= logp;
    }
    loss /= static_cast<double>(b);
    auto ln = logits.node();
    return make_op({1}, {loss}, {logits}, [ln, labels, b, k, clamped = std::move(clamped)](detail::TensorImpl& self) {
        auto& ga = ensure_grad(*ln);
        double g = self.grad[0] / static_cast<double>(b);
        for (int64_t r = 0; r < b; ++r) {
            if (clamped[static_cast<size_t>(r)]) continue;
            const double* x = ln->value.data() + r * k;
            double mx = x[0];
            for (int64_t j = 1; j < k; ++j) mx = std::max(mx, x[j]);
            double sum = 0.0;
            for (int64_t j = 0; j < k; ++j) sum += std::exp(x[j] - mx);
            double* o = ga.data() + r * k;
            for (int64_t j = 0; j < k; ++j) {
                double p = std::exp(x[j] - mx) / sum;
                o[j] += g * (p - (j == labels[static_cast<size_t>(r)] ? 1.0 : 0.0));
            }
        }
    });
}

void backward(const Tensor& loss) {
    check(loss.numel() == 1, "backward: loss must be a scalar, got " + shape_str(loss.shape()));
    check(loss.requires_grad(), "backward: loss does not depend on any tracked tensor");

    // Iterative post-order topological sort over the parent DAG.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorImpl* p = node->parents[next].get();
            ++next;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior node buffers are per-graph; leaves keep accumulating across
    // backward calls until clear_grad().
    for (auto* n : order) {
        if (n->backprop && n != loss.node()) n->grad.clear();
    }
    ensure_grad(*loss.node());
    loss.node()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

Tensor gaussian(RngStream& stream, Shape shape) {
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& x : data) x = stream.next_normal();
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace dfm
