#include "dfm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dfm {

namespace {

constexpr double kWeightSumTol = 1e-12;

void check_query(const Tensor& xt, double t, const DiscreteDataset& ds) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw ContractError("oracle: t = " + std::to_string(t) +
                            " outside (0, 1]; the conditional density degenerates at t = 0");
    }
    if (xt.numel() != ds.dim) {
        throw ContractError("oracle: query dimension " + std::to_string(xt.numel()) +
                            " != dataset dimension " + std::to_string(ds.dim));
    }
}

}  // namespace

DiscreteDataset DiscreteDataset::from_points(std::vector<std::vector<double>> pts,
                                             std::vector<double> weights, std::vector<int> labels) {
    DiscreteDataset ds;
    if (pts.empty()) throw ContractError("DiscreteDataset: empty point set");
    ds.dim = static_cast<int64_t>(pts[0].size());
    ds.points = std::move(pts);
    if (weights.empty()) {
        weights.assign(ds.points.size(), 1.0 / static_cast<double>(ds.points.size()));
    }
    ds.weights = std::move(weights);
    ds.labels = std::move(labels);
    if (!ds.labels.empty()) {
        ds.k = *std::max_element(ds.labels.begin(), ds.labels.end());
    }
    ds.validate();
    return ds;
}

void DiscreteDataset::validate() const {
    const size_t n = points.size();
    if (n == 0) throw ContractError("DiscreteDataset: empty point set");
    if (weights.size() != n) throw ContractError("DiscreteDataset: weight count != point count");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ContractError("DiscreteDataset: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTol) {
        throw ContractError("DiscreteDataset: weights sum to " + std::to_string(sum) + ", expected 1");
    }
    for (const auto& p : points) {
        if (static_cast<int64_t>(p.size()) != dim) {
            throw ContractError("DiscreteDataset: ragged point dimensions");
        }
    }
    if (!labels.empty()) {
        if (labels.size() != n) throw ContractError("DiscreteDataset: label count != point count");
        std::vector<int64_t> counts(static_cast<size_t>(k), 0);
        for (int l : labels) {
            if (l < 1 || l > k) {
                throw ContractError("DiscreteDataset: label " + std::to_string(l) + " outside 1.." +
                                    std::to_string(k));
            }
            ++counts[static_cast<size_t>(l - 1)];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] == 0) {
                throw ContractError("DiscreteDataset: cluster " + std::to_string(c + 1) + " is empty");
            }
        }
    }
}

DiscreteDataset DiscreteDataset::cluster(int cluster_id) const {
    if (labels.empty()) throw ContractError("DiscreteDataset::cluster: dataset has no labels");
    if (cluster_id < 1 || cluster_id > k) {
        throw ContractError("DiscreteDataset::cluster: cluster " + std::to_string(cluster_id) +
                            " outside 1.." + std::to_string(k));
    }
    size_t members = 0;
    for (int l : labels) members += (l == cluster_id);
    if (members == points.size()) {
        DiscreteDataset whole = *this;
        whole.labels.clear();
        whole.k = 0;
        return whole;
    }
    DiscreteDataset out;
    out.dim = dim;
    double mass = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
        if (labels[i] == cluster_id) mass += weights[i];
    }
    if (mass <= 0.0) throw ContractError("DiscreteDataset::cluster: cluster has zero mass");
    for (size_t i = 0; i < points.size(); ++i) {
        if (labels[i] == cluster_id) {
            out.points.push_back(points[i]);
            out.weights.push_back(weights[i] / mass);
        }
    }
    return out;
}

std::vector<double> log_posterior_weights(const Tensor& xt, double t, const DiscreteDataset& ds) {
    check_query(xt, t, ds);
    const auto x = xt.data();
    const double a = 1.0 - t;
    const double inv2t2 = 1.0 / (2.0 * t * t);
    const size_t n = ds.points.size();
    std::vector<double> logw(n);
    for (size_t i = 0; i < n; ++i) {
        double d2 = 0.0;
        const auto& p = ds.points[i];
        for (int64_t j = 0; j < ds.dim; ++j) {
            double d = x[static_cast<size_t>(j)] - a * p[static_cast<size_t>(j)];
            d2 += d * d;
        }
        double lq = ds.weights[i] > 0.0 ? std::log(ds.weights[i]) : -std::numeric_limits<double>::infinity();
        logw[i] = -d2 * inv2t2 + lq;
    }
    double mx = *std::max_element(logw.begin(), logw.end());
    double sum = 0.0;
    for (double v : logw) sum += std::exp(v - mx);
    double lse = mx + std::log(sum);
    for (double& v : logw) v -= lse;
    return logw;
}

Tensor marginal_velocity(const Tensor& xt, double t, const DiscreteDataset& ds) {
    auto logw = log_posterior_weights(xt, t, ds);
    const auto x = xt.data();
    std::vector<double> v(static_cast<size_t>(ds.dim), 0.0);
    for (size_t i = 0; i < ds.points.size(); ++i) {
        double w = std::exp(logw[i]);
        const auto& p = ds.points[i];
        for (int64_t j = 0; j < ds.dim; ++j) {
            v[static_cast<size_t>(j)] += w * (p[static_cast<size_t>(j)] - x[static_cast<size_t>(j)]);
        }
    }
    return Tensor::from_data(xt.shape(), std::move(v));
}

std::vector<double> cluster_posterior(const Tensor& xt, double t, const DiscreteDataset& ds) {
    if (ds.labels.empty()) {
        throw ContractError("cluster_posterior: dataset has no cluster labels");
    }
    auto logw = log_posterior_weights(xt, t, ds);
    std::vector<double> post(static_cast<size_t>(ds.k), 0.0);
    for (size_t i = 0; i < logw.size(); ++i) {
        post[static_cast<size_t>(ds.labels[i] - 1)] += std::exp(logw[i]);
    }
    // remove last-ulp drift from the exp/sum round trip
    double sum = 0.0;
    for (double p : post) sum += p;
    for (double& p : post) p = std::clamp(p / sum, 0.0, 1.0);
    return post;
}

Tensor per_cluster_velocity(const Tensor& xt, double t, const DiscreteDataset& ds, int cluster_id) {
    return marginal_velocity(xt, t, ds.cluster(cluster_id));
}

double decomposition_residual(const Tensor& xt, double t, const DiscreteDataset& ds) {
    if (ds.labels.empty()) {
        throw ContractError("decomposition_residual: dataset has no cluster labels");
    }
    Tensor u = marginal_velocity(xt, t, ds);
    auto post = cluster_posterior(xt, t, ds);
    std::vector<double> fused(static_cast<size_t>(ds.dim), 0.0);
    for (int c = 1; c <= ds.k; ++c) {
        Tensor uc = per_cluster_velocity(xt, t, ds, c);
        auto ucv = uc.data();
        double p = post[static_cast<size_t>(c - 1)];
        for (int64_t j = 0; j < ds.dim; ++j) fused[static_cast<size_t>(j)] += p * ucv[static_cast<size_t>(j)];
    }
    double num = 0.0, den = 0.0;
    auto uv = u.data();
    for (int64_t j = 0; j < ds.dim; ++j) {
        double d = fused[static_cast<size_t>(j)] - uv[static_cast<size_t>(j)];
        num += d * d;
        den += uv[static_cast<size_t>(j)] * uv[static_cast<size_t>(j)];
    }
    return std::sqrt(num) / (1.0 + std::sqrt(den));
}

}  // namespace dfm
