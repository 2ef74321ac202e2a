#pragma once

#include <optional>
#include <vector>

#include "dfm/tensor.hpp"

namespace dfm {

// Finite weighted point set with optional disjoint cluster labels (1..K).
// The substrate for exact marginal-flow and posterior computations.
struct DiscreteDataset {
    int64_t dim = 0;
    std::vector<std::vector<double>> points;  // N x dim
    std::vector<double> weights;              // nonnegative, sums to 1
    std::vector<int> labels;                  // empty, or N entries in 1..K
    int k = 0;                                // 0 when unlabelled

    static DiscreteDataset from_points(std::vector<std::vector<double>> pts,
                                       std::vector<double> weights = {},
                                       std::vector<int> labels = {});

    int64_t size() const { return static_cast<int64_t>(points.size()); }
    void validate() const;
    // Restriction to one cluster, weights renormalized within the cluster.
    DiscreteDataset cluster(int cluster_id) const;
};

// log w_i of the exact posterior over data points given xt at noise level t,
// under p_t(xt|x0) = Normal((1-t) x0, t^2 I). Normalized with log-sum-exp so
// sum_i exp(log w_i) = 1. Requires t in (0, 1].
std::vector<double> log_posterior_weights(const Tensor& xt, double t, const DiscreteDataset& ds);

// sum_i w_i (x0_i - xt) = E[x0|xt] - xt.
Tensor marginal_velocity(const Tensor& xt, double t, const DiscreteDataset& ds);

// p(k|xt) = sum_{i in S_k} w_i, length-K, sums to 1.
std::vector<double> cluster_posterior(const Tensor& xt, double t, const DiscreteDataset& ds);

// Marginal velocity of the restriction to cluster k (1-based).
Tensor per_cluster_velocity(const Tensor& xt, double t, const DiscreteDataset& ds, int cluster_id);

// || sum_k p(k|xt) u^(k) - u || / (1 + ||u||): the mixture-of-flows
// decomposition identity measured as a relative residual.
double decomposition_residual(const Tensor& xt, double t, const DiscreteDataset& ds);

}  // namespace dfm
