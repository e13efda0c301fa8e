#pragma once

#include <cstdint>
#include <vector>

#include "sigflow/tensor.hpp"

namespace sigflow {

enum class Metric { Euclidean, SquaredEuclidean };

struct DiscreteDistribution {
    Tensor points;                 // (n, d)
    std::vector<double> weights;   // nonnegative, sums to 1

    static DiscreteDistribution uniform(Tensor points);
    std::size_t size() const { return points.dim(0); }
    std::size_t dim() const { return points.dim(1); }
    void validate() const;
};

struct TransportPlan {
    Tensor coupling;  // (n, m), nonnegative, marginals = source/target weights
    double cost = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

// dist[i][j] = ||p_i - q_j||_2 (or its square)
Tensor cost_matrix(const Tensor& p_points, const Tensor& q_points, Metric metric);

// Exact optimal transport. Uniform instances where one side's size divides the
// other are solved as an assignment problem on replicated points (Hungarian);
// everything else goes through a transportation network simplex.
TransportPlan exact_ot(const DiscreteDistribution& p, const DiscreteDistribution& q,
                       Metric metric, std::size_t max_entries = 1000000);

// Entropic OT via log-domain alternating scaling with epsilon-scaling warm
// starts. The returned plan is rounded so its marginals match p and q exactly.
TransportPlan sinkhorn(const DiscreteDistribution& p, const DiscreteDistribution& q,
                       Metric metric, double epsilon, std::size_t max_iters = 20000,
                       double tol = 1e-9);

// Minimum-cost perfect matching on a square cost matrix (Jonker-Volgenant
// shortest augmenting path). Returns assignment[i] = column of row i.
std::vector<std::size_t> solve_assignment(const Tensor& cost);

// Exact solver for general (small) transportation instances.
TransportPlan transport_simplex(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const Tensor& cost);

double plan_cost(const Tensor& coupling, const Tensor& dist);

}  // namespace sigflow
