#pragma once

// Brute-force optimal transport oracles for small uniform instances.
// Independent of the solvers: plain enumeration only.

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "sigflow/tensor.hpp"

namespace ot_oracle {

// n = m, uniform weights: minimum over all n! permutations of mean distance.
inline double permutation_min(const sigflow::Tensor& dist) {
    const std::size_t n = dist.dim(0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += dist(i, perm[i]);
        best = std::min(best, c / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

namespace detail {
inline void split_rec(const sigflow::Tensor& dist, std::size_t j, std::size_t k,
                      std::vector<std::size_t>& cap, double acc, double& best) {
    const std::size_t n = dist.dim(0), m = dist.dim(1);
    if (j == m) {
        best = std::min(best, acc);
        return;
    }
    if (acc >= best) return;
    for (std::size_t i = 0; i < n; ++i) {
        if (cap[i] == 0) continue;
        --cap[i];
        split_rec(dist, j + 1, k, cap, acc + dist(i, j), best);
        ++cap[i];
    }
}
}  // namespace detail

// Uniform P (n) vs uniform Q (m = k*n): each Q point is wholly assigned to one
// P point, each P point takes exactly k of them. Returns total weighted cost.
inline double splitting_min(const sigflow::Tensor& dist) {
    const std::size_t n = dist.dim(0), m = dist.dim(1);
    const std::size_t k = m / n;
    std::vector<std::size_t> cap(n, k);
    double best = std::numeric_limits<double>::infinity();
    detail::split_rec(dist, 0, k, cap, 0.0, best);
    return best / static_cast<double>(m);
}

}  // namespace ot_oracle
