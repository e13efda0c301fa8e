#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code and
// is independent of the tape: it only re-evaluates the scalar function.

#include <cmath>
#include <functional>

#include "sigflow/tensor.hpp"

namespace fd {

// d(loss)/d(param[i]) via central differences at step h.
inline sigflow::Tensor gradient(const std::function<double(const sigflow::Tensor&)>& loss,
                                sigflow::Tensor param, double h = 1e-5) {
    sigflow::Tensor g(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double orig = param[i];
        param[i] = orig + h;
        const double up = loss(param);
        param[i] = orig - h;
        const double down = loss(param);
        param[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// max_i |a_i - b_i| / max(1e-8, |a_i|, |b_i|)
inline double max_rel_err(const sigflow::Tensor& a, const sigflow::Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1e-8, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace fd
