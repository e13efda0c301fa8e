#pragma once

#include "sigflow/autodiff.hpp"
#include "sigflow/rng.hpp"
#include "sigflow/tensor.hpp"

namespace sigflow {

// Diagonal Gaussian per class over the flattened latent space, with learnable
// mean and log standard deviation. Storing log-std keeps the effective std
// positive without constraints.
struct ClassConditionalGaussian {
    Tensor means;     // (n_classes, d)
    Tensor log_stds;  // (n_classes, d)

    static ClassConditionalGaussian init(std::size_t n_classes, std::size_t d);

    std::size_t n_classes() const { return means.dim(0); }
    std::size_t dim() const { return means.dim(1); }

    double log_prob(const Tensor& h, std::size_t y) const;
    double log_prob_marginal(const Tensor& h) const;
    std::vector<double> class_posterior(const Tensor& h) const;
    Tensor sample(std::size_t y, Rng& rng) const;

    void check_class(std::size_t y) const;
};

// log N(h; means[y], exp(log_stds[y])^2) as a tape node; means_v/log_stds_v
// are the lifted parameter leaves.
ad::Var log_prob_ad(ad::Tape& tape, ad::Var means_v, ad::Var log_stds_v,
                    ad::Var h, std::size_t y);

// logsumexp over classes minus log(n_classes).
ad::Var log_prob_marginal_ad(ad::Tape& tape, ad::Var means_v, ad::Var log_stds_v,
                             ad::Var h, std::size_t n_classes);

double logsumexp(const std::vector<double>& v);

}  // namespace sigflow
