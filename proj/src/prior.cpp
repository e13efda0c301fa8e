#include "sigflow/prior.hpp"

#include <algorithm>
#include <cmath>

namespace sigflow {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

ClassConditionalGaussian ClassConditionalGaussian::init(std::size_t n_classes,
                                                        std::size_t d) {
    if (n_classes < 1) throw ShapeError("prior: n_classes must be >= 1");
    ClassConditionalGaussian p;
    p.means = Tensor({n_classes, d});
    p.log_stds = Tensor({n_classes, d});
    return p;
}

void ClassConditionalGaussian::check_class(std::size_t y) const {
    if (y >= n_classes()) {
        throw DataError("prior: class index " + std::to_string(y) +
                        " out of range [0, " + std::to_string(n_classes()) + ")");
    }
}

double ClassConditionalGaussian::log_prob(const Tensor& h, std::size_t y) const {
    check_class(y);
    if (h.size() != dim()) {
        throw ShapeError("prior: latent size " + std::to_string(h.size()) +
                         " does not match prior dimension " + std::to_string(dim()));
    }
    double lp = 0.0;
    for (std::size_t j = 0; j < dim(); ++j) {
        const double ls = log_stds(y, j);
        const double z = (h[j] - means(y, j)) * std::exp(-ls);
        lp += -ls - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    return lp;
}

double logsumexp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

double ClassConditionalGaussian::log_prob_marginal(const Tensor& h) const {
    std::vector<double> lps(n_classes());
    for (std::size_t y = 0; y < n_classes(); ++y) lps[y] = log_prob(h, y);
    return logsumexp(lps) - std::log(static_cast<double>(n_classes()));
}

std::vector<double> ClassConditionalGaussian::class_posterior(const Tensor& h) const {
    std::vector<double> lps(n_classes());
    for (std::size_t y = 0; y < n_classes(); ++y) lps[y] = log_prob(h, y);
    const double lse = logsumexp(lps);
    std::vector<double> post(n_classes());
    for (std::size_t y = 0; y < n_classes(); ++y) post[y] = std::exp(lps[y] - lse);
    return post;
}

Tensor ClassConditionalGaussian::sample(std::size_t y, Rng& rng) const {
    check_class(y);
    Tensor h({dim()});
    for (std::size_t j = 0; j < dim(); ++j) {
        h[j] = means(y, j) + std::exp(log_stds(y, j)) * rng.gaussian();
    }
    return h;
}

ad::Var log_prob_ad(ad::Tape& tape, ad::Var means_v, ad::Var log_stds_v,
                    ad::Var h, std::size_t y) {
    const std::size_t d = h.value().size();
    ad::Var mu = ad::row(means_v, y);
    ad::Var ls = ad::row(log_stds_v, y);
    ad::Var z = ad::mul(ad::sub(h, mu), ad::vexp(ad::neg(ls)));
    ad::Var quad = ad::scale(ad::sum(ad::mul(z, z)), -0.5);
    ad::Var lsum = ad::neg(ad::sum(ls));
    ad::Var lp = ad::add(ad::add(lsum, quad),
                         ad::constant(tape, Tensor::scalar(-0.5 * kLog2Pi *
                                                           static_cast<double>(d))));
    return lp;
}

ad::Var log_prob_marginal_ad(ad::Tape& tape, ad::Var means_v, ad::Var log_stds_v,
                             ad::Var h, std::size_t n_classes) {
    std::vector<ad::Var> lps;
    lps.reserve(n_classes);
    std::size_t argmax = 0;
    for (std::size_t y = 0; y < n_classes; ++y) {
        lps.push_back(log_prob_ad(tape, means_v, log_stds_v, h, y));
        if (lps[y].value()[0] > lps[argmax].value()[0]) argmax = y;
    }
    // logsumexp shifted by the (constant) max for stability; the shift value is
    // treated as data so gradients still flow through every class term.
    const double shift = lps[argmax].value()[0];
    ad::Var acc = ad::vexp(ad::add_scalar(lps[0], -shift));
    for (std::size_t y = 1; y < n_classes; ++y) {
        acc = ad::add(acc, ad::vexp(ad::add_scalar(lps[y], -shift)));
    }
    return ad::add_scalar(ad::vlog(acc),
                          shift - std::log(static_cast<double>(n_classes)));
}

}  // namespace sigflow
