#include "sigflow/viz.hpp"

#include <algorithm>
#include <cmath>

namespace sigflow {

namespace {

Tensor class_mean_latent(const FlowModel& model, std::size_t y) {
    model.prior.check_class(y);
    Tensor h(model.latent_shape());
    for (std::size_t j = 0; j < h.size(); ++j) h[j] = model.prior.means(y, j);
    return h;
}

}  // namespace

Tensor prototype_invert(const FlowModel& model, std::size_t y) {
    return flow_inverse(model, class_mean_latent(model, y))
        .reshaped({model.channels, model.samples});
}

std::vector<Tensor> dimension_sweep(const FlowModel& model, std::size_t y,
                                    std::size_t dim, const std::vector<double>& values) {
    if (dim >= model.latent_dim())
        throw ShapeError("sweep dimension " + std::to_string(dim) +
                         " out of range [0, " + std::to_string(model.latent_dim()) + ")");
    std::vector<Tensor> out;
    out.reserve(values.size());
    Tensor base = class_mean_latent(model, y);
    for (double v : values) {
        Tensor h = base;
        h[dim] = v;
        out.push_back(flow_inverse(model, h).reshaped({model.channels, model.samples}));
    }
    return out;
}

SignalDataset sample_signals(const FlowModel& model, const std::vector<int>& labels,
                             std::uint64_t seed, double sample_rate_hz) {
    SignalDataset out;
    out.sample_rate_hz = sample_rate_hz;
    for (std::size_t c = 0; c < model.channels; ++c)
        out.channel_names.push_back("ch" + std::to_string(c));
    for (std::size_t y = 0; y < model.n_classes(); ++y)
        out.class_names.push_back("class" + std::to_string(y));
    out.labels = labels;
    out.data = Tensor({labels.size(), model.channels, model.samples});
    Rng rng(seed);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw DataError("negative class label");
        const auto y = static_cast<std::size_t>(labels[i]);
        Tensor h = model.prior.sample(y, rng).reshaped(model.latent_shape());
        out.set_trial(i, flow_inverse(model, h).reshaped({model.channels, model.samples}));
    }
    return out;
}

std::vector<MatchEntry> match_points(const Tensor& real, const Tensor& generated,
                                     Metric metric, double sinkhorn_epsilon) {
    DiscreteDistribution p = DiscreteDistribution::uniform(real);
    DiscreteDistribution q = DiscreteDistribution::uniform(generated);
    TransportPlan plan = sinkhorn_epsilon > 0.0
                             ? sinkhorn(p, q, metric, sinkhorn_epsilon)
                             : exact_ot(p, q, metric);
    const Tensor dist = cost_matrix(real, generated, metric);
    std::vector<MatchEntry> entries;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            if (plan.coupling(i, j) > 1e-15)
                entries.push_back({i, j, plan.coupling(i, j), dist(i, j)});
    return entries;
}

MatchResult match_generated_real(const FlowModel& model, const SignalDataset& dataset,
                                 std::size_t ratio, std::uint64_t seed, Metric metric,
                                 double sinkhorn_epsilon) {
    dataset.validate();
    const std::size_t n = dataset.n_trials();
    if (n == 0) throw DataError("matching needs a nonempty dataset");
    if (ratio == 0) throw DataError("ratio must be at least 1");
    const std::size_t d = dataset.channels() * dataset.samples();

    // generated classes mirror the label frequencies exactly
    std::vector<int> gen_labels;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < ratio; ++r) gen_labels.push_back(dataset.labels[i]);
    MatchResult result;
    result.generated = sample_signals(model, gen_labels, seed, dataset.sample_rate_hz);

    Tensor real({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x = dataset.trial(i).reshaped({d});
        std::copy_n(x.data(), d, real.data() + i * d);
    }
    Tensor gen({gen_labels.size(), d});
    for (std::size_t j = 0; j < gen_labels.size(); ++j) {
        Tensor x = result.generated.trial(j).reshaped({d});
        std::copy_n(x.data(), d, gen.data() + j * d);
    }
    result.entries = match_points(real, gen, metric, sinkhorn_epsilon);
    double total = 0.0;
    for (const auto& e : result.entries) total += e.mass * e.distance;
    result.mean_matched_distance = total;
    return result;
}

}  // namespace sigflow
