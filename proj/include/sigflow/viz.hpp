#pragma once

#include <cstdint>
#include <vector>

#include "sigflow/dataset.hpp"
#include "sigflow/flow.hpp"
#include "sigflow/transport.hpp"

namespace sigflow {

// The class prototype: the prior mean of class y inverted to signal space.
Tensor prototype_invert(const FlowModel& model, std::size_t y);

// Invert the class mean with one latent coordinate swept over `values`;
// results are returned in the order of `values`.
std::vector<Tensor> dimension_sweep(const FlowModel& model, std::size_t y,
                                    std::size_t dim, const std::vector<double>& values);

// Draw signals from the model: one per entry of `labels`.
SignalDataset sample_signals(const FlowModel& model, const std::vector<int>& labels,
                             std::uint64_t seed, double sample_rate_hz);

struct MatchEntry {
    std::size_t real_index = 0;
    std::size_t generated_index = 0;
    double mass = 0.0;
    double distance = 0.0;
};

struct MatchResult {
    SignalDataset generated;
    std::vector<MatchEntry> entries;  // support of the transport plan
    double mean_matched_distance = 0.0;
};

// Transport-plan support between two flattened point sets; the building block
// behind match_generated_real, exposed for direct use.
std::vector<MatchEntry> match_points(const Tensor& real, const Tensor& generated,
                                     Metric metric, double sinkhorn_epsilon = 0.0);

// Sample ratio*n generated signals with classes matching the dataset's label
// frequencies and match them to the real trials by optimal transport.
MatchResult match_generated_real(const FlowModel& model, const SignalDataset& dataset,
                                 std::size_t ratio, std::uint64_t seed,
                                 Metric metric = Metric::Euclidean,
                                 double sinkhorn_epsilon = 0.0);

}  // namespace sigflow
