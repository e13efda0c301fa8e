#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sigflow/dataset.hpp"
#include "sigflow/flow.hpp"
#include "sigflow/transport.hpp"

namespace sigflow {

enum class Objective { MaxLikelihood, OptimalTransport };

// Diagonal Gaussian over flattened input space, the simple reference density
// used by the prior-comparison regularizer.
struct GaussianBaseline {
    Tensor mean;     // (d)
    Tensor log_std;  // (d)

    double log_prob(const Tensor& x) const;  // accepts (d) or (C, T)
};

GaussianBaseline fit_gaussian_baseline(const SignalDataset& train);

struct PriorRegConfig {
    double penalty_weight = 0.0;
    GaussianBaseline baseline;
};

struct MixtureRegState {
    Tensor per_point_log_stds;  // (n_train)
    Tensor frozen_log_stds;    // (n_train)
};

struct OtConfig {
    std::size_t ratio = 3;  // generated points per training point
    Metric metric = Metric::SquaredEuclidean;
    bool class_conditional = true;  // one plan per class vs one pooled plan
    double sinkhorn_epsilon = 0.0;  // > 0 switches the plan solver to sinkhorn
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 0;
    double dequant_amplitude = -1.0;  // < 0: estimate from the data's quantization step
    std::uint64_t seed = 0;
    Objective objective = Objective::MaxLikelihood;
    std::optional<PriorRegConfig> prior_reg;
    OtConfig ot;
    std::size_t checkpoint_every = 0;  // 0 disables checkpoints
    std::string checkpoint_prefix;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_log_likelihood = 0.0;
    double valid_log_likelihood = 0.0;
    double train_accuracy = 0.0;
    double valid_accuracy = 0.0;
    bool gate_active = false;
    // Measured but deliberately kept out of the written reports so that reruns
    // with the same config and seed produce byte-identical files.
    double wall_time_sec = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> records;
};

void write_report_csv(const TrainReport& report, const std::string& path);
void write_report_jsonl(const TrainReport& report, const std::string& path);

// --- optimizer ---

struct AdamState {
    std::vector<Tensor> m, v;  // parallel to the parameter list
    std::size_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Standard Adam with bias correction. `grads` is parallel to `params`.
void adam_update(std::vector<NamedParam>& params, const std::vector<Tensor>& grads,
                 AdamState& state, double learning_rate);

// --- losses ---

// -(1/B) sum_b [ log p(h_b | y_b) + log_det_b ]; the log-det term is
// identically zero for this volume-preserving architecture.
ad::Var nll_loss(ad::Tape& tape, const FlowModel& model, const ModelVars& vars,
                 const Tensor& batch, const std::vector<int>& labels);

struct ClassifyResult {
    int label = 0;  // argmax posterior, ties broken toward the lower class index
    std::vector<double> posterior;
};

ClassifyResult classify(const FlowModel& model, const Tensor& x);

bool prior_comparison_gate(double ll_flow_train, double ll_flow_valid,
                           double ll_gauss_valid);

// penalty_weight * mean_b (log p_f(x_b) - log p_gauss(x_b))^2; the gaussian
// term is a constant.
ad::Var prior_comparison_penalty(ad::Tape& tape, const FlowModel& model,
                                 const ModelVars& vars, const Tensor& batch,
                                 const PriorRegConfig& reg);

struct MixtureStepResult {
    ad::Var loss;
    std::size_t clamped = 0;  // validation points whose corrected likelihood hit the floor
};

// Swap estimator for the per-datapoint mixture correction: for each validation
// point, corrected likelihood = p_f(v) + (1/N) sum_{i in batch} (updated_i -
// frozen_i), clamped below at 1e-300 before the log. Gradients reach only
// `per_point_log_stds` (a requires_grad leaf holding the full (n_train) array).
MixtureStepResult mixture_minibatch_step(ad::Tape& tape, const FlowModel& model,
                                         const SignalDataset& train,
                                         const std::vector<std::size_t>& batch_indices,
                                         const Tensor& valid_batch,
                                         ad::Var per_point_log_stds,
                                         const Tensor& frozen_log_stds);

// OT generator loss: sample `ratio * n` latents from the class-conditional
// prior, invert them, and take the plan-weighted transport cost against the
// training set. The plan is recomputed each call and treated as a constant;
// gradients flow through the generated points into flow and prior parameters.
ad::Var ot_generator_loss(ad::Tape& tape, const FlowModel& model, const ModelVars& vars,
                          const SignalDataset& train, Rng& rng, const OtConfig& config);

// --- training loops ---

TrainReport train_max_likelihood(FlowModel& model, const SignalDataset& train,
                                 const SignalDataset& valid, const TrainConfig& config);

TrainReport train_ot(FlowModel& model, const SignalDataset& train,
                     const SignalDataset& valid, const TrainConfig& config);

// --- evaluation helpers ---

// Mean log p(x) (marginal over classes) across the dataset.
double mean_log_likelihood(const FlowModel& model, const SignalDataset& dataset);
double accuracy(const FlowModel& model, const SignalDataset& dataset);

}  // namespace sigflow
