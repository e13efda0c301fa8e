#pragma once

#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sigflow/autodiff.hpp"
#include "sigflow/prior.hpp"

namespace sigflow {

// Additive coupling over a contiguous channel split: the first C/2 channels
// are part 1, the rest part 2. Both subnets are Conv1d -> ReLU -> Conv1d.
struct CouplingBlock {
    Conv1dParams f1, f2;  // F = f2(relu(f1(.)))
    Conv1dParams g1, g2;  // G = g2(relu(g1(.)))
};

struct SqueezeLayer {};
struct HartleyLayer {};
struct ChannelRotate {
    int shift = 1;
};

using Layer = std::variant<SqueezeLayer, CouplingBlock, ChannelRotate, HartleyLayer>;

struct FlowOutput {
    Tensor latent;
    double log_det_jacobian = 0.0;  // identically 0: every layer is volume-preserving
};

struct NamedParam {
    std::string name;
    Tensor* tensor;
};

struct FlowModel {
    std::vector<Layer> layers;
    ClassConditionalGaussian prior;
    std::size_t channels = 0;  // input C
    std::size_t samples = 0;   // input T

    Shape input_shape() const { return {channels, samples}; }
    Shape latent_shape() const;
    std::size_t latent_dim() const { return channels * samples; }
    std::size_t n_classes() const { return prior.n_classes(); }

    // Flow and prior parameters in a fixed, deterministic order.
    std::vector<NamedParam> parameters();
};

Tensor coupling_forward(const CouplingBlock& block, const Tensor& x);
Tensor coupling_inverse(const CouplingBlock& block, const Tensor& y);
Tensor subnet_eval(const Conv1dParams& c1, const Conv1dParams& c2, const Tensor& x);

Tensor squeeze_forward(const Tensor& x);
Tensor squeeze_inverse(const Tensor& x);
Tensor hartley_forward(const Tensor& x);

FlowOutput flow_forward(const FlowModel& model, const Tensor& x);
Tensor flow_inverse(const FlowModel& model, const Tensor& h);

struct ArchitectureConfig {
    std::size_t channels = 0;
    std::size_t samples = 0;
    std::size_t n_classes = 2;
    int n_stages = -1;  // -1: largest n with T divisible by 2^n, capped at 4
    std::size_t kernel_size = 7;
    std::uint64_t init_seed = 0;
};

// n_stages repetitions of [squeeze, coupling, coupling, rotate], then one
// Hartley layer. Second conv of each subnet is zero-initialized so every
// block starts as the identity.
FlowModel build_architecture(const ArchitectureConfig& config);

// Single-file model format: magic "SGFL", version u32, shapes, then float64
// little-endian parameter blobs.
void save_model(const FlowModel& model, const std::string& path);
FlowModel load_model(const std::string& path);

// --- tape-based evaluation for training ---

// Parameter tensors lifted onto a tape as requires_grad leaves.
struct ModelVars {
    std::vector<NamedParam> params;
    std::vector<ad::Var> vars;  // parallel to params

    ad::Var of(const Tensor& t) const;
};

ModelVars lift_parameters(ad::Tape& tape, FlowModel& model);

ad::Var flow_forward_ad(const FlowModel& model, const ModelVars& vars, ad::Var x);
ad::Var flow_inverse_ad(const FlowModel& model, const ModelVars& vars, ad::Var h);

}  // namespace sigflow
