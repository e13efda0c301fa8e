#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sigflow/rng.hpp"
#include "sigflow/tensor.hpp"

namespace sigflow {

struct SignalDataset {
    Tensor data;  // (n, C, T), microvolts
    std::vector<int> labels;
    double sample_rate_hz = 0.0;
    std::vector<std::string> channel_names;
    std::vector<std::string> class_names;

    std::size_t n_trials() const { return data.rank() == 3 ? data.dim(0) : 0; }
    std::size_t channels() const { return data.rank() == 3 ? data.dim(1) : 0; }
    std::size_t samples() const { return data.rank() == 3 ? data.dim(2) : 0; }
    std::size_t n_classes() const { return class_names.size(); }

    Tensor trial(std::size_t i) const;            // (C, T)
    void set_trial(std::size_t i, const Tensor& t);
    std::vector<std::size_t> class_counts() const;
    void validate() const;
};

// Synthetic EEG-like two-class data: a 10 Hz oscillation with white noise.
// Class 1 ("right_hand") has the oscillation suppressed by `suppression` on
// the first ceil(C/2) channels; class 0 ("rest") has it everywhere.
struct SynthConfig {
    std::size_t n_per_class = 100;
    std::size_t channels = 4;
    std::size_t samples = 512;
    double sample_rate_hz = 250.0;
    double alpha_hz = 10.0;
    double alpha_amplitude = 10.0;  // a_rest, microvolts
    double suppression = 0.2;       // rho in [0, 1)
    double noise_std = 2.0;         // sigma, microvolts
    std::uint64_t seed = 0;

    void validate() const;
};

SignalDataset synth_generate(const SynthConfig& config);

// Appends one all-zero channel named "virtual" when C is odd, so coupling
// channel splits stay even. No-op for even C.
SignalDataset pad_virtual_channel(const SignalDataset& dataset);
SignalDataset strip_virtual_channel(const SignalDataset& dataset);

// Stratified by class, deterministic given seed.
std::pair<SignalDataset, SignalDataset> split_train_valid(const SignalDataset& dataset,
                                                          double fraction,
                                                          std::uint64_t seed);

// Binary format: magic "SGDS", version u32, n/C/T u64 LE, sample rate f64,
// length-prefixed name lists, labels u32, data f64 LE row-major.
void save_dataset(const SignalDataset& dataset, const std::string& path);
SignalDataset load_dataset(const std::string& path);

// (n*C) rows x T columns of data; labels sidecar with one label per trial.
void export_csv(const SignalDataset& dataset, const std::string& data_path,
                const std::string& labels_path);
SignalDataset import_csv(const std::string& data_path, const std::string& labels_path,
                         std::size_t channels, double sample_rate_hz);

// Smallest nonzero gap between sorted distinct sample values; 0 for constant
// data. Used as the default dequantization amplitude.
double estimate_quantization_step(const SignalDataset& dataset);

// x + Uniform[0, amplitude) per element.
Tensor dequantize(const Tensor& x, double amplitude, Rng& rng);

}  // namespace sigflow
