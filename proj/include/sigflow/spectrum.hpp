#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sigflow/tensor.hpp"

namespace sigflow {

struct Spectrum {
    std::vector<double> freqs_hz;  // ascending, 0 .. Nyquist
    std::vector<double> power;     // one-sided density, per Hz
    std::size_t segment = 0;
    double overlap = 0.0;
    std::string taper = "hann";

    std::size_t peak_bin() const;
    // Integrated power over [lo_hz, hi_hz] (trapezoid-free bin sum times bin width).
    double band_power(double lo_hz, double hi_hz) const;
};

// Welch's method: Hann-tapered overlapping segments, averaged periodograms,
// one-sided power spectral density.
Spectrum welch_spectrum(const Tensor& signal, double sample_rate_hz, std::size_t segment,
                        double overlap = 0.5);

// Mean Welch PSD over every (trial, channel) row of a (n, C, T) dataset tensor
// restricted to the given channel.
Spectrum mean_spectrum(const Tensor& data, std::size_t channel, double sample_rate_hz,
                       std::size_t segment, double overlap = 0.5);

}  // namespace sigflow
