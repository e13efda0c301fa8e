#include "sigflow/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sigflow {

std::size_t Spectrum::peak_bin() const {
    return static_cast<std::size_t>(
        std::max_element(power.begin(), power.end()) - power.begin());
}

double Spectrum::band_power(double lo_hz, double hi_hz) const {
    if (freqs_hz.size() < 2) return 0.0;
    const double df = freqs_hz[1] - freqs_hz[0];
    double total = 0.0;
    for (std::size_t k = 0; k < freqs_hz.size(); ++k)
        if (freqs_hz[k] >= lo_hz && freqs_hz[k] <= hi_hz) total += power[k] * df;
    return total;
}

Spectrum welch_spectrum(const Tensor& signal, double sample_rate_hz, std::size_t segment,
                        double overlap) {
    if (signal.rank() != 1)
        throw ShapeError("welch_spectrum expects a 1-D signal, got " +
                         shape_str(signal.shape()));
    const std::size_t T = signal.dim(0);
    if (segment == 0 || segment > T)
        throw DataError("segment length " + std::to_string(segment) +
                        " must lie in [1, T=" + std::to_string(T) + "]");
    if (overlap < 0.0 || overlap >= 1.0)
        throw DataError("overlap fraction must lie in [0, 1)");
    if (sample_rate_hz <= 0.0) throw DataError("sample rate must be positive");

    const std::size_t L = segment;
    const std::size_t hop =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround((1.0 - overlap) * static_cast<double>(L))));

    // periodic Hann taper
    std::vector<double> w(L);
    double wss = 0.0;  // sum of squared window, normalizes to a density
    for (std::size_t n = 0; n < L; ++n) {
        w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                     static_cast<double>(L)));
        wss += w[n] * w[n];
    }

    const std::size_t n_bins = L / 2 + 1;
    Spectrum out;
    out.segment = L;
    out.overlap = overlap;
    out.freqs_hz.resize(n_bins);
    out.power.assign(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k)
        out.freqs_hz[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(L);

    std::size_t n_segments = 0;
    std::vector<double> tapered(L);
    for (std::size_t start = 0; start + L <= T; start += hop) {
        for (std::size_t n = 0; n < L; ++n) tapered[n] = w[n] * signal[start + n];
        for (std::size_t k = 0; k < n_bins; ++k) {
            double re = 0.0, im = 0.0;
            for (std::size_t n = 0; n < L; ++n) {
                const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                                   static_cast<double>(n) / static_cast<double>(L);
                re += tapered[n] * std::cos(ang);
                im += tapered[n] * std::sin(ang);
            }
            double p = (re * re + im * im) / (sample_rate_hz * wss);
            const bool interior = k > 0 && !(L % 2 == 0 && k == n_bins - 1);
            if (interior) p *= 2.0;  // one-sided: fold the negative frequencies in
            out.power[k] += p;
        }
        ++n_segments;
    }
    for (double& p : out.power) p /= static_cast<double>(n_segments);
    return out;
}

Spectrum mean_spectrum(const Tensor& data, std::size_t channel, double sample_rate_hz,
                       std::size_t segment, double overlap) {
    if (data.rank() != 3)
        throw ShapeError("mean_spectrum expects (n, C, T) data, got " +
                         shape_str(data.shape()));
    const std::size_t n = data.dim(0), C = data.dim(1), T = data.dim(2);
    if (channel >= C) throw ShapeError("channel index out of range");
    if (n == 0) throw DataError("mean_spectrum needs at least one trial");
    Spectrum acc;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor row({T});
        for (std::size_t t = 0; t < T; ++t) row[t] = data(i, channel, t);
        Spectrum s = welch_spectrum(row, sample_rate_hz, segment, overlap);
        if (i == 0) {
            acc = std::move(s);
        } else {
            for (std::size_t k = 0; k < acc.power.size(); ++k) acc.power[k] += s.power[k];
        }
    }
    for (double& p : acc.power) p /= static_cast<double>(n);
    return acc;
}

}  // namespace sigflow
