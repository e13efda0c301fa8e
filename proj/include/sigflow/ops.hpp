#pragma once

#include "sigflow/tensor.hpp"

namespace sigflow {

// 1-D convolution with "same" zero padding. Kernel length must be odd so the
// padding is symmetric and the output time axis matches the input.
struct Conv1dParams {
    Tensor kernels;  // (C_out, C_in, K)
    Tensor bias;     // (C_out)

    std::size_t out_channels() const { return kernels.dim(0); }
    std::size_t in_channels() const { return kernels.dim(1); }
    std::size_t kernel_size() const { return kernels.dim(2); }
};

// out[o,t] = bias[o] + sum_{i,k} kernels[o,i,k] * x[i, t + k - (K-1)/2],
// x treated as zero outside [0, T).
Tensor conv1d(const Tensor& x, const Conv1dParams& p);

// Adjoints of conv1d, used by the tape.
Tensor conv1d_grad_input(const Tensor& grad_out, const Conv1dParams& p);
Tensor conv1d_grad_kernels(const Tensor& grad_out, const Tensor& x, std::size_t kernel_size);
Tensor conv1d_grad_bias(const Tensor& grad_out);

Tensor relu(const Tensor& x);

// Even/odd time interleave: out[2c, t] = x[c, 2t], out[2c+1, t] = x[c, 2t+1].
// Pure permutation, (C, T) -> (2C, T/2); T must be even.
Tensor squeeze2(const Tensor& x);
Tensor unsqueeze2(const Tensor& x);

// out[c] = x[(c + shift) mod C]
Tensor rotate_channels(const Tensor& x, int shift);

// Orthonormal discrete Hartley transform applied per channel of a (C, T)
// tensor: H(x)_k = (1/sqrt(T)) sum_n x_n (cos(2*pi*k*n/T) + sin(2*pi*k*n/T)).
// Symmetric and involutory, so it is its own inverse and its own adjoint.
Tensor hartley(const Tensor& x);

}  // namespace sigflow
