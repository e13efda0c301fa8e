#include "sigflow/ops.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace sigflow {

namespace {

void check_conv_shapes(const Tensor& x, const Conv1dParams& p) {
    if (x.rank() != 2) {
        throw ShapeError("conv1d: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    if (p.kernels.rank() != 3) {
        throw ShapeError("conv1d: kernels must be rank 3 (C_out, C_in, K), got " +
                         shape_str(p.kernels.shape()));
    }
    if (p.bias.rank() != 1 || p.bias.dim(0) != p.out_channels()) {
        throw ShapeError("conv1d: bias dimension " + shape_str(p.bias.shape()) +
                         " does not match C_out=" + std::to_string(p.out_channels()));
    }
    if (x.dim(0) != p.in_channels()) {
        throw ShapeError("conv1d: input channel dimension " + std::to_string(x.dim(0)) +
                         " does not match kernel C_in=" + std::to_string(p.in_channels()));
    }
    const std::size_t K = p.kernel_size();
    const std::size_t T = x.dim(1);
    if (K % 2 == 0) {
        throw ShapeError("conv1d: kernel size K=" + std::to_string(K) +
                         " must be odd for symmetric same-padding");
    }
    if (K > 2 * T - 1) {
        throw ShapeError("conv1d: kernel size K=" + std::to_string(K) +
                         " exceeds 2T-1 for T=" + std::to_string(T));
    }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Conv1dParams& p) {
    check_conv_shapes(x, p);
    const std::size_t C_out = p.out_channels();
    const std::size_t C_in = p.in_channels();
    const std::size_t K = p.kernel_size();
    const std::size_t T = x.dim(1);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>((K - 1) / 2);

    Tensor out({C_out, T});
    for (std::size_t o = 0; o < C_out; ++o) {
        const double b = p.bias[o];
        for (std::size_t t = 0; t < T; ++t) out(o, t) = b;
        for (std::size_t i = 0; i < C_in; ++i) {
            const double* xi = x.data() + i * T;
            for (std::size_t k = 0; k < K; ++k) {
                const double w = p.kernels(o, i, k);
                if (w == 0.0) continue;
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - off;
                const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t t1 = shift > 0 ? T - static_cast<std::size_t>(shift) : T;
                double* oo = out.data() + o * T;
                for (std::size_t t = t0; t < t1; ++t) {
                    oo[t] += w * xi[t + shift];
                }
            }
        }
    }
    return out;
}

Tensor conv1d_grad_input(const Tensor& grad_out, const Conv1dParams& p) {
    const std::size_t C_out = p.out_channels();
    const std::size_t C_in = p.in_channels();
    const std::size_t K = p.kernel_size();
    const std::size_t T = grad_out.dim(1);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>((K - 1) / 2);

    // d x[i,s] = sum_{o,k} kernels[o,i,k] * g[o, s - k + off]
    Tensor gx({C_in, T});
    for (std::size_t o = 0; o < C_out; ++o) {
        const double* go = grad_out.data() + o * T;
        for (std::size_t i = 0; i < C_in; ++i) {
            double* gi = gx.data() + i * T;
            for (std::size_t k = 0; k < K; ++k) {
                const double w = p.kernels(o, i, k);
                if (w == 0.0) continue;
                const std::ptrdiff_t shift = off - static_cast<std::ptrdiff_t>(k);
                const std::size_t s0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t s1 = shift > 0 ? T - static_cast<std::size_t>(shift) : T;
                for (std::size_t s = s0; s < s1; ++s) {
                    gi[s] += w * go[s + shift];
                }
            }
        }
    }
    return gx;
}

Tensor conv1d_grad_kernels(const Tensor& grad_out, const Tensor& x, std::size_t kernel_size) {
    const std::size_t C_out = grad_out.dim(0);
    const std::size_t C_in = x.dim(0);
    const std::size_t K = kernel_size;
    const std::size_t T = x.dim(1);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>((K - 1) / 2);

    // d W[o,i,k] = sum_t g[o,t] * x[i, t + k - off]
    Tensor gw({C_out, C_in, K});
    for (std::size_t o = 0; o < C_out; ++o) {
        const double* go = grad_out.data() + o * T;
        for (std::size_t i = 0; i < C_in; ++i) {
            const double* xi = x.data() + i * T;
            for (std::size_t k = 0; k < K; ++k) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - off;
                const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t t1 = shift > 0 ? T - static_cast<std::size_t>(shift) : T;
                double acc = 0.0;
                for (std::size_t t = t0; t < t1; ++t) {
                    acc += go[t] * xi[t + shift];
                }
                gw(o, i, k) = acc;
            }
        }
    }
    return gw;
}

Tensor conv1d_grad_bias(const Tensor& grad_out) {
    const std::size_t C_out = grad_out.dim(0);
    const std::size_t T = grad_out.dim(1);
    Tensor gb({C_out});
    for (std::size_t o = 0; o < C_out; ++o) {
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc += grad_out(o, t);
        gb[o] = acc;
    }
    return gb;
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

Tensor squeeze2(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("squeeze: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0);
    const std::size_t T = x.dim(1);
    if (T % 2 != 0) {
        throw ShapeError("squeeze: time length T=" + std::to_string(T) +
                         " must be even");
    }
    Tensor out({2 * C, T / 2});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T / 2; ++t) {
            out(2 * c, t) = x(c, 2 * t);
            out(2 * c + 1, t) = x(c, 2 * t + 1);
        }
    }
    return out;
}

Tensor unsqueeze2(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("unsqueeze: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    const std::size_t C2 = x.dim(0);
    const std::size_t Th = x.dim(1);
    if (C2 % 2 != 0) {
        throw ShapeError("unsqueeze: channel count C=" + std::to_string(C2) +
                         " must be even");
    }
    Tensor out({C2 / 2, 2 * Th});
    for (std::size_t c = 0; c < C2 / 2; ++c) {
        for (std::size_t t = 0; t < Th; ++t) {
            out(c, 2 * t) = x(2 * c, t);
            out(c, 2 * t + 1) = x(2 * c + 1, t);
        }
    }
    return out;
}

Tensor rotate_channels(const Tensor& x, int shift) {
    if (x.rank() != 2) {
        throw ShapeError("rotate_channels: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0);
    const std::size_t T = x.dim(1);
    const std::size_t s =
        static_cast<std::size_t>(((shift % static_cast<int>(C)) + static_cast<int>(C)) %
                                 static_cast<int>(C));
    Tensor out({C, T});
    for (std::size_t c = 0; c < C; ++c) {
        const std::size_t src = (c + s) % C;
        for (std::size_t t = 0; t < T; ++t) out(c, t) = x(src, t);
    }
    return out;
}

namespace {

// cas table for a given length: table[k*T + n] = (cos + sin)(2*pi*k*n/T) / sqrt(T)
const std::vector<double>& hartley_table(std::size_t T) {
    static std::mutex mu;
    static std::map<std::size_t, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(T);
    if (it != cache.end()) return it->second;
    std::vector<double> table(T * T);
    const double norm = 1.0 / std::sqrt(static_cast<double>(T));
    const double w = 2.0 * M_PI / static_cast<double>(T);
    for (std::size_t k = 0; k < T; ++k) {
        for (std::size_t n = 0; n < T; ++n) {
            const double a = w * static_cast<double>((k * n) % T);
            table[k * T + n] = (std::cos(a) + std::sin(a)) * norm;
        }
    }
    return cache.emplace(T, std::move(table)).first->second;
}

}  // namespace

Tensor hartley(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("hartley: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0);
    const std::size_t T = x.dim(1);
    const std::vector<double>& table = hartley_table(T);
    Tensor out({C, T});
    for (std::size_t c = 0; c < C; ++c) {
        const double* xc = x.data() + c * T;
        double* oc = out.data() + c * T;
        for (std::size_t k = 0; k < T; ++k) {
            const double* row = table.data() + k * T;
            double acc = 0.0;
            for (std::size_t n = 0; n < T; ++n) acc += row[n] * xc[n];
            oc[k] = acc;
        }
    }
    return out;
}

}  // namespace sigflow
