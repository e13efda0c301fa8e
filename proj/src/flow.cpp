#include "sigflow/flow.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sigflow/rng.hpp"

namespace sigflow {

namespace {

void check_even_channels(const Tensor& x) {
    if (x.rank() != 2) {
        throw ShapeError("coupling: input must be rank 2 (C, T), got " +
                         shape_str(x.shape()));
    }
    if (x.dim(0) % 2 != 0) {
        throw ShapeError("coupling: channel count C=" + std::to_string(x.dim(0)) +
                         " must be even");
    }
}

Tensor half(const Tensor& x, bool first) {
    const std::size_t C = x.dim(0), T = x.dim(1), h = C / 2;
    Tensor out({h, T});
    const std::size_t c0 = first ? 0 : h;
    for (std::size_t c = 0; c < h; ++c)
        for (std::size_t t = 0; t < T; ++t) out(c, t) = x(c0 + c, t);
    return out;
}

Tensor join(const Tensor& a, const Tensor& b) {
    const std::size_t h = a.dim(0), T = a.dim(1);
    Tensor out({2 * h, T});
    for (std::size_t c = 0; c < h; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            out(c, t) = a(c, t);
            out(h + c, t) = b(c, t);
        }
    return out;
}

}  // namespace

Tensor subnet_eval(const Conv1dParams& c1, const Conv1dParams& c2, const Tensor& x) {
    return conv1d(relu(conv1d(x, c1)), c2);
}

Tensor coupling_forward(const CouplingBlock& block, const Tensor& x) {
    check_even_channels(x);
    Tensor x1 = half(x, true);
    Tensor x2 = half(x, false);
    Tensor y1 = add(subnet_eval(block.f1, block.f2, x2), x1);
    Tensor y2 = add(subnet_eval(block.g1, block.g2, y1), x2);
    return join(y1, y2);
}

Tensor coupling_inverse(const CouplingBlock& block, const Tensor& y) {
    check_even_channels(y);
    Tensor y1 = half(y, true);
    Tensor y2 = half(y, false);
    Tensor x2 = sub(y2, subnet_eval(block.g1, block.g2, y1));
    Tensor x1 = sub(y1, subnet_eval(block.f1, block.f2, x2));
    return join(x1, x2);
}

Tensor squeeze_forward(const Tensor& x) { return squeeze2(x); }
Tensor squeeze_inverse(const Tensor& x) { return unsqueeze2(x); }
Tensor hartley_forward(const Tensor& x) { return hartley(x); }

Shape FlowModel::latent_shape() const {
    std::size_t C = channels, T = samples;
    for (const Layer& layer : layers) {
        if (std::holds_alternative<SqueezeLayer>(layer)) {
            C *= 2;
            T /= 2;
        }
    }
    return {C, T};
}

std::vector<NamedParam> FlowModel::parameters() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (auto* cb = std::get_if<CouplingBlock>(&layers[i])) {
            const std::string base = "layer" + std::to_string(i) + ".";
            out.push_back({base + "f1.kernels", &cb->f1.kernels});
            out.push_back({base + "f1.bias", &cb->f1.bias});
            out.push_back({base + "f2.kernels", &cb->f2.kernels});
            out.push_back({base + "f2.bias", &cb->f2.bias});
            out.push_back({base + "g1.kernels", &cb->g1.kernels});
            out.push_back({base + "g1.bias", &cb->g1.bias});
            out.push_back({base + "g2.kernels", &cb->g2.kernels});
            out.push_back({base + "g2.bias", &cb->g2.bias});
        }
    }
    out.push_back({"prior.means", &prior.means});
    out.push_back({"prior.log_stds", &prior.log_stds});
    return out;
}

FlowOutput flow_forward(const FlowModel& model, const Tensor& x) {
    if (x.rank() != 2 || x.dim(0) != model.channels || x.dim(1) != model.samples) {
        throw ShapeError("flow_forward: input shape " + shape_str(x.shape()) +
                         " does not match model input " +
                         shape_str(model.input_shape()));
    }
    Tensor h = x;
    for (const Layer& layer : model.layers) {
        h = std::visit(
            [&](const auto& l) -> Tensor {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, SqueezeLayer>) {
                    return squeeze_forward(h);
                } else if constexpr (std::is_same_v<L, CouplingBlock>) {
                    return coupling_forward(l, h);
                } else if constexpr (std::is_same_v<L, ChannelRotate>) {
                    return rotate_channels(h, l.shift);
                } else {
                    return hartley_forward(h);
                }
            },
            layer);
    }
    return FlowOutput{std::move(h), 0.0};
}

Tensor flow_inverse(const FlowModel& model, const Tensor& h) {
    Shape ls = model.latent_shape();
    if (h.rank() != 2 || h.shape() != ls) {
        throw ShapeError("flow_inverse: latent shape " + shape_str(h.shape()) +
                         " does not match model latent " + shape_str(ls));
    }
    Tensor x = h;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        x = std::visit(
            [&](const auto& l) -> Tensor {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, SqueezeLayer>) {
                    return squeeze_inverse(x);
                } else if constexpr (std::is_same_v<L, CouplingBlock>) {
                    return coupling_inverse(l, x);
                } else if constexpr (std::is_same_v<L, ChannelRotate>) {
                    return rotate_channels(x, -l.shift);
                } else {
                    return hartley_forward(x);  // involution
                }
            },
            model.layers[i]);
    }
    return x;
}

namespace {

Conv1dParams init_conv(std::size_t c_out, std::size_t c_in, std::size_t K,
                       bool zero_init, Rng& rng) {
    Conv1dParams p;
    p.kernels = Tensor({c_out, c_in, K});
    p.bias = Tensor({c_out});
    if (!zero_init) {
        const double std = 1.0 / std::sqrt(static_cast<double>(c_in * K));
        for (std::size_t i = 0; i < p.kernels.size(); ++i) {
            p.kernels[i] = std * rng.gaussian();
        }
    }
    return p;
}

CouplingBlock init_coupling(std::size_t C, std::size_t T, std::size_t kernel_size,
                            Rng& rng) {
    const std::size_t h = C / 2;
    const std::size_t hidden = 2 * h;
    std::size_t K = kernel_size;
    if (K > 2 * T - 1) K = 2 * T - 1;  // stays odd
    CouplingBlock b;
    b.f1 = init_conv(hidden, h, K, false, rng);
    b.f2 = init_conv(h, hidden, K, true, rng);
    b.g1 = init_conv(hidden, h, K, false, rng);
    b.g2 = init_conv(h, hidden, K, true, rng);
    return b;
}

}  // namespace

FlowModel build_architecture(const ArchitectureConfig& config) {
    if (config.channels == 0 || config.samples == 0) {
        throw ShapeError("build_architecture: channels and samples must be positive");
    }
    if (config.kernel_size % 2 == 0) {
        throw ShapeError("build_architecture: kernel size must be odd");
    }
    int max_stages = 0;
    {
        std::size_t T = config.samples;
        while (T % 2 == 0 && max_stages < 16) {
            T /= 2;
            ++max_stages;
        }
    }
    int n_stages = config.n_stages;
    if (n_stages < 0) n_stages = std::min(max_stages, 4);
    if (n_stages > max_stages) {
        throw ShapeError("build_architecture: T=" + std::to_string(config.samples) +
                         " supports at most " + std::to_string(max_stages) +
                         " stages, requested " + std::to_string(n_stages));
    }

    Rng rng(config.init_seed ^ 0x5f1c0de5ULL);
    FlowModel model;
    model.channels = config.channels;
    model.samples = config.samples;

    std::size_t C = config.channels, T = config.samples;
    for (int s = 0; s < n_stages; ++s) {
        model.layers.emplace_back(SqueezeLayer{});
        C *= 2;
        T /= 2;
        model.layers.emplace_back(init_coupling(C, T, config.kernel_size, rng));
        model.layers.emplace_back(init_coupling(C, T, config.kernel_size, rng));
        model.layers.emplace_back(ChannelRotate{1});
    }
    model.layers.emplace_back(HartleyLayer{});
    model.prior = ClassConditionalGaussian::init(config.n_classes, C * T);
    return model;
}

// --- tape-based paths ---

ad::Var ModelVars::of(const Tensor& t) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].tensor == &t) return vars[i];
    }
    throw Error("ModelVars: tensor is not a lifted parameter");
}

ModelVars lift_parameters(ad::Tape& tape, FlowModel& model) {
    ModelVars mv;
    mv.params = model.parameters();
    mv.vars.reserve(mv.params.size());
    for (const NamedParam& p : mv.params) {
        mv.vars.push_back(tape.leaf(*p.tensor, true));
    }
    return mv;
}

namespace {

ad::Var subnet_ad(const ModelVars& vars, const Conv1dParams& c1,
                  const Conv1dParams& c2, ad::Var x) {
    ad::Var h = ad::conv1d(x, vars.of(c1.kernels), vars.of(c1.bias));
    return ad::conv1d(ad::relu(h), vars.of(c2.kernels), vars.of(c2.bias));
}

ad::Var coupling_forward_ad(const ModelVars& vars, const CouplingBlock& b, ad::Var x) {
    check_even_channels(x.value());
    const std::size_t C = x.value().dim(0), h = C / 2;
    ad::Var x1 = ad::take_channels(x, 0, h);
    ad::Var x2 = ad::take_channels(x, h, C);
    ad::Var y1 = ad::add(subnet_ad(vars, b.f1, b.f2, x2), x1);
    ad::Var y2 = ad::add(subnet_ad(vars, b.g1, b.g2, y1), x2);
    return ad::concat_channels(y1, y2);
}

ad::Var coupling_inverse_ad(const ModelVars& vars, const CouplingBlock& b, ad::Var y) {
    check_even_channels(y.value());
    const std::size_t C = y.value().dim(0), h = C / 2;
    ad::Var y1 = ad::take_channels(y, 0, h);
    ad::Var y2 = ad::take_channels(y, h, C);
    ad::Var x2 = ad::sub(y2, subnet_ad(vars, b.g1, b.g2, y1));
    ad::Var x1 = ad::sub(y1, subnet_ad(vars, b.f1, b.f2, x2));
    return ad::concat_channels(x1, x2);
}

}  // namespace

ad::Var flow_forward_ad(const FlowModel& model, const ModelVars& vars, ad::Var x) {
    ad::Var h = x;
    for (const Layer& layer : model.layers) {
        h = std::visit(
            [&](const auto& l) -> ad::Var {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, SqueezeLayer>) {
                    return ad::squeeze2(h);
                } else if constexpr (std::is_same_v<L, CouplingBlock>) {
                    return coupling_forward_ad(vars, l, h);
                } else if constexpr (std::is_same_v<L, ChannelRotate>) {
                    return ad::rotate_channels(h, l.shift);
                } else {
                    return ad::hartley_op(h);
                }
            },
            layer);
    }
    return h;
}

ad::Var flow_inverse_ad(const FlowModel& model, const ModelVars& vars, ad::Var h) {
    ad::Var x = h;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        x = std::visit(
            [&](const auto& l) -> ad::Var {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, SqueezeLayer>) {
                    return ad::unsqueeze2(x);
                } else if constexpr (std::is_same_v<L, CouplingBlock>) {
                    return coupling_inverse_ad(vars, l, x);
                } else if constexpr (std::is_same_v<L, ChannelRotate>) {
                    return ad::rotate_channels(x, -l.shift);
                } else {
                    return ad::hartley_op(x);
                }
            },
            model.layers[i]);
    }
    return x;
}

// --- serialization ---

namespace {

constexpr char kMagic[4] = {'S', 'G', 'F', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxDim = 1u << 30;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64_array(std::ostream& os, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, &data[i], 8);
        write_u64(os, bits);
    }
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("model file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void read_f64_array(std::istream& is, double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = read_u64(is);
        std::memcpy(&data[i], &bits, 8);
    }
}

std::size_t read_dim(std::istream& is, const char* what) {
    std::uint64_t d = read_u64(is);
    if (d > kMaxDim) {
        throw DataError(std::string("model file: implausible ") + what + " " +
                        std::to_string(d));
    }
    return static_cast<std::size_t>(d);
}

void write_conv(std::ostream& os, const Conv1dParams& p) {
    write_u64(os, p.out_channels());
    write_u64(os, p.in_channels());
    write_u64(os, p.kernel_size());
    write_f64_array(os, p.kernels.data(), p.kernels.size());
    write_f64_array(os, p.bias.data(), p.bias.size());
}

Conv1dParams read_conv(std::istream& is) {
    const std::size_t co = read_dim(is, "conv C_out");
    const std::size_t ci = read_dim(is, "conv C_in");
    const std::size_t k = read_dim(is, "conv K");
    Conv1dParams p;
    p.kernels = Tensor({co, ci, k});
    p.bias = Tensor({co});
    read_f64_array(is, p.kernels.data(), p.kernels.size());
    read_f64_array(is, p.bias.data(), p.bias.size());
    return p;
}

enum LayerTag : std::uint32_t {
    kTagSqueeze = 0,
    kTagCoupling = 1,
    kTagRotate = 2,
    kTagHartley = 3,
};

}  // namespace

void save_model(const FlowModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open model file for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u64(os, model.channels);
    write_u64(os, model.samples);
    write_u64(os, model.prior.n_classes());
    write_u64(os, model.layers.size());
    for (const Layer& layer : model.layers) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, SqueezeLayer>) {
                    write_u32(os, kTagSqueeze);
                } else if constexpr (std::is_same_v<L, CouplingBlock>) {
                    write_u32(os, kTagCoupling);
                    write_conv(os, l.f1);
                    write_conv(os, l.f2);
                    write_conv(os, l.g1);
                    write_conv(os, l.g2);
                } else if constexpr (std::is_same_v<L, ChannelRotate>) {
                    write_u32(os, kTagRotate);
                    write_u32(os, static_cast<std::uint32_t>(l.shift));
                } else {
                    write_u32(os, kTagHartley);
                }
            },
            layer);
    }
    write_f64_array(os, model.prior.means.data(), model.prior.means.size());
    write_f64_array(os, model.prior.log_stds.data(), model.prior.log_stds.size());
    if (!os) throw DataError("failed writing model file: " + path);
}

FlowModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("not a model file (bad magic): " + path);
    }
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw DataError("unsupported model format version " + std::to_string(version) +
                        " (this build reads version " + std::to_string(kVersion) + ")");
    }
    FlowModel model;
    model.channels = read_dim(is, "channels");
    model.samples = read_dim(is, "samples");
    const std::size_t n_classes = read_dim(is, "n_classes");
    const std::size_t n_layers = read_dim(is, "layer count");
    for (std::size_t i = 0; i < n_layers; ++i) {
        const std::uint32_t tag = read_u32(is);
        switch (tag) {
            case kTagSqueeze:
                model.layers.emplace_back(SqueezeLayer{});
                break;
            case kTagCoupling: {
                CouplingBlock b;
                b.f1 = read_conv(is);
                b.f2 = read_conv(is);
                b.g1 = read_conv(is);
                b.g2 = read_conv(is);
                model.layers.emplace_back(std::move(b));
                break;
            }
            case kTagRotate: {
                ChannelRotate r;
                r.shift = static_cast<std::int32_t>(read_u32(is));
                model.layers.emplace_back(r);
                break;
            }
            case kTagHartley:
                model.layers.emplace_back(HartleyLayer{});
                break;
            default:
                throw DataError("model file: unknown layer tag " + std::to_string(tag));
        }
    }
    Shape latent = model.latent_shape();
    const std::size_t d = latent[0] * latent[1];
    model.prior = ClassConditionalGaussian::init(n_classes, d);
    read_f64_array(is, model.prior.means.data(), model.prior.means.size());
    read_f64_array(is, model.prior.log_stds.data(), model.prior.log_stds.size());
    return model;
}

}  // namespace sigflow
