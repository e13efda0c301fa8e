#include "sigflow/autodiff.hpp"

#include <cmath>

namespace sigflow::ad {

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = true;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::make(Tensor value, std::vector<std::size_t> parents, PullFn pull) {
    Node n;
    n.value = std::move(value);
    bool needs = false;
    for (std::size_t p : parents) needs = needs || nodes_[p].requires_grad;
    n.requires_grad = needs;
    if (needs) {
        n.parents = std::move(parents);
        n.pull = std::move(pull);
    }
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, Tensor g) {
    if (!nodes_[id].requires_grad) return;
    Tensor& slot = grads_[id];
    if (slot.empty() && g.size() > 0) {
        slot = std::move(g);
        return;
    }
    if (!slot.same_shape(g)) {
        throw ShapeError("gradient accumulation shape mismatch: " +
                         shape_str(slot.shape()) + " vs " + shape_str(g.shape()));
    }
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

std::unordered_map<std::size_t, Tensor> Tape::backward(const Var& loss) {
    if (loss.tape != this) {
        throw Error("backward: loss belongs to a different tape");
    }
    if (loss.value().size() != 1) {
        throw ShapeError("backward: loss must be scalar, got shape " +
                         shape_str(loss.value().shape()));
    }
    grads_.assign(nodes_.size(), Tensor());
    accumulate(loss.id, Tensor::scalar(1.0));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.requires_grad || grads_[i].empty()) continue;
        if (n.pull) n.pull(*this, grads_[i], i);
    }
    std::unordered_map<std::size_t, Tensor> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].is_leaf && nodes_[i].requires_grad) {
            out[i] = grads_[i].empty() ? Tensor(nodes_[i].value.shape()) : grads_[i];
        }
    }
    return out;
}

const Tensor& Tape::grad(const Var& v) const {
    if (v.id >= grads_.size() || grads_[v.id].empty()) {
        throw Error("grad: no gradient recorded for node " + std::to_string(v.id));
    }
    return grads_[v.id];
}

bool Tape::has_grad(const Var& v) const {
    return v.id < grads_.size() && !grads_[v.id].empty();
}

Var constant(Tape& t, Tensor value) { return t.leaf(std::move(value), false); }

namespace {

Tape& tape_of(Var a, Var b) {
    if (a.tape != b.tape) throw Error("op: operands on different tapes");
    return *a.tape;
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    return t.make(sigflow::add(a.value(), b.value()), {a.id, b.id},
                  [pa = a.id, pb = b.id](Tape& t, const Tensor& g, std::size_t) {
                      t.accumulate(pa, g);
                      t.accumulate(pb, g);
                  });
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a, b);
    return t.make(sigflow::sub(a.value(), b.value()), {a.id, b.id},
                  [pa = a.id, pb = b.id](Tape& t, const Tensor& g, std::size_t) {
                      t.accumulate(pa, g);
                      t.accumulate(pb, sigflow::scale(g, -1.0));
                  });
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    return t.make(sigflow::mul(a.value(), b.value()), {a.id, b.id},
                  [pa = a.id, pb = b.id](Tape& t, const Tensor& g, std::size_t) {
                      if (t.needs(pa)) t.accumulate(pa, sigflow::mul(g, t.value(pb)));
                      if (t.needs(pb)) t.accumulate(pb, sigflow::mul(g, t.value(pa)));
                  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
    return a.tape->make(sigflow::scale(a.value(), s), {a.id},
                        [pa = a.id, s](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(pa, sigflow::scale(g, s));
                        });
}

Var add_scalar(Var a, double s) {
    Tensor v = a.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += s;
    return a.tape->make(std::move(v), {a.id},
                        [pa = a.id](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(pa, g);
                        });
}

Var vexp(Var a) {
    Tensor v(a.value().shape());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a.value()[i]);
    return a.tape->make(std::move(v), {a.id},
                        [pa = a.id](Tape& t, const Tensor& g, std::size_t self) {
                            t.accumulate(pa, sigflow::mul(g, t.value(self)));
                        });
}

Var vlog(Var a) {
    Tensor v(a.value().shape());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log(a.value()[i]);
    return a.tape->make(std::move(v), {a.id},
                        [pa = a.id](Tape& t, const Tensor& g, std::size_t) {
                            const Tensor& x = t.value(pa);
                            Tensor gx(x.shape());
                            for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] / x[i];
                            t.accumulate(pa, std::move(gx));
                        });
}

Var relu(Var a) {
    // subgradient 0 at the kink
    return a.tape->make(sigflow::relu(a.value()), {a.id},
                        [pa = a.id](Tape& t, const Tensor& g, std::size_t) {
                            const Tensor& x = t.value(pa);
                            Tensor gx(x.shape());
                            for (std::size_t i = 0; i < x.size(); ++i)
                                gx[i] = x[i] > 0.0 ? g[i] : 0.0;
                            t.accumulate(pa, std::move(gx));
                        });
}

Var sum(Var a) {
    // built without the validating constructor: a non-finite total must flow
    // through so training can diagnose it as a bad gradient, not die here
    Tensor total({1});
    total[0] = sigflow::sum(a.value());
    return a.tape->make(std::move(total), {a.id},
                        [pa = a.id](Tape& t, const Tensor& g, std::size_t) {
                            Tensor gx(t.value(pa).shape());
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[0];
                            t.accumulate(pa, std::move(gx));
                        });
}

Var cmax(Var a, double floor) {
    Tensor v(a.value().shape());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = a.value()[i] > floor ? a.value()[i] : floor;
    return a.tape->make(std::move(v), {a.id},
                        [pa = a.id, floor](Tape& t, const Tensor& g, std::size_t) {
                            const Tensor& x = t.value(pa);
                            Tensor gx(x.shape());
                            for (std::size_t i = 0; i < x.size(); ++i)
                                gx[i] = x[i] > floor ? g[i] : 0.0;
                            t.accumulate(pa, std::move(gx));
                        });
}

Var conv1d(Var x, Var kernels, Var bias) {
    Tape& t = tape_of(x, kernels);
    Conv1dParams p{kernels.value(), bias.value()};
    Tensor v = sigflow::conv1d(x.value(), p);
    const std::size_t K = p.kernel_size();
    return t.make(std::move(v), {x.id, kernels.id, bias.id},
                  [px = x.id, pk = kernels.id, pb = bias.id, K](
                      Tape& t, const Tensor& g, std::size_t) {
                      Conv1dParams p{t.value(pk), t.value(pb)};
                      if (t.needs(px)) t.accumulate(px, conv1d_grad_input(g, p));
                      if (t.needs(pk))
                          t.accumulate(pk, conv1d_grad_kernels(g, t.value(px), K));
                      if (t.needs(pb)) t.accumulate(pb, conv1d_grad_bias(g));
                  });
}

Var row(Var matrix, std::size_t r) {
    const Tensor& m = matrix.value();
    if (m.rank() != 2 || r >= m.dim(0)) {
        throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                         shape_str(m.shape()));
    }
    const std::size_t D = m.dim(1);
    Tensor v({D});
    for (std::size_t j = 0; j < D; ++j) v[j] = m(r, j);
    return matrix.tape->make(std::move(v), {matrix.id},
                             [pm = matrix.id, r, D](Tape& t, const Tensor& g, std::size_t) {
                                 Tensor gm(t.value(pm).shape());
                                 for (std::size_t j = 0; j < D; ++j) gm(r, j) = g[j];
                                 t.accumulate(pm, std::move(gm));
                             });
}

Var element(Var vec, std::size_t i) {
    const Tensor& v = vec.value();
    if (v.rank() != 1 || i >= v.size()) {
        throw ShapeError("element: index " + std::to_string(i) + " out of range for " +
                         shape_str(v.shape()));
    }
    return vec.tape->make(Tensor::scalar(v[i]), {vec.id},
                          [pv = vec.id, i](Tape& t, const Tensor& g, std::size_t) {
                              Tensor gv(t.value(pv).shape());
                              gv[i] = g[0];
                              t.accumulate(pv, std::move(gv));
                          });
}

Var take_channels(Var x, std::size_t c0, std::size_t c1) {
    const Tensor& v = x.value();
    if (v.rank() != 2 || c0 >= c1 || c1 > v.dim(0)) {
        throw ShapeError("take_channels: invalid range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") for " + shape_str(v.shape()));
    }
    const std::size_t T = v.dim(1);
    Tensor out({c1 - c0, T});
    for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t t = 0; t < T; ++t) out(c - c0, t) = v(c, t);
    return x.tape->make(std::move(out), {x.id},
                        [px = x.id, c0, T](Tape& t, const Tensor& g, std::size_t) {
                            Tensor gx(t.value(px).shape());
                            for (std::size_t c = 0; c < g.dim(0); ++c)
                                for (std::size_t s = 0; s < T; ++s)
                                    gx(c0 + c, s) = g(c, s);
                            t.accumulate(px, std::move(gx));
                        });
}

Var concat_channels(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const Tensor& va = a.value();
    const Tensor& vb = b.value();
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(1)) {
        throw ShapeError("concat_channels: incompatible shapes " +
                         shape_str(va.shape()) + " and " + shape_str(vb.shape()));
    }
    const std::size_t Ca = va.dim(0), Cb = vb.dim(0), T = va.dim(1);
    Tensor out({Ca + Cb, T});
    for (std::size_t c = 0; c < Ca; ++c)
        for (std::size_t s = 0; s < T; ++s) out(c, s) = va(c, s);
    for (std::size_t c = 0; c < Cb; ++c)
        for (std::size_t s = 0; s < T; ++s) out(Ca + c, s) = vb(c, s);
    return t.make(std::move(out), {a.id, b.id},
                  [pa = a.id, pb = b.id, Ca, Cb, T](Tape& t, const Tensor& g, std::size_t) {
                      Tensor ga({Ca, T}), gb({Cb, T});
                      for (std::size_t c = 0; c < Ca; ++c)
                          for (std::size_t s = 0; s < T; ++s) ga(c, s) = g(c, s);
                      for (std::size_t c = 0; c < Cb; ++c)
                          for (std::size_t s = 0; s < T; ++s) gb(c, s) = g(Ca + c, s);
                      t.accumulate(pa, std::move(ga));
                      t.accumulate(pb, std::move(gb));
                  });
}

Var squeeze2(Var x) {
    return x.tape->make(sigflow::squeeze2(x.value()), {x.id},
                        [px = x.id](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(px, sigflow::unsqueeze2(g));
                        });
}

Var unsqueeze2(Var x) {
    return x.tape->make(sigflow::unsqueeze2(x.value()), {x.id},
                        [px = x.id](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(px, sigflow::squeeze2(g));
                        });
}

Var rotate_channels(Var x, int shift) {
    return x.tape->make(sigflow::rotate_channels(x.value(), shift), {x.id},
                        [px = x.id, shift](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(px, sigflow::rotate_channels(g, -shift));
                        });
}

Var hartley_op(Var x) {
    // symmetric orthonormal linear map: adjoint = the transform itself
    return x.tape->make(sigflow::hartley(x.value()), {x.id},
                        [px = x.id](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(px, sigflow::hartley(g));
                        });
}

Var reshape(Var x, Shape shape) {
    Shape orig = x.value().shape();
    return x.tape->make(x.value().reshaped(std::move(shape)), {x.id},
                        [px = x.id, orig](Tape& t, const Tensor& g, std::size_t) {
                            t.accumulate(px, g.reshaped(orig));
                        });
}

}  // namespace sigflow::ad
