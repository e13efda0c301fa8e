#pragma once

#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sigflow/ops.hpp"
#include "sigflow/tensor.hpp"

namespace sigflow::ad {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
};

// Reverse-mode tape over a fixed op registry. Nodes are appended in evaluation
// order, which is a topological order, so backward is a single reverse sweep.
class Tape {
  public:
    using PullFn = std::function<void(Tape&, const Tensor& upstream, std::size_t self_id)>;

    Var leaf(Tensor value, bool requires_grad = false);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Returns the
    // gradient of every requires_grad leaf, keyed by node id. Throws on a
    // non-scalar loss. Repeatable: grads are reset on every call.
    std::unordered_map<std::size_t, Tensor> backward(const Var& loss);

    const Tensor& grad(const Var& v) const;
    bool has_grad(const Var& v) const;

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool needs(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    Var make(Tensor value, std::vector<std::size_t> parents, PullFn pull);
    void accumulate(std::size_t id, Tensor g);

  private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        PullFn pull;
        bool requires_grad = false;
        bool is_leaf = false;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

Var constant(Tape& t, Tensor value);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var vexp(Var a);
Var vlog(Var a);
Var relu(Var a);
Var sum(Var a);           // -> shape (1)
Var cmax(Var a, double floor);

Var conv1d(Var x, Var kernels, Var bias);

Var row(Var matrix, std::size_t r);    // (R, D) -> (D)
Var element(Var vec, std::size_t i);   // (N) -> (1)

Var take_channels(Var x, std::size_t c0, std::size_t c1);  // rows [c0, c1) of (C, T)
Var concat_channels(Var a, Var b);
Var squeeze2(Var x);     // (C, T) -> (2C, T/2), even/odd time interleave
Var unsqueeze2(Var x);   // inverse of squeeze2
Var rotate_channels(Var x, int shift);  // out[c] = x[(c + shift) mod C]
Var hartley_op(Var x);
Var reshape(Var x, Shape shape);

}  // namespace sigflow::ad
