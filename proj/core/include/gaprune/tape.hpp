#pragma once

#include "gaprune/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace gaprune {

// Reverse-mode tape over a fixed primitive set: matmul, pointwise ops, row
// broadcasts, pooling, normalization and the contrastive head. One var per
// recorded node, in topological order by construction. Tapes are single-owner
// and not shared across threads.
class tape {
  public:
    using var = int32_t;

    enum class op {
        leaf,
        matmul,       // a[m,k] * b[k,n]
        matmul_nt,    // a[m,k] * b[n,k]^T
        add,          // same shape or scalar broadcast
        mul,          // same shape or scalar broadcast
        scale,        // constant * x
        tanh_op,
        gelu,         // tanh approximation
        gather_rows,  // embedding lookup
        row_scale,    // x[t,d] * v[d] per row
        row_add,      // x[t,d] + v[d] per row
        mean_pool,    // mean over first `count` rows
        l2_normalize, // x / (||x|| + eps)
        dot,
        sum,
        pack,         // scalars -> vector
        infonce_head, // sims[0]=positive, sims[1..]=negatives -> scalar loss
    };

    var leaf(tensor t);

    var matmul(var a, var b);
    var matmul_nt(var a, var b);
    var add(var a, var b);
    var mul(var a, var b);
    var scale(var x, double c);
    var tanh(var x);
    var gelu(var x);
    var gather_rows(var table, std::vector<int64_t> ids);
    var row_scale(var x, var v);
    var row_add(var x, var v);
    var mean_pool(var x, int64_t valid);
    var l2_normalize(var x, double eps);
    var dot(var a, var b);
    var sum(var x);
    var pack(std::span<const var> scalars);
    var infonce_head(var sims, double tau);

    // Exact reverse-mode gradients for every var reachable from `loss`.
    // `loss` must be a scalar recorded on this tape.
    void backward(var loss);

    const tensor & value(var v) const;
    const tensor & grad(var v) const;

    size_t size() const { return nodes_.size(); }

  private:
    struct node {
        op kind;
        std::vector<var> inputs;
        double c = 0.0;    // scale factor / eps / tau
        int64_t count = 0; // mean_pool valid rows
        std::vector<int64_t> ids;
    };

    var push(node n, tensor value);
    void check_var(var v) const;

    std::vector<node> nodes_;
    std::vector<tensor> values_;
    std::vector<tensor> grads_;
    bool has_grads_ = false;
};

// Central finite differences (f(x+he_i) - f(x-he_i)) / (2h) per coordinate.
// Forward evaluations only; independent of the tape's backward pass.
tensor finite_diff_grad(const std::function<double(const tensor &)> & f, const tensor & x,
                        double step);

} // namespace gaprune
