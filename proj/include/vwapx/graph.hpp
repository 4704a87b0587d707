#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "vwapx/tensor.hpp"

namespace vwapx::nn {

class Graph;
struct ParamStore;

// Handle to a node in a Graph. Cheap to copy; valid for the graph's lifetime
// (until clear()).
class Value {
public:
    Value() = default;
    Value(Graph* g, int idx) : g_(g), idx_(idx) {}
    const Tensor& val() const;
    const Tensor& grad() const; // zero-sized if the node never received gradient
    int index() const { return idx_; }
    bool valid() const { return g_ != nullptr; }
    Graph* graph() const { return g_; }

private:
    Graph* g_ = nullptr;
    int idx_ = -1;
};

// Reverse-mode tape. Nodes are appended in forward order, which is a valid
// topological order; backward() sweeps indices in reverse exactly once.
class Graph {
public:
    enum class Op : uint8_t {
        Leaf,
        MatmulNN,   // in0[m,k] * in1[k,n]
        Add,        // same shape
        AddRow,     // in0[m,n] + in1[1,n] broadcast over rows
        AddScalarT, // in0[m,n] + in1[1,1] broadcast
        Sub,        // same shape
        Mul,        // elementwise, same shape
        Scale,      // in0 * s0
        AddConst,   // in0 + s0
        Tanh,
        Sigmoid,
        Relu,
        Exp,
        Log,
        Abs,
        Square,
        SoftmaxRows,
        LogSoftmaxRows,
        LayerNormRows, // in0[m,n], gain in1[1,n], bias in2[1,n]
        ConcatCols,    // list
        ConcatRows,    // list
        SliceCols,     // [a0, a1)
        SliceRows,     // [a0, a1)
        SumAll,
        MeanAll,
        RowSum,     // [m,n] -> [m,1]
        GatherCols, // per-row column pick -> [m,1]; indices in list storage
        Min,        // elementwise min(in0, in1)
        Clamp,      // clamp(in0, s0, s1)
        Transpose,
    };

    // ---- leaves ----
    Value constant(Tensor t);
    Value constant_scalar(double v) { return constant(Tensor::scalar(v)); }
    // Leaf bound to a named parameter: value is copied from the store, and
    // backward() accumulates the leaf gradient into the store's grad buffer.
    Value param(ParamStore& store, const std::string& name);

    // ---- ops ----
    Value matmul(Value a, Value b);
    Value matmul_nt(Value a, Value b); // a[m,k] * b[n,k]^T -> [m,n]
    Value add(Value a, Value b);       // same shape, row- or scalar-broadcast b
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value scale(Value a, double s);
    Value add_const(Value a, double c);
    Value tanh_(Value a);
    Value sigmoid_(Value a);
    Value relu_(Value a);
    Value exp_(Value a);
    Value log_(Value a);
    Value abs_(Value a);
    Value square_(Value a);
    Value softmax_rows(Value a);
    Value log_softmax_rows(Value a);
    Value layer_norm_rows(Value x, Value gain, Value bias, double eps = 1e-5);
    Value concat_cols(const std::vector<Value>& xs);
    Value concat_rows(const std::vector<Value>& xs);
    Value slice_cols(Value a, int64_t c0, int64_t c1);
    Value slice_rows(Value a, int64_t r0, int64_t r1);
    Value sum_all(Value a);
    Value mean_all(Value a);
    Value row_sum(Value a);
    Value gather_cols(Value a, const std::vector<int64_t>& idx);
    Value min_(Value a, Value b);
    Value clamp_(Value a, double lo, double hi);
    Value transpose(Value a);

    // Accumulates dLoss/d(leaf) for every reachable node; adds parameter-leaf
    // gradients into their ParamStore grad buffers. Internal scratch is reset
    // per call, so calling twice doubles the accumulated parameter gradients.
    void backward(Value loss);

    void clear();
    size_t size() const { return nodes_.size(); }
    const Tensor& value_of(int idx) const {
        const Node& n = nodes_[static_cast<size_t>(idx)];
        return n.ext != nullptr ? *n.ext : n.out;
    }
    const Tensor& grad_of(int idx) const { return nodes_[static_cast<size_t>(idx)].grad; }

private:
    struct Node {
        Op op = Op::Leaf;
        int in0 = -1, in1 = -1, in2 = -1;
        int list = -1;     // index into lists_ (ConcatCols/Rows inputs, GatherCols indices)
        int64_t a0 = 0, a1 = 0;
        double s0 = 0.0, s1 = 0.0;
        Tensor out;
        const Tensor* ext = nullptr; // parameter leaves view the store value
        Tensor grad;
        Tensor* param_grad = nullptr;
    };

    int push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }
    // Nodes live in a deque so Tensor references returned by value_of/grad_of
    // stay valid while the graph grows.
    Node& node(Value v) { return nodes_[static_cast<size_t>(v.index())]; }
    const Tensor& val(Value v) const { return value_of(v.index()); }
    const Tensor& val_at(int idx) const { return value_of(idx); }
    Tensor& ensure_grad(int idx);
    void backprop_node(int idx);
    void check_same_graph(Value v) const;

    std::deque<Node> nodes_;
    std::vector<std::vector<int64_t>> lists_;

    friend class Value;
};

// Deterministic dense kernels. Each C element accumulates over k in ascending
// order, independent of m, so single-row and batched forwards agree bit-exactly.
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
           bool accumulate);

} // namespace vwapx::nn
