#include "vwapx/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vwapx/optim.hpp"

namespace vwapx::nn {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    throw std::invalid_argument(std::string(op) + ": bad shape " + a.shape_str());
}

Tensor transposed(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (int64_t i = 0; i < a.rows(); ++i)
        for (int64_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

} // namespace

// C[m,n] (+)= A[m,k] * B[k,n]. k is the outer loop and each C element sums
// ascending in k, so results are independent of m (bit-exact between B=1 and
// batched calls). The j loop is a broadcast-axpy the compiler vectorizes.
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
           bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    int64_t p = 0;
    for (; p + 4 <= k; p += 4) {
        const double* b0 = b + p * n;
        const double* b1 = b0 + n;
        const double* b2 = b1 + n;
        const double* b3 = b2 + n;
        for (int64_t i = 0; i < m; ++i) {
            const double a0 = a[i * k + p];
            const double a1 = a[i * k + p + 1];
            const double a2 = a[i * k + p + 2];
            const double a3 = a[i * k + p + 3];
            double* ci = c + i * n;
            for (int64_t j = 0; j < n; ++j)
                ci[j] += ((a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]));
        }
    }
    for (; p < k; ++p) {
        const double* bp = b + p * n;
        for (int64_t i = 0; i < m; ++i) {
            const double ap = a[i * k + p];
            double* ci = c + i * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += ap * bp[j];
        }
    }
}

const Tensor& Value::val() const { return g_->value_of(idx_); }
const Tensor& Value::grad() const { return g_->grad_of(idx_); }

void Graph::check_same_graph(Value v) const {
    if (v.graph() != this) throw std::logic_error("Graph: value belongs to another graph");
    if (v.index() < 0 || v.index() >= static_cast<int>(nodes_.size()))
        throw std::logic_error("Graph: stale value handle");
}

Tensor& Graph::ensure_grad(int idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    const Tensor& v = value_of(idx);
    if (n.grad.empty() && v.size() > 0) n.grad = Tensor(v.rows(), v.cols(), 0.0);
    return n.grad;
}

// ---------------------------------------------------------------------------
// leaves
// ---------------------------------------------------------------------------

Value Graph::constant(Tensor t) {
    Node n;
    n.op = Op::Leaf;
    n.out = std::move(t);
    return Value(this, push(std::move(n)));
}

Value Graph::param(ParamStore& store, const std::string& name) {
    auto& entry = store.get(name);
    Node n;
    n.op = Op::Leaf;
    n.ext = &entry.value; // no copy; the store must outlive the graph
    n.param_grad = &entry.grad;
    return Value(this, push(std::move(n)));
}

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

Value Graph::matmul(Value a, Value b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.rows()) shape_error("matmul", A, B);
    Node n;
    n.op = Op::MatmulNN;
    n.in0 = a.index();
    n.in1 = b.index();
    n.out = Tensor(A.rows(), B.cols());
    mm_nn(A.data(), B.data(), n.out.data(), A.rows(), A.cols(), B.cols(), false);
    return Value(this, push(std::move(n)));
}

Value Graph::matmul_nt(Value a, Value b) {
    // A * B^T via an explicit transpose node so every product runs the same kernel.
    return matmul(a, transpose(b));
}

Value Graph::transpose(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Transpose;
    n.in0 = a.index();
    n.out = transposed(val(a));
    return Value(this, push(std::move(n)));
}

Value Graph::add(Value a, Value b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    Node n;
    n.in0 = a.index();
    n.in1 = b.index();
    if (A.same_shape(B)) {
        n.op = Op::Add;
        n.out = A;
        for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] += B[i];
    } else if (B.rows() == 1 && B.cols() == 1) {
        n.op = Op::AddScalarT;
        n.out = A;
        const double s = B[0];
        for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] += s;
    } else if (B.rows() == 1 && B.cols() == A.cols()) {
        n.op = Op::AddRow;
        n.out = A;
        for (int64_t i = 0; i < A.rows(); ++i)
            for (int64_t j = 0; j < A.cols(); ++j) n.out.at(i, j) += B[j];
    } else {
        shape_error("add", A, B);
    }
    return Value(this, push(std::move(n)));
}

Value Graph::sub(Value a, Value b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) shape_error("sub", A, B);
    Node n;
    n.op = Op::Sub;
    n.in0 = a.index();
    n.in1 = b.index();
    n.out = A;
    for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] -= B[i];
    return Value(this, push(std::move(n)));
}

Value Graph::mul(Value a, Value b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) shape_error("mul", A, B);
    Node n;
    n.op = Op::Mul;
    n.in0 = a.index();
    n.in1 = b.index();
    n.out = A;
    for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] *= B[i];
    return Value(this, push(std::move(n)));
}

Value Graph::scale(Value a, double s) {
    check_same_graph(a);
    Node n;
    n.op = Op::Scale;
    n.in0 = a.index();
    n.s0 = s;
    n.out = val(a);
    for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] *= s;
    return Value(this, push(std::move(n)));
}

Value Graph::add_const(Value a, double c) {
    check_same_graph(a);
    Node n;
    n.op = Op::AddConst;
    n.in0 = a.index();
    n.s0 = c;
    n.out = val(a);
    for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] += c;
    return Value(this, push(std::move(n)));
}

namespace {
template <typename F>
Tensor map_tensor(const Tensor& a, F f) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
    return out;
}
} // namespace

Value Graph::tanh_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Tanh;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return std::tanh(x); });
    return Value(this, push(std::move(n)));
}

Value Graph::sigmoid_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Sigmoid;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return Value(this, push(std::move(n)));
}

Value Graph::relu_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Relu;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return x > 0.0 ? x : 0.0; });
    return Value(this, push(std::move(n)));
}

Value Graph::exp_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Exp;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return std::exp(x); });
    return Value(this, push(std::move(n)));
}

Value Graph::log_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Log;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return std::log(x); });
    return Value(this, push(std::move(n)));
}

Value Graph::abs_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Abs;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return std::fabs(x); });
    return Value(this, push(std::move(n)));
}

Value Graph::square_(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::Square;
    n.in0 = a.index();
    n.out = map_tensor(val(a), [](double x) { return x * x; });
    return Value(this, push(std::move(n)));
}

Value Graph::softmax_rows(Value a) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (A.cols() < 1) shape_error("softmax_rows", A);
    Node n;
    n.op = Op::SoftmaxRows;
    n.in0 = a.index();
    n.out = Tensor(A.rows(), A.cols());
    for (int64_t i = 0; i < A.rows(); ++i) {
        double m = A.at(i, 0);
        for (int64_t j = 1; j < A.cols(); ++j) m = std::max(m, A.at(i, j));
        double s = 0.0;
        for (int64_t j = 0; j < A.cols(); ++j) {
            const double e = std::exp(A.at(i, j) - m);
            n.out.at(i, j) = e;
            s += e;
        }
        for (int64_t j = 0; j < A.cols(); ++j) n.out.at(i, j) /= s;
    }
    return Value(this, push(std::move(n)));
}

Value Graph::log_softmax_rows(Value a) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (A.cols() < 1) shape_error("log_softmax_rows", A);
    Node n;
    n.op = Op::LogSoftmaxRows;
    n.in0 = a.index();
    n.out = Tensor(A.rows(), A.cols());
    for (int64_t i = 0; i < A.rows(); ++i) {
        double m = A.at(i, 0);
        for (int64_t j = 1; j < A.cols(); ++j) m = std::max(m, A.at(i, j));
        double s = 0.0;
        for (int64_t j = 0; j < A.cols(); ++j) s += std::exp(A.at(i, j) - m);
        const double lse = m + std::log(s);
        for (int64_t j = 0; j < A.cols(); ++j) n.out.at(i, j) = A.at(i, j) - lse;
    }
    return Value(this, push(std::move(n)));
}

Value Graph::layer_norm_rows(Value x, Value gain, Value bias, double eps) {
    check_same_graph(x);
    check_same_graph(gain);
    check_same_graph(bias);
    const Tensor& X = val(x);
    const Tensor& G = val(gain);
    const Tensor& B = val(bias);
    if (G.rows() != 1 || G.cols() != X.cols()) shape_error("layer_norm gain", X, G);
    if (B.rows() != 1 || B.cols() != X.cols()) shape_error("layer_norm bias", X, B);
    Node n;
    n.op = Op::LayerNormRows;
    n.in0 = x.index();
    n.in1 = gain.index();
    n.in2 = bias.index();
    n.s0 = eps;
    n.out = Tensor(X.rows(), X.cols());
    for (int64_t i = 0; i < X.rows(); ++i) {
        double mean = 0.0;
        for (int64_t j = 0; j < X.cols(); ++j) mean += X.at(i, j);
        mean /= static_cast<double>(X.cols());
        double var = 0.0;
        for (int64_t j = 0; j < X.cols(); ++j) {
            const double d = X.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(X.cols());
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t j = 0; j < X.cols(); ++j)
            n.out.at(i, j) = (X.at(i, j) - mean) * inv * G[j] + B[j];
    }
    return Value(this, push(std::move(n)));
}

Value Graph::concat_cols(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols: empty input list");
    int64_t rows = val(xs[0]).rows();
    int64_t cols = 0;
    std::vector<int64_t> idx;
    for (Value v : xs) {
        check_same_graph(v);
        if (val(v).rows() != rows) shape_error("concat_cols", val(xs[0]), val(v));
        cols += val(v).cols();
        idx.push_back(v.index());
    }
    Node n;
    n.op = Op::ConcatCols;
    n.list = static_cast<int>(lists_.size());
    n.out = Tensor(rows, cols);
    int64_t off = 0;
    for (Value v : xs) {
        const Tensor& T = val(v);
        for (int64_t i = 0; i < rows; ++i)
            for (int64_t j = 0; j < T.cols(); ++j) n.out.at(i, off + j) = T.at(i, j);
        off += T.cols();
    }
    lists_.push_back(std::move(idx));
    return Value(this, push(std::move(n)));
}

Value Graph::concat_rows(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty input list");
    int64_t cols = val(xs[0]).cols();
    int64_t rows = 0;
    std::vector<int64_t> idx;
    for (Value v : xs) {
        check_same_graph(v);
        if (val(v).cols() != cols) shape_error("concat_rows", val(xs[0]), val(v));
        rows += val(v).rows();
        idx.push_back(v.index());
    }
    Node n;
    n.op = Op::ConcatRows;
    n.list = static_cast<int>(lists_.size());
    n.out = Tensor(rows, cols);
    int64_t off = 0;
    for (Value v : xs) {
        const Tensor& T = val(v);
        for (int64_t i = 0; i < T.rows(); ++i)
            for (int64_t j = 0; j < cols; ++j) n.out.at(off + i, j) = T.at(i, j);
        off += T.rows();
    }
    lists_.push_back(std::move(idx));
    return Value(this, push(std::move(n)));
}

Value Graph::slice_cols(Value a, int64_t c0, int64_t c1) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (c0 < 0 || c1 > A.cols() || c0 >= c1) shape_error("slice_cols", A);
    Node n;
    n.op = Op::SliceCols;
    n.in0 = a.index();
    n.a0 = c0;
    n.a1 = c1;
    n.out = Tensor(A.rows(), c1 - c0);
    for (int64_t i = 0; i < A.rows(); ++i)
        for (int64_t j = c0; j < c1; ++j) n.out.at(i, j - c0) = A.at(i, j);
    return Value(this, push(std::move(n)));
}

Value Graph::slice_rows(Value a, int64_t r0, int64_t r1) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (r0 < 0 || r1 > A.rows() || r0 >= r1) shape_error("slice_rows", A);
    Node n;
    n.op = Op::SliceRows;
    n.in0 = a.index();
    n.a0 = r0;
    n.a1 = r1;
    n.out = Tensor(r1 - r0, A.cols());
    for (int64_t i = r0; i < r1; ++i)
        for (int64_t j = 0; j < A.cols(); ++j) n.out.at(i - r0, j) = A.at(i, j);
    return Value(this, push(std::move(n)));
}

Value Graph::sum_all(Value a) {
    check_same_graph(a);
    Node n;
    n.op = Op::SumAll;
    n.in0 = a.index();
    const Tensor& A = val(a);
    double s = 0.0;
    for (int64_t i = 0; i < A.size(); ++i) s += A[i];
    n.out = Tensor::scalar(s);
    return Value(this, push(std::move(n)));
}

Value Graph::mean_all(Value a) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (A.size() == 0) shape_error("mean_all", A);
    Node n;
    n.op = Op::MeanAll;
    n.in0 = a.index();
    double s = 0.0;
    for (int64_t i = 0; i < A.size(); ++i) s += A[i];
    n.out = Tensor::scalar(s / static_cast<double>(A.size()));
    return Value(this, push(std::move(n)));
}

Value Graph::row_sum(Value a) {
    check_same_graph(a);
    const Tensor& A = val(a);
    Node n;
    n.op = Op::RowSum;
    n.in0 = a.index();
    n.out = Tensor(A.rows(), 1);
    for (int64_t i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < A.cols(); ++j) s += A.at(i, j);
        n.out.at(i, 0) = s;
    }
    return Value(this, push(std::move(n)));
}

Value Graph::gather_cols(Value a, const std::vector<int64_t>& idx) {
    check_same_graph(a);
    const Tensor& A = val(a);
    if (static_cast<int64_t>(idx.size()) != A.rows())
        throw std::invalid_argument("gather_cols: index count != rows");
    for (int64_t j : idx)
        if (j < 0 || j >= A.cols()) throw std::invalid_argument("gather_cols: index out of range");
    Node n;
    n.op = Op::GatherCols;
    n.in0 = a.index();
    n.list = static_cast<int>(lists_.size());
    n.out = Tensor(A.rows(), 1);
    for (int64_t i = 0; i < A.rows(); ++i) n.out.at(i, 0) = A.at(i, idx[static_cast<size_t>(i)]);
    lists_.push_back(idx);
    return Value(this, push(std::move(n)));
}

Value Graph::min_(Value a, Value b) {
    check_same_graph(a);
    check_same_graph(b);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) shape_error("min", A, B);
    Node n;
    n.op = Op::Min;
    n.in0 = a.index();
    n.in1 = b.index();
    n.out = A;
    for (int64_t i = 0; i < n.out.size(); ++i) n.out[i] = std::min(A[i], B[i]);
    return Value(this, push(std::move(n)));
}

Value Graph::clamp_(Value a, double lo, double hi) {
    check_same_graph(a);
    Node n;
    n.op = Op::Clamp;
    n.in0 = a.index();
    n.s0 = lo;
    n.s1 = hi;
    n.out = map_tensor(val(a), [lo, hi](double x) { return std::clamp(x, lo, hi); });
    return Value(this, push(std::move(n)));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Graph::backward(Value loss) {
    check_same_graph(loss);
    const Tensor& lv = val(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 scalar, got " +
                                    lv.shape_str());
    // Reset internal scratch so repeated calls propagate a fresh pass; the
    // parameter-store accumulation below is what implements the doubling
    // contract for back-to-back backward() calls.
    for (Node& n : nodes_)
        if (!n.grad.empty()) n.grad.fill(0.0);
    ensure_grad(loss.index())[0] = 1.0;
    for (int i = loss.index(); i >= 0; --i) backprop_node(i);
    for (Node& n : nodes_) {
        if (n.param_grad == nullptr || n.grad.empty()) continue;
        if (!n.param_grad->same_shape(n.grad))
            throw std::logic_error("backward: parameter grad shape changed under the graph");
        for (int64_t i = 0; i < n.grad.size(); ++i) (*n.param_grad)[i] += n.grad[i];
    }
}

void Graph::backprop_node(int idx) {
    Node& n = nodes_[static_cast<size_t>(idx)];
    if (n.grad.empty() || n.op == Op::Leaf) return;
    const Tensor& g = n.grad;
    switch (n.op) {
    case Op::Leaf:
        break;
    case Op::MatmulNN: {
        const Tensor& A = val_at(n.in0);
        const Tensor& B = val_at(n.in1);
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        // dA += g * B^T ; dB += A^T * g  (transposed copies reuse the nn kernel)
        Tensor Bt = transposed(B);
        mm_nn(g.data(), Bt.data(), dA.data(), A.rows(), B.cols(), B.rows(), true);
        Tensor At = transposed(A);
        mm_nn(At.data(), g.data(), dB.data(), A.cols(), A.rows(), B.cols(), true);
        break;
    }
    case Op::Transpose: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < g.cols(); ++j) dA.at(j, i) += g.at(i, j);
        break;
    }
    case Op::Add: {
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        for (int64_t i = 0; i < g.size(); ++i) {
            dA[i] += g[i];
            dB[i] += g[i];
        }
        break;
    }
    case Op::AddRow: {
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i];
        for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < g.cols(); ++j) dB[j] += g.at(i, j);
        break;
    }
    case Op::AddScalarT: {
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        double s = 0.0;
        for (int64_t i = 0; i < g.size(); ++i) {
            dA[i] += g[i];
            s += g[i];
        }
        dB[0] += s;
        break;
    }
    case Op::Sub: {
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        for (int64_t i = 0; i < g.size(); ++i) {
            dA[i] += g[i];
            dB[i] -= g[i];
        }
        break;
    }
    case Op::Mul: {
        const Tensor& A = val_at(n.in0);
        const Tensor& B = val_at(n.in1);
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        for (int64_t i = 0; i < g.size(); ++i) {
            dA[i] += g[i] * B[i];
            dB[i] += g[i] * A[i];
        }
        break;
    }
    case Op::Scale: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] * n.s0;
        break;
    }
    case Op::AddConst: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i];
        break;
    }
    case Op::Tanh: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] * (1.0 - n.out[i] * n.out[i]);
        break;
    }
    case Op::Sigmoid: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] * n.out[i] * (1.0 - n.out[i]);
        break;
    }
    case Op::Relu: {
        const Tensor& A = val_at(n.in0);
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += A[i] > 0.0 ? g[i] : 0.0;
        break;
    }
    case Op::Exp: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] * n.out[i];
        break;
    }
    case Op::Log: {
        const Tensor& A = val_at(n.in0);
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] / A[i];
        break;
    }
    case Op::Abs: {
        const Tensor& A = val_at(n.in0);
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) {
            const double s = A[i] > 0.0 ? 1.0 : (A[i] < 0.0 ? -1.0 : 0.0);
            dA[i] += g[i] * s;
        }
        break;
    }
    case Op::Square: {
        const Tensor& A = val_at(n.in0);
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i) dA[i] += g[i] * 2.0 * A[i];
        break;
    }
    case Op::SoftmaxRows: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.rows(); ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < g.cols(); ++j) dot += g.at(i, j) * n.out.at(i, j);
            for (int64_t j = 0; j < g.cols(); ++j)
                dA.at(i, j) += n.out.at(i, j) * (g.at(i, j) - dot);
        }
        break;
    }
    case Op::LogSoftmaxRows: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.rows(); ++i) {
            double gsum = 0.0;
            for (int64_t j = 0; j < g.cols(); ++j) gsum += g.at(i, j);
            for (int64_t j = 0; j < g.cols(); ++j)
                dA.at(i, j) += g.at(i, j) - std::exp(n.out.at(i, j)) * gsum;
        }
        break;
    }
    case Op::LayerNormRows: {
        const Tensor& X = val_at(n.in0);
        const Tensor& G = val_at(n.in1);
        Tensor& dX = ensure_grad(n.in0);
        Tensor& dG = ensure_grad(n.in1);
        Tensor& dB = ensure_grad(n.in2);
        const double eps = n.s0;
        const int64_t c = X.cols();
        const double cn = static_cast<double>(c);
        for (int64_t i = 0; i < X.rows(); ++i) {
            double mean = 0.0;
            for (int64_t j = 0; j < c; ++j) mean += X.at(i, j);
            mean /= cn;
            double var = 0.0;
            for (int64_t j = 0; j < c; ++j) {
                const double d = X.at(i, j) - mean;
                var += d * d;
            }
            var /= cn;
            const double inv = 1.0 / std::sqrt(var + eps);
            // dxhat, and the two row-level reductions of the standard formula
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int64_t j = 0; j < c; ++j) {
                const double xhat = (X.at(i, j) - mean) * inv;
                const double dxhat = g.at(i, j) * G[j];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                dG[j] += g.at(i, j) * xhat;
                dB[j] += g.at(i, j);
            }
            for (int64_t j = 0; j < c; ++j) {
                const double xhat = (X.at(i, j) - mean) * inv;
                const double dxhat = g.at(i, j) * G[j];
                dX.at(i, j) += inv * (dxhat - sum_dxhat / cn - xhat * sum_dxhat_xhat / cn);
            }
        }
        break;
    }
    case Op::ConcatCols: {
        const auto& idx = lists_[static_cast<size_t>(n.list)];
        int64_t off = 0;
        for (int64_t ii : idx) {
            Tensor& dA = ensure_grad(static_cast<int>(ii));
            for (int64_t i = 0; i < dA.rows(); ++i)
                for (int64_t j = 0; j < dA.cols(); ++j) dA.at(i, j) += g.at(i, off + j);
            off += dA.cols();
        }
        break;
    }
    case Op::ConcatRows: {
        const auto& idx = lists_[static_cast<size_t>(n.list)];
        int64_t off = 0;
        for (int64_t ii : idx) {
            Tensor& dA = ensure_grad(static_cast<int>(ii));
            for (int64_t i = 0; i < dA.rows(); ++i)
                for (int64_t j = 0; j < dA.cols(); ++j) dA.at(i, j) += g.at(off + i, j);
            off += dA.rows();
        }
        break;
    }
    case Op::SliceCols: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < g.cols(); ++j) dA.at(i, n.a0 + j) += g.at(i, j);
        break;
    }
    case Op::SliceRows: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < g.cols(); ++j) dA.at(n.a0 + i, j) += g.at(i, j);
        break;
    }
    case Op::SumAll: {
        Tensor& dA = ensure_grad(n.in0);
        const double s = g[0];
        for (int64_t i = 0; i < dA.size(); ++i) dA[i] += s;
        break;
    }
    case Op::MeanAll: {
        Tensor& dA = ensure_grad(n.in0);
        const double s = g[0] / static_cast<double>(dA.size());
        for (int64_t i = 0; i < dA.size(); ++i) dA[i] += s;
        break;
    }
    case Op::RowSum: {
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < dA.rows(); ++i)
            for (int64_t j = 0; j < dA.cols(); ++j) dA.at(i, j) += g.at(i, 0);
        break;
    }
    case Op::GatherCols: {
        Tensor& dA = ensure_grad(n.in0);
        const auto& idx = lists_[static_cast<size_t>(n.list)];
        for (int64_t i = 0; i < g.rows(); ++i) dA.at(i, idx[static_cast<size_t>(i)]) += g.at(i, 0);
        break;
    }
    case Op::Min: {
        const Tensor& A = val_at(n.in0);
        const Tensor& B = val_at(n.in1);
        Tensor& dA = ensure_grad(n.in0);
        Tensor& dB = ensure_grad(n.in1);
        for (int64_t i = 0; i < g.size(); ++i) {
            if (A[i] <= B[i])
                dA[i] += g[i];
            else
                dB[i] += g[i];
        }
        break;
    }
    case Op::Clamp: {
        const Tensor& A = val_at(n.in0);
        Tensor& dA = ensure_grad(n.in0);
        for (int64_t i = 0; i < g.size(); ++i)
            if (A[i] >= n.s0 && A[i] <= n.s1) dA[i] += g[i];
        break;
    }
    }
}

void Graph::clear() {
    nodes_.clear();
    lists_.clear();
}

} // namespace vwapx::nn
