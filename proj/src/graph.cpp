#include "planoforge/graph.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace planoforge {

namespace {

void check_finite(const Tensor& t, const char* where) {
#ifndef NDEBUG
    if (!t.finite()) throw ValueError(std::string("non-finite value after op ") + where);
#else
    (void)t;
    (void)where;
#endif
}

[[noreturn]] void shape_fail(const char* op, const Tensor& x, const Tensor& y) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(x.shape) + " and " +
                     shape_str(y.shape));
}

struct ConvDims {
    std::size_t ic, h, w, oc, kh, kw, oh, ow;
    std::ptrdiff_t ph0, pw0;  // top/left zero padding
};

// "Same" padding in ceil mode: out = ceil(in / stride), total padding
// (out-1)*stride + k - in split with the smaller half leading.
ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride) {
    if (x.rank() != 3 || w.rank() != 4 || x.shape[0] != w.shape[1])
        shape_fail("conv2d", x, w);
    ConvDims d;
    d.ic = x.shape[0];
    d.h = x.shape[1];
    d.w = x.shape[2];
    d.oc = w.shape[0];
    d.kh = w.shape[2];
    d.kw = w.shape[3];
    const std::size_t s = static_cast<std::size_t>(stride);
    d.oh = (d.h + s - 1) / s;
    d.ow = (d.w + s - 1) / s;
    const std::ptrdiff_t pad_h =
        std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((d.oh - 1) * s + d.kh) -
                                        static_cast<std::ptrdiff_t>(d.h));
    const std::ptrdiff_t pad_w =
        std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((d.ow - 1) * s + d.kw) -
                                        static_cast<std::ptrdiff_t>(d.w));
    d.ph0 = pad_h / 2;
    d.pw0 = pad_w / 2;
    return d;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Affine: return "affine";
        case OpKind::MatMul: return "matmul";
        case OpKind::Transpose: return "transpose";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::AddBias: return "add-bias";
        case OpKind::Relu: return "relu";
        case OpKind::Silu: return "silu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Table: return "table";
        case OpKind::Clamp: return "clamp";
        case OpKind::ReduceSum: return "reduce-sum";
        case OpKind::ReduceMean: return "reduce-mean";
        case OpKind::ReduceMin: return "reduce-min";
        case OpKind::ReduceMax: return "reduce-max";
        case OpKind::SoftmaxRows: return "softmax-rows";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Reshape: return "reshape";
        case OpKind::Upsample2x: return "upsample2x";
    }
    return "?";
}

double PiecewiseTable::eval(double x) const {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

double PiecewiseTable::slope_at(double x) const {
    if (x < xs.front() || x >= xs.back()) return 0.0;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    return (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
}

NodeId Graph::push(Node n) {
    check_finite(n.value, op_name(n.kind));
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Tensor value) {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::param(const std::string& name, Tensor value) {
    Node n;
    n.kind = OpKind::Param;
    n.value = std::move(value);
    n.needs_grad = true;
    n.param_name = name;
    const NodeId id = push(std::move(n));
    params_.emplace_back(name, id);
    return id;
}

#define BINARY_PROLOG(opname)                                               \
    const Tensor& xv = nodes_[x].value;                                     \
    const Tensor& yv = nodes_[y].value;                                     \
    if (!same_shape(xv, yv)) shape_fail(opname, xv, yv);                    \
    Node n;                                                                 \
    n.inputs = {x, y};                                                      \
    n.needs_grad = nodes_[x].needs_grad || nodes_[y].needs_grad;            \
    Tensor out = Tensor::zeros(xv.shape);

NodeId Graph::add(NodeId x, NodeId y) {
    BINARY_PROLOG("add")
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] + yv.data[i];
    n.kind = OpKind::Add;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::sub(NodeId x, NodeId y) {
    BINARY_PROLOG("sub")
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] - yv.data[i];
    n.kind = OpKind::Sub;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::mul(NodeId x, NodeId y) {
    BINARY_PROLOG("mul")
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] * yv.data[i];
    n.kind = OpKind::Mul;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::div(NodeId x, NodeId y) {
    BINARY_PROLOG("div")
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] / yv.data[i];
    n.kind = OpKind::Div;
    n.value = std::move(out);
    return push(std::move(n));
}

#undef BINARY_PROLOG

#define UNARY_PROLOG                                     \
    const Tensor& xv = nodes_[x].value;                  \
    Node n;                                              \
    n.inputs = {x};                                      \
    n.needs_grad = nodes_[x].needs_grad;                 \
    Tensor out = Tensor::zeros(xv.shape);

NodeId Graph::affine(NodeId x, double a, double b) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * xv.data[i] + b;
    n.kind = OpKind::Affine;
    n.a = a;
    n.b = b;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(0.0, xv.data[i]);
    n.kind = OpKind::Relu;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::silu(NodeId x) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] * sigmoid(xv.data[i]);
    n.kind = OpKind::Silu;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::tanh_(NodeId x) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(xv.data[i]);
    n.kind = OpKind::Tanh;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::table(NodeId x, std::shared_ptr<const PiecewiseTable> t) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = t->eval(xv.data[i]);
    n.kind = OpKind::Table;
    n.table = std::move(t);
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::clamp(NodeId x, double lo, double hi) {
    UNARY_PROLOG
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(hi, std::max(lo, xv.data[i]));
    n.kind = OpKind::Clamp;
    n.a = lo;
    n.b = hi;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    double s = 0.0;
    for (double v : xv.data) s += v;
    Node n;
    n.kind = OpKind::ReduceSum;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Graph::reduce_mean(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    double s = 0.0;
    for (double v : xv.data) s += v;
    Node n;
    n.kind = OpKind::ReduceMean;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = Tensor::scalar(s / static_cast<double>(xv.size()));
    return push(std::move(n));
}

NodeId Graph::reduce_min(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < xv.size(); ++i)
        if (xv.data[i] < xv.data[arg]) arg = i;
    Node n;
    n.kind = OpKind::ReduceMin;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.axis = arg;  // extremal index for backward
    n.value = Tensor::scalar(xv.data[arg]);
    return push(std::move(n));
}

NodeId Graph::reduce_max(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < xv.size(); ++i)
        if (xv.data[i] > xv.data[arg]) arg = i;
    Node n;
    n.kind = OpKind::ReduceMax;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.axis = arg;
    n.value = Tensor::scalar(xv.data[arg]);
    return push(std::move(n));
}

#undef UNARY_PROLOG

NodeId Graph::matmul(NodeId x, NodeId y) {
    const Tensor& a = nodes_[x].value;
    const Tensor& b = nodes_[y].value;
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) shape_fail("matmul", a, b);
    const std::size_t m = a.shape[0], k = a.shape[1], nn = b.shape[1];
    Tensor out = Tensor::zeros({m, nn});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* orow = &out.data[i * nn];
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = &b.data[kk * nn];
            for (std::size_t j = 0; j < nn; ++j) orow[j] += av * brow[j];
        }
    }
    Node n;
    n.kind = OpKind::MatMul;
    n.inputs = {x, y};
    n.needs_grad = nodes_[x].needs_grad || nodes_[y].needs_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId x) {
    const Tensor& a = nodes_[x].value;
    if (a.rank() != 2) throw ShapeError("transpose: expects rank-2, got " + shape_str(a.shape));
    const std::size_t m = a.shape[0], k = a.shape[1];
    Tensor out = Tensor::zeros({k, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) out.data[j * m + i] = a.data[i * k + j];
    Node n;
    n.kind = OpKind::Transpose;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w, int stride) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wv = nodes_[w].value;
    const ConvDims d = conv_dims(xv, wv, stride);
    Tensor out = Tensor::zeros({d.oc, d.oh, d.ow});
    const std::size_t s = static_cast<std::size_t>(stride);
    for (std::size_t oc = 0; oc < d.oc; ++oc) {
        for (std::size_t ic = 0; ic < d.ic; ++ic) {
            const double* kbase = &wv.data[(oc * d.ic + ic) * d.kh * d.kw];
            const double* ibase = &xv.data[ic * d.h * d.w];
            for (std::size_t kh = 0; kh < d.kh; ++kh) {
                for (std::size_t kw = 0; kw < d.kw; ++kw) {
                    const double kv = kbase[kh * d.kw + kw];
                    if (kv == 0.0) continue;
                    for (std::size_t oh = 0; oh < d.oh; ++oh) {
                        const std::ptrdiff_t ih =
                            static_cast<std::ptrdiff_t>(oh * s + kh) - d.ph0;
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                        const double* irow = ibase + ih * static_cast<std::ptrdiff_t>(d.w);
                        double* orow = &out.data[(oc * d.oh + oh) * d.ow];
                        for (std::size_t ow = 0; ow < d.ow; ++ow) {
                            const std::ptrdiff_t iw =
                                static_cast<std::ptrdiff_t>(ow * s + kw) - d.pw0;
                            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                            orow[ow] += kv * irow[iw];
                        }
                    }
                }
            }
        }
    }
    Node n;
    n.kind = OpKind::Conv2d;
    n.inputs = {x, w};
    n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad;
    n.stride = stride;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& bv = nodes_[bias].value;
    if (bv.rank() != 1) shape_fail("add-bias", xv, bv);
    Tensor out = xv;
    if (xv.rank() == 3 && bv.shape[0] == xv.shape[0]) {
        const std::size_t plane = xv.shape[1] * xv.shape[2];
        for (std::size_t c = 0; c < xv.shape[0]; ++c) {
            const double b = bv.data[c];
            for (std::size_t i = 0; i < plane; ++i) out.data[c * plane + i] += b;
        }
    } else if (xv.rank() == 2 && bv.shape[0] == xv.shape[1]) {
        for (std::size_t r = 0; r < xv.shape[0]; ++r)
            for (std::size_t c = 0; c < xv.shape[1]; ++c) out.data[r * xv.shape[1] + c] += bv.data[c];
    } else {
        shape_fail("add-bias", xv, bv);
    }
    Node n;
    n.kind = OpKind::AddBias;
    n.inputs = {x, bias};
    n.needs_grad = nodes_[x].needs_grad || nodes_[bias].needs_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    if (xv.rank() != 2) throw ShapeError("softmax-rows: expects rank-2, got " + shape_str(xv.shape));
    const std::size_t rows = xv.shape[0], cols = xv.shape[1];
    Tensor out = Tensor::zeros(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = &xv.data[r * cols];
        double* o = &out.data[r * cols];
        double mx = in[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            o[c] = std::exp(in[c] - mx);
            z += o[c];
        }
        for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
    }
    Node n;
    n.kind = OpKind::SoftmaxRows;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::concat(const std::vector<NodeId>& xs, std::size_t axis) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    const Tensor& first = nodes_[xs[0]].value;
    if (axis >= first.rank()) throw ShapeError("concat: axis out of range for " + shape_str(first.shape));
    Shape out_shape = first.shape;
    std::size_t axis_total = 0;
    for (NodeId id : xs) {
        const Tensor& t = nodes_[id].value;
        if (t.rank() != first.rank()) shape_fail("concat", first, t);
        for (std::size_t dim = 0; dim < t.rank(); ++dim)
            if (dim != axis && t.shape[dim] != first.shape[dim]) shape_fail("concat", first, t);
        axis_total += t.shape[axis];
    }
    out_shape[axis] = axis_total;

    std::size_t outer = 1, inner = 1;
    for (std::size_t dim = 0; dim < axis; ++dim) outer *= out_shape[dim];
    for (std::size_t dim = axis + 1; dim < out_shape.size(); ++dim) inner *= out_shape[dim];

    Tensor out = Tensor::zeros(out_shape);
    std::size_t axis_off = 0;
    for (NodeId id : xs) {
        const Tensor& t = nodes_[id].value;
        const std::size_t len = t.shape[axis];
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t a = 0; a < len; ++a)
                std::copy_n(&t.data[(o * len + a) * inner], inner,
                            &out.data[(o * axis_total + axis_off + a) * inner]);
        axis_off += len;
    }
    Node n;
    n.kind = OpKind::Concat;
    n.inputs = xs;
    for (NodeId id : xs) n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    n.axis = axis;
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::slice(NodeId x, std::vector<std::size_t> offsets, std::vector<std::size_t> sizes) {
    const Tensor& xv = nodes_[x].value;
    if (offsets.size() != xv.rank() || sizes.size() != xv.rank())
        throw ShapeError("slice: offsets/sizes rank mismatch for " + shape_str(xv.shape));
    for (std::size_t dim = 0; dim < xv.rank(); ++dim)
        if (sizes[dim] == 0 || offsets[dim] + sizes[dim] > xv.shape[dim])
            throw ShapeError("slice: out of bounds for " + shape_str(xv.shape));

    Tensor out = Tensor::zeros(Shape(sizes));
    // generic strided copy over out indices
    const std::size_t rank = xv.rank();
    std::vector<std::size_t> idx(rank, 0);
    std::vector<std::size_t> in_strides(rank, 1);
    for (std::size_t dim = rank; dim-- > 1;) in_strides[dim - 1] = in_strides[dim] * xv.shape[dim];
    const std::size_t row = sizes[rank - 1];
    for (std::size_t o = 0; o < out.size(); o += row) {
        std::size_t base = 0;
        for (std::size_t dim = 0; dim < rank; ++dim) base += (offsets[dim] + idx[dim]) * in_strides[dim];
        std::copy_n(&xv.data[base], row, &out.data[o]);
        for (std::size_t dim = rank - 1; dim-- > 0;) {
            if (++idx[dim] < sizes[dim]) break;
            idx[dim] = 0;
        }
    }
    Node n;
    n.kind = OpKind::Slice;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.offsets = std::move(offsets);
    n.sizes = std::move(sizes);
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, Shape target) {
    const Tensor& xv = nodes_[x].value;
    if (shape_size(target) != xv.size())
        throw ShapeError("reshape: size mismatch " + shape_str(xv.shape) + " -> " + shape_str(target));
    Tensor out = xv;
    out.shape = target;
    Node n;
    n.kind = OpKind::Reshape;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.target_shape = std::move(target);
    n.value = std::move(out);
    return push(std::move(n));
}

NodeId Graph::upsample2x(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    if (xv.rank() != 3) throw ShapeError("upsample2x: expects [C,H,W], got " + shape_str(xv.shape));
    const std::size_t c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    Tensor out = Tensor::zeros({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < 2 * h; ++i) {
            const double* irow = &xv.data[(ch * h + i / 2) * w];
            double* orow = &out.data[(ch * 2 * h + i) * 2 * w];
            for (std::size_t j = 0; j < 2 * w; ++j) orow[j] = irow[j / 2];
        }
    Node n;
    n.kind = OpKind::Upsample2x;
    n.inputs = {x};
    n.needs_grad = nodes_[x].needs_grad;
    n.value = std::move(out);
    return push(std::move(n));
}

void Graph::ensure_grad(NodeId id) {
    if (nodes_[id].grad.data.empty()) nodes_[id].grad = Tensor::zeros(nodes_[id].value.shape);
}

void Graph::backward_one(NodeId id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
            break;
        case OpKind::Add: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gy = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx.data[i] += g.data[i];
                gy.data[i] += g.data[i];
            }
            break;
        }
        case OpKind::Sub: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gy = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx.data[i] += g.data[i];
                gy.data[i] -= g.data[i];
            }
            break;
        }
        case OpKind::Mul: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const Tensor& yv = nodes_[n.inputs[1]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gy = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx.data[i] += g.data[i] * yv.data[i];
                gy.data[i] += g.data[i] * xv.data[i];
            }
            break;
        }
        case OpKind::Div: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            const Tensor& yv = nodes_[n.inputs[1]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gy = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx.data[i] += g.data[i] / yv.data[i];
                gy.data[i] -= g.data[i] * n.value.data[i] / yv.data[i];
            }
            break;
        }
        case OpKind::Affine: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += n.a * g.data[i];
            break;
        }
        case OpKind::MatMul: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            Tensor& ga = nodes_[n.inputs[0]].grad;
            Tensor& gb = nodes_[n.inputs[1]].grad;
            const std::size_t m = a.shape[0], k = a.shape[1], nn = b.shape[1];
            // dA = G * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < nn; ++j) {
                    const double gv = g.data[i * nn + j];
                    if (gv == 0.0) continue;
                    const double* brow = &b.data[0] + j;
                    double* garow = &ga.data[i * k];
                    for (std::size_t kk = 0; kk < k; ++kk) garow[kk] += gv * brow[kk * nn];
                }
            // dB = A^T * G
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t i = 0; i < m; ++i) {
                    const double av = a.data[i * k + kk];
                    if (av == 0.0) continue;
                    const double* grow = &g.data[i * nn];
                    double* gbrow = &gb.data[kk * nn];
                    for (std::size_t j = 0; j < nn; ++j) gbrow[j] += av * grow[j];
                }
            break;
        }
        case OpKind::Transpose: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const std::size_t m = gx.shape[0], k = gx.shape[1];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < k; ++j) gx.data[i * k + j] += g.data[j * m + i];
            break;
        }
        case OpKind::Conv2d: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const Tensor& wv = nodes_[n.inputs[1]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gw = nodes_[n.inputs[1]].grad;
            const ConvDims d = conv_dims(xv, wv, n.stride);
            const std::size_t s = static_cast<std::size_t>(n.stride);
            for (std::size_t oc = 0; oc < d.oc; ++oc) {
                for (std::size_t ic = 0; ic < d.ic; ++ic) {
                    const double* kbase = &wv.data[(oc * d.ic + ic) * d.kh * d.kw];
                    double* gkbase = &gw.data[(oc * d.ic + ic) * d.kh * d.kw];
                    const double* ibase = &xv.data[ic * d.h * d.w];
                    double* gibase = &gx.data[ic * d.h * d.w];
                    for (std::size_t kh = 0; kh < d.kh; ++kh) {
                        for (std::size_t kw = 0; kw < d.kw; ++kw) {
                            const double kv = kbase[kh * d.kw + kw];
                            double kacc = 0.0;
                            for (std::size_t oh = 0; oh < d.oh; ++oh) {
                                const std::ptrdiff_t ih =
                                    static_cast<std::ptrdiff_t>(oh * s + kh) - d.ph0;
                                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                                const double* irow = ibase + ih * static_cast<std::ptrdiff_t>(d.w);
                                double* girow = gibase + ih * static_cast<std::ptrdiff_t>(d.w);
                                const double* grow = &g.data[(oc * d.oh + oh) * d.ow];
                                for (std::size_t ow = 0; ow < d.ow; ++ow) {
                                    const std::ptrdiff_t iw =
                                        static_cast<std::ptrdiff_t>(ow * s + kw) - d.pw0;
                                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                                    const double gv = grow[ow];
                                    girow[iw] += kv * gv;
                                    kacc += irow[iw] * gv;
                                }
                            }
                            gkbase[kh * d.kw + kw] += kacc;
                        }
                    }
                }
            }
            break;
        }
        case OpKind::AddBias: {
            ensure_grad(n.inputs[0]);
            ensure_grad(n.inputs[1]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            Tensor& gb = nodes_[n.inputs[1]].grad;
            const Tensor& xv = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
            if (xv.rank() == 3) {
                const std::size_t plane = xv.shape[1] * xv.shape[2];
                for (std::size_t c = 0; c < xv.shape[0]; ++c)
                    for (std::size_t i = 0; i < plane; ++i) gb.data[c] += g.data[c * plane + i];
            } else {
                for (std::size_t r = 0; r < xv.shape[0]; ++r)
                    for (std::size_t c = 0; c < xv.shape[1]; ++c)
                        gb.data[c] += g.data[r * xv.shape[1] + c];
            }
            break;
        }
        case OpKind::Relu: {
            ensure_grad(n.inputs[0]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
            break;
        }
        case OpKind::Silu: {
            ensure_grad(n.inputs[0]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double sg = sigmoid(xv.data[i]);
                gx.data[i] += g.data[i] * sg * (1.0 + xv.data[i] * (1.0 - sg));
            }
            break;
        }
        case OpKind::Tanh: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                gx.data[i] += g.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
            break;
        }
        case OpKind::Table: {
            ensure_grad(n.inputs[0]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                gx.data[i] += g.data[i] * n.table->slope_at(xv.data[i]);
            break;
        }
        case OpKind::Clamp: {
            ensure_grad(n.inputs[0]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xv.data[i] >= n.a && xv.data[i] <= n.b) gx.data[i] += g.data[i];
            break;
        }
        case OpKind::ReduceSum: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const double gv = g.data[0];
            for (double& v : gx.data) v += gv;
            break;
        }
        case OpKind::ReduceMean: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const double gv = g.data[0] / static_cast<double>(gx.size());
            for (double& v : gx.data) v += gv;
            break;
        }
        case OpKind::ReduceMin:
        case OpKind::ReduceMax: {
            ensure_grad(n.inputs[0]);
            nodes_[n.inputs[0]].grad.data[n.axis] += g.data[0];
            break;
        }
        case OpKind::SoftmaxRows: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const std::size_t rows = n.value.shape[0], cols = n.value.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = &n.value.data[r * cols];
                const double* gr = &g.data[r * cols];
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
                double* gxr = &gx.data[r * cols];
                for (std::size_t c = 0; c < cols; ++c) gxr[c] += y[c] * (gr[c] - dot);
            }
            break;
        }
        case OpKind::Concat: {
            const std::size_t axis = n.axis;
            std::size_t outer = 1, inner = 1;
            for (std::size_t dim = 0; dim < axis; ++dim) outer *= n.value.shape[dim];
            for (std::size_t dim = axis + 1; dim < n.value.rank(); ++dim) inner *= n.value.shape[dim];
            const std::size_t axis_total = n.value.shape[axis];
            std::size_t axis_off = 0;
            for (NodeId in : n.inputs) {
                ensure_grad(in);
                Tensor& gi = nodes_[in].grad;
                const std::size_t len = nodes_[in].value.shape[axis];
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t a = 0; a < len; ++a) {
                        const double* src = &g.data[(o * axis_total + axis_off + a) * inner];
                        double* dst = &gi.data[(o * len + a) * inner];
                        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                    }
                axis_off += len;
            }
            break;
        }
        case OpKind::Slice: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const std::size_t rank = xv.rank();
            std::vector<std::size_t> in_strides(rank, 1);
            for (std::size_t dim = rank; dim-- > 1;)
                in_strides[dim - 1] = in_strides[dim] * xv.shape[dim];
            std::vector<std::size_t> idx(rank, 0);
            const std::size_t row = n.sizes[rank - 1];
            for (std::size_t o = 0; o < g.size(); o += row) {
                std::size_t base = 0;
                for (std::size_t dim = 0; dim < rank; ++dim)
                    base += (n.offsets[dim] + idx[dim]) * in_strides[dim];
                for (std::size_t i = 0; i < row; ++i) gx.data[base + i] += g.data[o + i];
                for (std::size_t dim = rank - 1; dim-- > 0;) {
                    if (++idx[dim] < n.sizes[dim]) break;
                    idx[dim] = 0;
                }
            }
            break;
        }
        case OpKind::Reshape: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
            break;
        }
        case OpKind::Upsample2x: {
            ensure_grad(n.inputs[0]);
            Tensor& gx = nodes_[n.inputs[0]].grad;
            const std::size_t c = gx.shape[0], h = gx.shape[1], w = gx.shape[2];
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < 2 * h; ++i) {
                    const double* grow = &g.data[(ch * 2 * h + i) * 2 * w];
                    double* gxrow = &gx.data[(ch * h + i / 2) * w];
                    for (std::size_t j = 0; j < 2 * w; ++j) gxrow[j / 2] += grow[j];
                }
            break;
        }
    }
}

GradientMap Graph::backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1)
        throw ShapeError("backward: loss node must be scalar, got " +
                         shape_str(nodes_[loss].value.shape));
    nodes_[loss].grad = Tensor::scalar(1.0);
    for (NodeId id = loss + 1; id-- > 0;) {
        if (nodes_[id].grad.data.empty() || !nodes_[id].needs_grad) continue;
        backward_one(id);
    }
    GradientMap grads;
    for (const auto& [name, id] : params_) {
        if (nodes_[id].grad.data.empty())
            grads.emplace(name, Tensor::zeros(nodes_[id].value.shape));
        else
            grads.emplace(name, nodes_[id].grad);
    }
    return grads;
}

double grad_check(const GraphBuildFn& build, const std::vector<Tensor>& params, double step) {
    if (!(step > 1e-8 && step < 1e-2))
        throw ValueError("grad_check: step must lie in (1e-8, 1e-2)");

    const auto eval = [&](const std::vector<Tensor>& p) {
        Graph g;
        std::vector<NodeId> ids;
        ids.reserve(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) ids.push_back(g.param("p" + std::to_string(i), p[i]));
        const NodeId loss = build(g, ids);
        const double v = g.value(loss).item();
        if (!std::isfinite(v)) throw ValueError("grad_check: non-finite intermediate");
        return v;
    };

    Graph g;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < params.size(); ++i)
        ids.push_back(g.param("p" + std::to_string(i), params[i]));
    const NodeId loss = build(g, ids);
    if (!std::isfinite(g.value(loss).item())) throw ValueError("grad_check: non-finite intermediate");
    const GradientMap grads = g.backward(loss);

    double worst = 0.0;
    std::vector<Tensor> probe = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Tensor& analytic = grads.at("p" + std::to_string(pi));
        for (std::size_t i = 0; i < params[pi].size(); ++i) {
            const double saved = probe[pi].data[i];
            probe[pi].data[i] = saved + step;
            const double hi = eval(probe);
            probe[pi].data[i] = saved - step;
            const double lo = eval(probe);
            probe[pi].data[i] = saved;
            const double numeric = (hi - lo) / (2.0 * step);
            const double err = std::abs(analytic.data[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace planoforge
