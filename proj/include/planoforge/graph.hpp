#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "planoforge/tensor.hpp"

namespace planoforge {

using NodeId = std::uint32_t;

// Monotone piecewise-linear map given by sorted knots. Evaluation clamps to
// the end values outside the knot range. Exact at the knots, which is what
// the grid readouts rely on.
struct PiecewiseTable {
    std::vector<double> xs;  // strictly increasing
    std::vector<double> ys;

    double eval(double x) const;
    double slope_at(double x) const;  // derivative; right-continuous at knots, 0 outside
};

enum class OpKind : std::uint8_t {
    Input,
    Param,
    Add,
    Sub,
    Mul,
    Div,
    Affine,      // a*x + b
    MatMul,      // [m,k] x [k,n]
    Transpose,   // 2-D
    Conv2d,      // x [IC,H,W], w [OC,IC,KH,KW], stride, zero-padded "same" (ceil mode)
    AddBias,     // [C,H,W] + [C], or [N,M] + [M]
    Relu,
    Silu,
    Tanh,
    Table,       // piecewise-linear lookup
    Clamp,
    ReduceSum,   // full reduction to scalar
    ReduceMean,
    ReduceMin,   // gradient routed to the first extremal entry
    ReduceMax,
    SoftmaxRows,  // [N,M], softmax along each row
    Concat,
    Slice,
    Reshape,
    Upsample2x,  // [C,H,W] -> [C,2H,2W], nearest neighbor
};

const char* op_name(OpKind k);

struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;  // allocated during backward
    bool needs_grad = false;

    // op-specific parameters
    double a = 0.0, b = 0.0;                  // Affine / Clamp bounds
    int stride = 1;                           // Conv2d
    std::size_t axis = 0;                     // Concat
    std::vector<std::size_t> offsets, sizes;  // Slice
    Shape target_shape;                       // Reshape
    std::shared_ptr<const PiecewiseTable> table;
    std::string param_name;
};

using GradientMap = std::map<std::string, Tensor>;

// Reverse-mode autodiff tape. Node order is the creation order, which is
// topological by construction; backward walks it once in reverse.
// Single-threaded per graph.
class Graph {
  public:
    NodeId input(Tensor value);
    NodeId param(const std::string& name, Tensor value);

    NodeId add(NodeId x, NodeId y);
    NodeId sub(NodeId x, NodeId y);
    NodeId mul(NodeId x, NodeId y);
    NodeId div(NodeId x, NodeId y);
    NodeId affine(NodeId x, double a, double b);
    NodeId matmul(NodeId x, NodeId y);
    NodeId transpose(NodeId x);
    NodeId conv2d(NodeId x, NodeId w, int stride = 1);
    NodeId add_bias(NodeId x, NodeId bias);
    NodeId relu(NodeId x);
    NodeId silu(NodeId x);
    NodeId tanh_(NodeId x);
    NodeId table(NodeId x, std::shared_ptr<const PiecewiseTable> t);
    NodeId clamp(NodeId x, double lo, double hi);
    NodeId reduce_sum(NodeId x);
    NodeId reduce_mean(NodeId x);
    NodeId reduce_min(NodeId x);
    NodeId reduce_max(NodeId x);
    NodeId softmax_rows(NodeId x);
    NodeId concat(const std::vector<NodeId>& xs, std::size_t axis);
    NodeId slice(NodeId x, std::vector<std::size_t> offsets, std::vector<std::size_t> sizes);
    NodeId reshape(NodeId x, Shape target);
    NodeId upsample2x(NodeId x);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Gradient of a scalar loss with respect to every registered parameter.
    // Parameters that do not feed the loss get zero gradients.
    GradientMap backward(NodeId loss);

  private:
    NodeId push(Node n);
    void ensure_grad(NodeId id);
    void backward_one(NodeId id);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> params_;
};

// Max over all parameter entries of |analytic - numeric| / max(1, |numeric|),
// with numeric gradients from central differences of the rebuilt graph.
// `build` must construct the same scalar loss for any parameter values.
using GraphBuildFn = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;
double grad_check(const GraphBuildFn& build, const std::vector<Tensor>& params, double step);

}  // namespace planoforge
