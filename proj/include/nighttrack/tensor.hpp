#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nighttrack/errors.hpp"

namespace nighttrack {

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class OpKind {
    leaf,
    add,
    sub,
    add_bias,
    mul,
    div_elem,
    mul_const,
    add_const,
    scale,
    row_scale,
    matmul,
    transpose2d,
    reshape,
    concat,
    slice,
    conv2d,
    add_channel,
    layer_norm,
    softmax,
    gelu,
    sigmoid,
    mean,
    sum,
    abs_val,
    clamp_min,
    maximum,
    minimum,
    im2patches,
};

const char* op_name(OpKind k);

// Node ids come from a thread-local counter, so within one graph the creation
// order is a valid topological order and ids are unique.
uint64_t next_node_id();

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first accumulation

    uint64_t node_id = 0;
    OpKind op = OpKind::leaf;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    std::vector<double>& grad_buffer();  // allocates zeros on first use
};

// Value-semantics handle over shared storage. Copies alias the same data,
// which is what parameter registries and graph edges want.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    // Validates product(shape) == values.size() and that all values are
    // finite; non-finite input data is an error surface, not silent state.
    static Tensor from_data(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    int64_t dim(size_t i) const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    bool requires_grad() const;
    void set_requires_grad(bool v);

    bool has_grad() const;
    const std::vector<double>& grad() const;  // ContractError when absent
    void zero_grad();

    // Scalar read; tensor must have exactly one element.
    double value() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode sweep from a scalar loss. Nodes are visited in exact reverse
// creation order; intermediate grads are reset at the start of each sweep
// while leaf grads accumulate until zero_grad.
void backward(const Tensor& loss);

struct GraphNode {
    uint64_t id = 0;
    OpKind op = OpKind::leaf;
    std::vector<uint64_t> inputs;
    std::shared_ptr<TensorImpl> out;
};

// Snapshot of the op DAG reachable from `root`, ordered by node id
// (ascending), i.e. topologically.
struct Graph {
    std::vector<GraphNode> nodes;
    static Graph trace(const Tensor& root);
};

}  // namespace nighttrack
