#include "nighttrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace nighttrack {

namespace {
thread_local uint64_t g_node_counter = 0;
}

uint64_t next_node_id() { return ++g_node_counter; }

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::add_bias: return "add_bias";
        case OpKind::mul: return "mul";
        case OpKind::div_elem: return "div";
        case OpKind::mul_const: return "mul_const";
        case OpKind::add_const: return "add_const";
        case OpKind::scale: return "scale";
        case OpKind::row_scale: return "row_scale";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose2d: return "transpose";
        case OpKind::reshape: return "reshape";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::conv2d: return "conv2d";
        case OpKind::add_channel: return "add_channel";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::softmax: return "softmax";
        case OpKind::gelu: return "gelu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::mean: return "mean";
        case OpKind::sum: return "sum";
        case OpKind::abs_val: return "abs";
        case OpKind::clamp_min: return "clamp_min";
        case OpKind::maximum: return "maximum";
        case OpKind::minimum: return "minimum";
        case OpKind::im2patches: return "im2patches";
    }
    return "?";
}

std::vector<double>& TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

static std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->node_id = next_node_id();
    return impl;
}

Tensor Tensor::zeros(Shape shape) {
    const int64_t n = numel_of(shape);
    if (n < 0) throw ShapeError("zeros: negative extent in " + shape_str(shape));
    return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
    const int64_t n = numel_of(shape);
    if (n < 0) throw ShapeError("full: negative extent in " + shape_str(shape));
    return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<size_t>(n), value)));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel_of(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("from_data: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericsError("from_data: non-finite input value");
    }
    auto impl = make_impl(std::move(shape), std::move(values));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return impl_->numel(); }
int64_t Tensor::dim(size_t i) const { return impl_->shape.at(i); }
std::vector<double>& Tensor::data() { return impl_->data; }
const std::vector<double>& Tensor::data() const { return impl_->data; }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) throw ContractError("grad: no gradient accumulated");
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

double Tensor::value() const {
    if (numel() != 1) throw ContractError("value: tensor is not scalar, shape " + shape_str(shape()));
    return impl_->data[0];
}

namespace {

// All impls reachable through parent edges, deduplicated.
std::vector<TensorImpl*> collect_reachable(const std::shared_ptr<TensorImpl>& root) {
    std::vector<TensorImpl*> out;
    std::unordered_set<TensorImpl*> seen;
    std::vector<TensorImpl*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        TensorImpl* cur = stack.back();
        stack.pop_back();
        out.push_back(cur);
        for (const auto& p : cur->parents) {
            if (seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    return out;
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ContractError("backward: undefined tensor");
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    auto root = loss.impl();
    std::vector<TensorImpl*> nodes = collect_reachable(root);
    // Unique creation ids give the exact reverse topological order.
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorImpl* a, const TensorImpl* b) { return a->node_id > b->node_id; });

    // Intermediates restart from zero every sweep; leaves keep accumulating.
    for (TensorImpl* n : nodes) {
        if (n->op != OpKind::leaf) n->grad.clear();
    }
    root->grad_buffer()[0] += 1.0;

    for (TensorImpl* n : nodes) {
        if (n->grad.empty()) continue;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

Graph Graph::trace(const Tensor& root) {
    Graph g;
    if (!root.defined()) return g;
    std::vector<TensorImpl*> nodes = collect_reachable(root.impl());
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorImpl* a, const TensorImpl* b) { return a->node_id < b->node_id; });
    // Keep impls alive through shared ownership: re-walk to grab shared_ptrs.
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::shared_ptr<TensorImpl>> owned;
    std::vector<std::shared_ptr<TensorImpl>> stack{root.impl()};
    seen.insert(root.impl().get());
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        owned.push_back(cur);
        for (const auto& p : cur->parents) {
            if (seen.insert(p.get()).second) stack.push_back(p);
        }
    }
    std::sort(owned.begin(), owned.end(),
              [](const auto& a, const auto& b) { return a->node_id < b->node_id; });
    for (const auto& impl : owned) {
        GraphNode n;
        n.id = impl->node_id;
        n.op = impl->op;
        for (const auto& p : impl->parents) n.inputs.push_back(p->node_id);
        n.out = impl;
        g.nodes.push_back(std::move(n));
    }
    return g;
}

}  // namespace nighttrack
