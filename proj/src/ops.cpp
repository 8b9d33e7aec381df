#include "nighttrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace nighttrack {

namespace {

constexpr double kLnEps = 1e-12;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_finite(const std::vector<double>& v, OpKind kind) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericsError(std::string(op_name(kind)) + ": produced non-finite value");
        }
    }
}

using Impl = std::shared_ptr<TensorImpl>;

Tensor make_op(OpKind kind, Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs,
               std::function<void(TensorImpl&)> backward_fn) {
    check_finite(data, kind);
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->node_id = next_node_id();
    impl->op = kind;
    bool rg = false;
    for (const Tensor& t : inputs) rg = rg || t.requires_grad();
    impl->requires_grad = rg;
    if (rg) {
        for (const Tensor& t : inputs) impl->parents.push_back(t.impl());
        impl->backward_fn = std::move(backward_fn);
    }
    return Tensor(impl);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// Raw accumulate-into-C gemm kernels; C must be sized m*n.
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + kk * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C{m,n} += A{m,k} * B{n,k}^T
void gemm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] += acc;
        }
    }
}

// C{m,n} += A{K,m}^T * B{K,n}
void gemm_tn(const double* a, const double* b, double* c, int64_t bigk, int64_t m, int64_t n) {
    for (int64_t kk = 0; kk < bigk; ++kk) {
        const double* arow = a + kk * m;
        const double* brow = b + kk * n;
        for (int64_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op(OpKind::add, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        for (int s = 0; s < 2; ++s) {
            auto& p = self.parents[s];
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op(OpKind::sub, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op(OpKind::mul, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
    return make_op(OpKind::div_elem, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb->data[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) {
                const double bv = pb->data[i];
                g[i] -= self.grad[i] * pa->data[i] / (bv * bv);
            }
        }
    });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "maximum");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
    return make_op(OpKind::maximum, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const bool first = pa->data[i] >= pb->data[i];
            if (first && pa->requires_grad) pa->grad_buffer()[i] += self.grad[i];
            if (!first && pb->requires_grad) pb->grad_buffer()[i] += self.grad[i];
        }
    });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "minimum");
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.data()[i], b.data()[i]);
    return make_op(OpKind::minimum, a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const bool first = pa->data[i] <= pb->data[i];
            if (first && pa->requires_grad) pa->grad_buffer()[i] += self.grad[i];
            if (!first && pb->requires_grad) pb->grad_buffer()[i] += self.grad[i];
        }
    });
}

Tensor mul_const(const Tensor& a, double c) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return make_op(OpKind::mul_const, a.shape(), std::move(out), {a}, [c](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
    });
}

Tensor add_const(const Tensor& a, double c) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    return make_op(OpKind::add_const, a.shape(), std::move(out), {a}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor clamp_min(const Tensor& a, double c) {
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], c);
    return make_op(OpKind::clamp_min, a.shape(), std::move(out), {a}, [c](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            if (p->data[i] > c) g[i] += self.grad[i];
        }
    });
}

Tensor scale(const Tensor& a, const Tensor& s) {
    if (s.numel() != 1) throw ShapeError("scale: scalar tensor must have one element");
    const double sv = s.data()[0];
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * sv;
    return make_op(OpKind::scale, a.shape(), std::move(out), {a, s}, [](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& ps = self.parents[1];
        const double sv = ps->data[0];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += sv * self.grad[i];
        }
        if (ps->requires_grad) {
            double acc = 0.0;
            for (size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa->data[i];
            ps->grad_buffer()[0] += acc;
        }
    });
}

Tensor row_scale(const Tensor& a, const Tensor& gates) {
    if (a.shape().size() != 2) throw ShapeError("row_scale: expected 2-D input");
    if (gates.shape().size() != 1 || gates.dim(0) != a.dim(0)) {
        throw ShapeError("row_scale: gate count " + shape_str(gates.shape()) +
                         " does not match rows of " + shape_str(a.shape()));
    }
    const int64_t m = a.dim(0), d = a.dim(1);
    std::vector<double> out(a.data().size());
    for (int64_t i = 0; i < m; ++i) {
        const double gv = gates.data()[static_cast<size_t>(i)];
        for (int64_t j = 0; j < d; ++j) {
            out[static_cast<size_t>(i * d + j)] = a.data()[static_cast<size_t>(i * d + j)] * gv;
        }
    }
    return make_op(OpKind::row_scale, a.shape(), std::move(out), {a, gates},
                   [m, d](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pg = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (int64_t i = 0; i < m; ++i) {
                const double gv = pg->data[static_cast<size_t>(i)];
                for (int64_t j = 0; j < d; ++j) {
                    g[static_cast<size_t>(i * d + j)] += gv * self.grad[static_cast<size_t>(i * d + j)];
                }
            }
        }
        if (pg->requires_grad) {
            auto& g = pg->grad_buffer();
            for (int64_t i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int64_t j = 0; j < d; ++j) {
                    acc += self.grad[static_cast<size_t>(i * d + j)] * pa->data[static_cast<size_t>(i * d + j)];
                }
                g[static_cast<size_t>(i)] += acc;
            }
        }
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.shape().size() != 2) throw ShapeError("add_bias: expected 2-D input");
    if (bias.shape().size() != 1 || bias.dim(0) != x.dim(1)) {
        throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " vs input " +
                         shape_str(x.shape()));
    }
    const int64_t m = x.dim(0), d = x.dim(1);
    std::vector<double> out(x.data().size());
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < d; ++j) {
            out[static_cast<size_t>(i * d + j)] =
                x.data()[static_cast<size_t>(i * d + j)] + bias.data()[static_cast<size_t>(j)];
        }
    }
    return make_op(OpKind::add_bias, x.shape(), std::move(out), {x, bias},
                   [m, d](TensorImpl& self) {
        auto& px = self.parents[0];
        auto& pb = self.parents[1];
        if (px->requires_grad) {
            auto& g = px->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t j = 0; j < d; ++j) {
                    g[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * d + j)];
                }
            }
        }
    });
}

Tensor add_channel(const Tensor& x, const Tensor& offset, double sign) {
    if (x.shape().size() != 3) throw ShapeError("add_channel: expected {C,H,W} input");
    if (offset.shape().size() != 1 || offset.dim(0) != x.dim(0)) {
        throw ShapeError("add_channel: offset " + shape_str(offset.shape()) + " vs input " +
                         shape_str(x.shape()));
    }
    const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    std::vector<double> out(x.data().size());
    for (int64_t ch = 0; ch < c; ++ch) {
        const double ov = sign * offset.data()[static_cast<size_t>(ch)];
        for (int64_t i = 0; i < hw; ++i) {
            out[static_cast<size_t>(ch * hw + i)] = x.data()[static_cast<size_t>(ch * hw + i)] + ov;
        }
    }
    return make_op(OpKind::add_channel, x.shape(), std::move(out), {x, offset},
                   [c, hw, sign](TensorImpl& self) {
        auto& px = self.parents[0];
        auto& po = self.parents[1];
        if (px->requires_grad) {
            auto& g = px->grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (po->requires_grad) {
            auto& g = po->grad_buffer();
            for (int64_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int64_t i = 0; i < hw; ++i) acc += self.grad[static_cast<size_t>(ch * hw + i)];
                g[static_cast<size_t>(ch)] += sign * acc;
            }
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    return make_op(OpKind::matmul, {m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            gemm_nt(self.grad.data(), pb->data.data(), pa->grad_buffer().data(), m, n, k);
        }
        if (pb->requires_grad) {
            gemm_tn(pa->data.data(), self.grad.data(), pb->grad_buffer().data(), m, k, n);
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw ShapeError("transpose: expected 2-D input");
    const int64_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.data().size());
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            out[static_cast<size_t>(j * m + i)] = a.data()[static_cast<size_t>(i * n + j)];
        }
    }
    return make_op(OpKind::transpose2d, {n, m}, std::move(out), {a}, [m, n](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                g[static_cast<size_t>(i * n + j)] += self.grad[static_cast<size_t>(j * m + i)];
            }
        }
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    }
    std::vector<double> out = a.data();
    return make_op(OpKind::reshape, std::move(shape), std::move(out), {a}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int dim) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const size_t rank = parts[0].shape().size();
    if (rank < 1 || rank > 2 || dim < 0 || dim >= static_cast<int>(rank)) {
        throw ShapeError("concat: unsupported rank/dim");
    }
    for (const Tensor& t : parts) {
        if (t.shape().size() != rank) throw ShapeError("concat: mixed ranks");
        for (size_t d = 0; d < rank; ++d) {
            if (static_cast<int>(d) != dim && t.shape()[d] != parts[0].shape()[d]) {
                throw ShapeError("concat: shape mismatch " + shape_str(t.shape()) + " vs " +
                                 shape_str(parts[0].shape()));
            }
        }
    }
    Shape out_shape = parts[0].shape();
    int64_t total = 0;
    for (const Tensor& t : parts) total += t.shape()[static_cast<size_t>(dim)];
    out_shape[static_cast<size_t>(dim)] = total;

    std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
    std::vector<int64_t> extents;  // size along dim, per part
    for (const Tensor& t : parts) extents.push_back(t.shape()[static_cast<size_t>(dim)]);

    if (rank == 1 || dim == 0) {
        // Contiguous blocks.
        size_t off = 0;
        for (const Tensor& t : parts) {
            std::copy(t.data().begin(), t.data().end(), out.begin() + static_cast<std::ptrdiff_t>(off));
            off += t.data().size();
        }
    } else {
        // dim == 1, rank 2: interleave rows.
        const int64_t rows = out_shape[0];
        const int64_t out_cols = out_shape[1];
        for (int64_t r = 0; r < rows; ++r) {
            int64_t col = 0;
            for (const Tensor& t : parts) {
                const int64_t cols = t.dim(1);
                const double* src = t.data().data() + r * cols;
                std::copy(src, src + cols, out.data() + r * out_cols + col);
                col += cols;
            }
        }
    }
    return make_op(OpKind::concat, out_shape, std::move(out), parts,
                   [dim, rank, extents, out_shape](TensorImpl& self) {
        if (rank == 1 || dim == 0) {
            size_t off = 0;
            for (auto& p : self.parents) {
                const size_t n = p->data.size();
                if (p->requires_grad) {
                    auto& g = p->grad_buffer();
                    for (size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
                }
                off += n;
            }
        } else {
            const int64_t rows = out_shape[0];
            const int64_t out_cols = out_shape[1];
            int64_t col = 0;
            for (size_t s = 0; s < self.parents.size(); ++s) {
                auto& p = self.parents[s];
                const int64_t cols = extents[s];
                if (p->requires_grad) {
                    auto& g = p->grad_buffer();
                    for (int64_t r = 0; r < rows; ++r) {
                        for (int64_t jj = 0; jj < cols; ++jj) {
                            g[static_cast<size_t>(r * cols + jj)] +=
                                self.grad[static_cast<size_t>(r * out_cols + col + jj)];
                        }
                    }
                }
                col += cols;
            }
        }
    });
}

Tensor slice(const Tensor& a, int dim, int64_t start, int64_t len) {
    const size_t rank = a.shape().size();
    if (rank < 1 || rank > 2 || dim < 0 || dim >= static_cast<int>(rank)) {
        throw ShapeError("slice: unsupported rank/dim");
    }
    const int64_t extent = a.shape()[static_cast<size_t>(dim)];
    if (start < 0 || len <= 0 || start + len > extent) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of extent " + std::to_string(extent));
    }
    Shape out_shape = a.shape();
    out_shape[static_cast<size_t>(dim)] = len;
    std::vector<double> out(static_cast<size_t>(numel_of(out_shape)));
    if (rank == 1 || dim == 0) {
        const int64_t row_elems = (rank == 2) ? a.dim(1) : 1;
        std::copy(a.data().begin() + start * row_elems,
                  a.data().begin() + (start + len) * row_elems, out.begin());
    } else {
        const int64_t rows = a.dim(0), cols = a.dim(1);
        for (int64_t r = 0; r < rows; ++r) {
            std::copy(a.data().begin() + r * cols + start, a.data().begin() + r * cols + start + len,
                      out.begin() + r * len);
        }
    }
    return make_op(OpKind::slice, out_shape, std::move(out), {a},
                   [dim, rank, start, len](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        if (rank == 1 || dim == 0) {
            const int64_t row_elems = (rank == 2) ? p->shape[1] : 1;
            for (int64_t i = 0; i < len * row_elems; ++i) {
                g[static_cast<size_t>(start * row_elems + i)] += self.grad[static_cast<size_t>(i)];
            }
        } else {
            const int64_t rows = p->shape[0], cols = p->shape[1];
            for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < len; ++j) {
                    g[static_cast<size_t>(r * cols + start + j)] +=
                        self.grad[static_cast<size_t>(r * len + j)];
                }
            }
        }
    });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int pad) {
    if (input.shape().size() != 3) throw ShapeError("conv2d: input must be {C,H,W}");
    if (weight.shape().size() != 4) throw ShapeError("conv2d: weight must be {O,C,kh,kw}");
    if (pad < 0) throw ShapeError("conv2d: padding must be >= 0");
    const int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int64_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != c) {
        throw ShapeError("conv2d: weight channels " + std::to_string(weight.dim(1)) +
                         " vs input channels " + std::to_string(c));
    }
    if (bias.shape().size() != 1 || bias.dim(0) != o) throw ShapeError("conv2d: bad bias shape");
    const int64_t ho = h + 2 * pad - kh + 1;
    const int64_t wo = w + 2 * pad - kw + 1;
    if (ho < 1 || wo < 1) throw ShapeError("conv2d: kernel larger than padded input");

    std::vector<double> out(static_cast<size_t>(o * ho * wo), 0.0);
    const double* in = input.data().data();
    const double* wt = weight.data().data();
    for (int64_t oc = 0; oc < o; ++oc) {
        double* oplane = out.data() + oc * ho * wo;
        const double bv = bias.data()[static_cast<size_t>(oc)];
        for (int64_t i = 0; i < ho * wo; ++i) oplane[i] = bv;
        for (int64_t ic = 0; ic < c; ++ic) {
            const double* iplane = in + ic * h * w;
            const double* wk = wt + ((oc * c + ic) * kh) * kw;
            for (int64_t ky = 0; ky < kh; ++ky) {
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const double wv = wk[ky * kw + kx];
                    if (wv == 0.0) continue;
                    for (int64_t y = 0; y < ho; ++y) {
                        const int64_t yi = y + ky - pad;
                        if (yi < 0 || yi >= h) continue;
                        const double* irow = iplane + yi * w;
                        double* orow = oplane + y * wo;
                        for (int64_t x = 0; x < wo; ++x) {
                            const int64_t xi = x + kx - pad;
                            if (xi < 0 || xi >= w) continue;
                            orow[x] += wv * irow[xi];
                        }
                    }
                }
            }
        }
    }
    return make_op(OpKind::conv2d, {o, ho, wo}, std::move(out), {input, weight, bias},
                   [c, h, w, o, kh, kw, ho, wo, pad](TensorImpl& self) {
        auto& pin = self.parents[0];
        auto& pw = self.parents[1];
        auto& pb = self.parents[2];
        const double* g = self.grad.data();
        if (pb->requires_grad) {
            auto& gb = pb->grad_buffer();
            for (int64_t oc = 0; oc < o; ++oc) {
                double acc = 0.0;
                const double* gp = g + oc * ho * wo;
                for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
                gb[static_cast<size_t>(oc)] += acc;
            }
        }
        if (pw->requires_grad) {
            auto& gw = pw->grad_buffer();
            const double* in = pin->data.data();
            for (int64_t oc = 0; oc < o; ++oc) {
                const double* gp = g + oc * ho * wo;
                for (int64_t ic = 0; ic < c; ++ic) {
                    const double* iplane = in + ic * h * w;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int64_t y = 0; y < ho; ++y) {
                                const int64_t yi = y + ky - pad;
                                if (yi < 0 || yi >= h) continue;
                                const double* irow = iplane + yi * w;
                                const double* grow = gp + y * wo;
                                for (int64_t x = 0; x < wo; ++x) {
                                    const int64_t xi = x + kx - pad;
                                    if (xi < 0 || xi >= w) continue;
                                    acc += grow[x] * irow[xi];
                                }
                            }
                            gw[static_cast<size_t>(((oc * c + ic) * kh + ky) * kw + kx)] += acc;
                        }
                    }
                }
            }
        }
        if (pin->requires_grad) {
            auto& gi = pin->grad_buffer();
            const double* wt = pw->data.data();
            for (int64_t oc = 0; oc < o; ++oc) {
                const double* gp = g + oc * ho * wo;
                for (int64_t ic = 0; ic < c; ++ic) {
                    double* giplane = gi.data() + ic * h * w;
                    const double* wk = wt + ((oc * c + ic) * kh) * kw;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const double wv = wk[ky * kw + kx];
                            if (wv == 0.0) continue;
                            for (int64_t y = 0; y < ho; ++y) {
                                const int64_t yi = y + ky - pad;
                                if (yi < 0 || yi >= h) continue;
                                double* girow = giplane + yi * w;
                                const double* grow = gp + y * wo;
                                for (int64_t x = 0; x < wo; ++x) {
                                    const int64_t xi = x + kx - pad;
                                    if (xi < 0 || xi >= w) continue;
                                    girow[xi] += wv * grow[x];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

Tensor im2patches(const Tensor& image, int patch) {
    if (image.shape().size() != 3) throw ShapeError("im2patches: input must be {C,H,W}");
    const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (patch <= 0 || h % patch != 0 || w % patch != 0) {
        throw ShapeError("im2patches: patch " + std::to_string(patch) + " does not divide " +
                         shape_str(image.shape()));
    }
    const int64_t gy = h / patch, gx = w / patch;
    const int64_t m = gy * gx, d = c * patch * patch;
    std::vector<double> out(static_cast<size_t>(m * d));
    const double* in = image.data().data();
    for (int64_t py = 0; py < gy; ++py) {
        for (int64_t px = 0; px < gx; ++px) {
            double* row = out.data() + (py * gx + px) * d;
            for (int64_t ch = 0; ch < c; ++ch) {
                for (int64_t yy = 0; yy < patch; ++yy) {
                    const double* src = in + ch * h * w + (py * patch + yy) * w + px * patch;
                    double* dst = row + (ch * patch + yy) * patch;
                    std::copy(src, src + patch, dst);
                }
            }
        }
    }
    return make_op(OpKind::im2patches, {m, d}, std::move(out), {image},
                   [c, h, w, patch, gy, gx, d](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (int64_t py = 0; py < gy; ++py) {
            for (int64_t px = 0; px < gx; ++px) {
                const double* row = self.grad.data() + (py * gx + px) * d;
                for (int64_t ch = 0; ch < c; ++ch) {
                    for (int64_t yy = 0; yy < patch; ++yy) {
                        double* dst = g.data() + ch * h * w + (py * patch + yy) * w + px * patch;
                        const double* src = row + (ch * patch + yy) * patch;
                        for (int64_t xx = 0; xx < patch; ++xx) dst[xx] += src[xx];
                    }
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.shape().size() != 2) throw ShapeError("layer_norm: expected 2-D input");
    const int64_t m = x.dim(0), d = x.dim(1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm: affine params must be {D}");
    }
    std::vector<double> out(x.data().size());
    std::vector<double> mu(static_cast<size_t>(m)), ivar(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) {
        const double* row = x.data().data() + i * d;
        double s = 0.0;
        for (int64_t j = 0; j < d; ++j) s += row[j];
        const double mean = s / static_cast<double>(d);
        double v = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            v += c * c;
        }
        v /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(v + kLnEps);
        mu[static_cast<size_t>(i)] = mean;
        ivar[static_cast<size_t>(i)] = inv;
        double* orow = out.data() + i * d;
        for (int64_t j = 0; j < d; ++j) {
            orow[j] = (row[j] - mean) * inv * gamma.data()[static_cast<size_t>(j)] +
                      beta.data()[static_cast<size_t>(j)];
        }
    }
    return make_op(OpKind::layer_norm, x.shape(), std::move(out), {x, gamma, beta},
                   [m, d, mu = std::move(mu), ivar = std::move(ivar)](TensorImpl& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        const double dn = static_cast<double>(d);
        for (int64_t i = 0; i < m; ++i) {
            const double* row = px->data.data() + i * d;
            const double* grow = self.grad.data() + i * d;
            const double mean = mu[static_cast<size_t>(i)];
            const double inv = ivar[static_cast<size_t>(i)];
            // dxhat, plus affine grads.
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int64_t j = 0; j < d; ++j) {
                const double xhat = (row[j] - mean) * inv;
                const double dxhat = grow[j] * pg->data[static_cast<size_t>(j)];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                if (pg->requires_grad) pg->grad_buffer()[static_cast<size_t>(j)] += grow[j] * xhat;
                if (pb->requires_grad) pb->grad_buffer()[static_cast<size_t>(j)] += grow[j];
            }
            if (px->requires_grad) {
                auto& gx = px->grad_buffer();
                for (int64_t j = 0; j < d; ++j) {
                    const double xhat = (row[j] - mean) * inv;
                    const double dxhat = grow[j] * pg->data[static_cast<size_t>(j)];
                    gx[static_cast<size_t>(i * d + j)] +=
                        inv * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
                }
            }
        }
    });
}

Tensor softmax(const Tensor& x) {
    if (x.shape().size() != 2) throw ShapeError("softmax: expected 2-D input");
    const int64_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.data().size());
    for (int64_t i = 0; i < m; ++i) {
        const double* row = x.data().data() + i * n;
        double mx = row[0];
        for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        double* orow = out.data() + i * n;
        for (int64_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        const double invs = 1.0 / s;
        for (int64_t j = 0; j < n; ++j) orow[j] *= invs;
    }
    return make_op(OpKind::softmax, x.shape(), std::move(out), {x}, [m, n](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (int64_t i = 0; i < m; ++i) {
            const double* prob = self.data.data() + i * n;
            const double* grow = self.grad.data() + i * n;
            double dot = 0.0;
            for (int64_t j = 0; j < n; ++j) dot += prob[j] * grow[j];
            for (int64_t j = 0; j < n; ++j) {
                g[static_cast<size_t>(i * n + j)] += prob[j] * (grow[j] - dot);
            }
        }
    });
}

Tensor gelu(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = x.data()[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    return make_op(OpKind::gelu, x.shape(), std::move(out), {x}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            const double v = p->data[i];
            const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            g[i] += self.grad[i] * (phi + v * pdf);
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
    return make_op(OpKind::sigmoid, x.shape(), std::move(out), {x}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            const double s = self.data[i];
            g[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Tensor abs(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x.data()[i]);
    return make_op(OpKind::abs_val, x.shape(), std::move(out), {x}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        for (size_t i = 0; i < g.size(); ++i) {
            const double v = p->data[i];
            // Subgradient 0 at the kink.
            if (v > 0.0) g[i] += self.grad[i];
            else if (v < 0.0) g[i] -= self.grad[i];
        }
    });
}

Tensor mean(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double n = static_cast<double>(x.numel());
    return make_op(OpKind::mean, {1}, {s / n}, {x}, [n](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        const double gv = self.grad[0] / n;
        for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op(OpKind::sum, {1}, {s}, {x}, [](TensorImpl& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->grad_buffer();
        const double gv = self.grad[0];
        for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
    });
}

}  // namespace nighttrack
