#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "graphtrans/tensor.hpp"

namespace graphtrans {

namespace detail {

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatMap = Eigen::Map<RowMat<S>>;
template <class S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;
template <class S>
using VecMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <class S>
using ConstVecMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
    }
}

inline std::size_t leading_numel(const Shape& s, int trailing) {
    std::size_t n = 1;
    for (std::size_t i = 0; i + static_cast<std::size_t>(trailing) < s.size(); ++i) {
        n *= static_cast<std::size_t>(s[i]);
    }
    return n;
}

inline std::vector<std::size_t> row_major_strides(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) {
        st[i - 1] = st[i] * static_cast<std::size_t>(s[i]);
    }
    return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "add");
    Tensor<S> out(a.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(a.ptr(), a.numel()) +
        detail::ConstVecMap<S>(b.ptr(), b.numel());
    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (a.requires_grad()) {
                detail::VecMap<S>(a.grad().data(), a.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
            if (b.requires_grad()) {
                detail::VecMap<S>(b.grad().data(), b.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "sub");
    Tensor<S> out(a.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(a.ptr(), a.numel()) -
        detail::ConstVecMap<S>(b.ptr(), b.numel());
    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (a.requires_grad()) {
                detail::VecMap<S>(a.grad().data(), a.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
            if (b.requires_grad()) {
                detail::VecMap<S>(b.grad().data(), b.numel()) -=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a.shape(), b.shape(), "mul");
    Tensor<S> out(a.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(a.ptr(), a.numel()) *
        detail::ConstVecMap<S>(b.ptr(), b.numel());
    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (a.requires_grad()) {
                detail::VecMap<S>(a.grad().data(), a.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size()) *
                    detail::ConstVecMap<S>(b.ptr(), b.numel());
            }
            if (b.requires_grad()) {
                detail::VecMap<S>(b.grad().data(), b.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size()) *
                    detail::ConstVecMap<S>(a.ptr(), a.numel());
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
    Tensor<S> out(x.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(x.ptr(), x.numel()) * factor;
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out, factor]() mutable {
            if (!out.grad_allocated()) return;
            detail::VecMap<S>(x.grad().data(), x.numel()) +=
                detail::ConstVecMap<S>(out.grad().data(), out.numel()) * factor;
        });
    }
    return out;
}

// Multiply by a learnable single-element tensor.
template <class S>
Tensor<S> scale_by(const Tensor<S>& x, const Tensor<S>& s) {
    if (s.numel() != 1) {
        throw ShapeError("scale_by: scale must be a single-element tensor, got " +
                         shape_str(s.shape()));
    }
    Tensor<S> out(x.shape());
    const S f = s.data()[0];
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(x.ptr(), x.numel()) * f;
    if (detail::recording<S>({&x, &s})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, s, out, f]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (x.requires_grad()) {
                detail::VecMap<S>(x.grad().data(), x.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size()) * f;
            }
            if (s.requires_grad()) {
                S acc = S(0);  // serial: keep reductions alignment-independent
                for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * x.ptr()[i];
                s.grad()[0] += acc;
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
    Tensor<S> out(x.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(x.ptr(), x.numel()).max(S(0));
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            const S* xp = x.ptr();
            for (std::size_t i = 0; i < gx.size(); ++i) {
                if (xp[i] > S(0)) gx[i] += go[i];
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> log(const Tensor<S>& x) {
    Tensor<S> out(x.shape());
    detail::VecMap<S>(out.ptr(), out.numel()) =
        detail::ConstVecMap<S>(x.ptr(), x.numel()).log();
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out]() mutable {
            if (!out.grad_allocated()) return;
            detail::VecMap<S>(x.grad().data(), x.numel()) +=
                detail::ConstVecMap<S>(out.grad().data(), out.numel()) /
                detail::ConstVecMap<S>(x.ptr(), x.numel());
        });
    }
    return out;
}

// x[..., d] + bias[d], broadcast over all leading axes.
template <class S>
Tensor<S> add_bias(const Tensor<S>& x, const Tensor<S>& bias) {
    if (bias.rank() != 1 || bias.dim(0) != x.dim(x.rank() - 1)) {
        throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match last axis of " + shape_str(x.shape()));
    }
    const int d = bias.dim(0);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    Tensor<S> out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        detail::VecMap<S>(out.ptr() + r * d, d) =
            detail::ConstVecMap<S>(x.ptr() + r * d, d) +
            detail::ConstVecMap<S>(bias.ptr(), d);
    }
    if (detail::recording<S>({&x, &bias})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, bias, out, rows, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (x.requires_grad()) {
                detail::VecMap<S>(x.grad().data(), x.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
            if (bias.requires_grad()) {
                auto gb = detail::VecMap<S>(bias.grad().data(), static_cast<std::size_t>(d));
                for (std::size_t r = 0; r < rows; ++r) {
                    gb += detail::ConstVecMap<S>(go.data() + r * static_cast<std::size_t>(d), d);
                }
            }
        });
    }
    return out;
}

// a + b with numpy-style broadcast: equal rank, every b axis either matches
// or is 1. The backward for b reduces over the broadcast axes.
template <class S>
Tensor<S> add_broadcast(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != b.rank()) {
        throw ShapeError("add_broadcast: rank mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    for (int i = 0; i < a.rank(); ++i) {
        if (b.dim(i) != a.dim(i) && b.dim(i) != 1) {
            throw ShapeError("add_broadcast: axis " + std::to_string(i) +
                             " of " + shape_str(b.shape()) +
                             " cannot broadcast to " + shape_str(a.shape()));
        }
    }
    Tensor<S> out(a.shape());
    const auto a_strides = detail::row_major_strides(a.shape());
    auto b_strides = detail::row_major_strides(b.shape());
    for (int i = 0; i < a.rank(); ++i) {
        if (b.dim(i) == 1 && a.dim(i) != 1) b_strides[static_cast<std::size_t>(i)] = 0;
    }
    const std::size_t n = a.numel();
    const int rank = a.rank();
    const Shape ash = a.shape();
    {
        const S* ap = a.ptr();
        const S* bp = b.ptr();
        S* op = out.ptr();
        std::vector<int> idx(static_cast<std::size_t>(rank), 0);
        for (std::size_t lin = 0; lin < n; ++lin) {
            std::size_t boff = 0;
            for (int i = 0; i < rank; ++i) {
                boff += static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) *
                        b_strides[static_cast<std::size_t>(i)];
            }
            op[lin] = ap[lin] + bp[boff];
            for (int i = rank - 1; i >= 0; --i) {
                if (++idx[static_cast<std::size_t>(i)] < ash[static_cast<std::size_t>(i)]) break;
                idx[static_cast<std::size_t>(i)] = 0;
            }
        }
    }
    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out, b_strides, ash, rank]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (a.requires_grad()) {
                detail::VecMap<S>(a.grad().data(), a.numel()) +=
                    detail::ConstVecMap<S>(go.data(), go.size());
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                std::vector<int> idx(static_cast<std::size_t>(rank), 0);
                for (std::size_t lin = 0; lin < go.size(); ++lin) {
                    std::size_t boff = 0;
                    for (int i = 0; i < rank; ++i) {
                        boff += static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) *
                                b_strides[static_cast<std::size_t>(i)];
                    }
                    gb[boff] += go[lin];
                    for (int i = rank - 1; i >= 0; --i) {
                        if (++idx[static_cast<std::size_t>(i)] < ash[static_cast<std::size_t>(i)]) break;
                        idx[static_cast<std::size_t>(i)] = 0;
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul and layout ops
// ---------------------------------------------------------------------------

// Batched matrix product over the last two axes. Supported layouts:
//   [m,k] x [k,n], [...,m,k] x [k,n] (shared right operand, one flat gemm),
//   [L...,m,k] x [L...,k,n] (slice-wise), [m,k] x [L...,k,n] (shared left).
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw ShapeError("matmul: operands must have rank >= 2, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const int m = a.dim(a.rank() - 2);
    const int k = a.dim(a.rank() - 1);
    const int kb = b.dim(b.rank() - 2);
    const int n = b.dim(b.rank() - 1);
    if (k != kb) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    Shape lead_a(a.shape().begin(), a.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (!lead_a.empty() && !lead_b.empty() && lead_a != lead_b) {
        throw ShapeError("matmul: leading dimensions disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const Shape& lead = lead_a.empty() ? lead_b : lead_a;
    Shape out_shape = lead;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor<S> out(out_shape);

    const std::size_t slices = shape_numel(lead);
    const std::size_t a_step = lead_a.empty() ? 0 : static_cast<std::size_t>(m) * k;
    const std::size_t b_step = lead_b.empty() ? 0 : static_cast<std::size_t>(k) * n;
    const std::size_t o_step = static_cast<std::size_t>(m) * n;

    if (b_step == 0 && slices > 1) {
        // shared right operand: single flat gemm
        detail::MatMap<S>(out.ptr(), static_cast<Eigen::Index>(slices) * m, n).noalias() =
            detail::ConstMatMap<S>(a.ptr(), static_cast<Eigen::Index>(slices) * m, k) *
            detail::ConstMatMap<S>(b.ptr(), k, n);
    } else {
        for (std::size_t l = 0; l < slices; ++l) {
            detail::MatMap<S>(out.ptr() + l * o_step, m, n).noalias() =
                detail::ConstMatMap<S>(a.ptr() + l * a_step, m, k) *
                detail::ConstMatMap<S>(b.ptr() + l * b_step, k, n);
        }
    }

    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out, slices, a_step, b_step, o_step, m, k, n]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                if (b_step == 0 && slices > 1) {
                    detail::MatMap<S>(ga.data(), static_cast<Eigen::Index>(slices) * m, k).noalias() +=
                        detail::ConstMatMap<S>(go.data(), static_cast<Eigen::Index>(slices) * m, n) *
                        detail::ConstMatMap<S>(b.ptr(), k, n).transpose();
                } else {
                    for (std::size_t l = 0; l < slices; ++l) {
                        detail::MatMap<S>(ga.data() + l * a_step, m, k).noalias() +=
                            detail::ConstMatMap<S>(go.data() + l * o_step, m, n) *
                            detail::ConstMatMap<S>(b.ptr() + l * b_step, k, n).transpose();
                    }
                }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                if (b_step == 0 && slices > 1) {
                    detail::MatMap<S>(gb.data(), k, n).noalias() +=
                        detail::ConstMatMap<S>(a.ptr(), static_cast<Eigen::Index>(slices) * m, k)
                            .transpose() *
                        detail::ConstMatMap<S>(go.data(), static_cast<Eigen::Index>(slices) * m, n);
                } else {
                    for (std::size_t l = 0; l < slices; ++l) {
                        detail::MatMap<S>(gb.data() + l * b_step, k, n).noalias() +=
                            detail::ConstMatMap<S>(a.ptr() + l * a_step, m, k).transpose() *
                            detail::ConstMatMap<S>(go.data() + l * o_step, m, n);
                    }
                }
            }
        });
    }
    return out;
}

// Swap the last two axes (materialized copy).
template <class S>
Tensor<S> transpose_last(const Tensor<S>& x) {
    if (x.rank() < 2) {
        throw ShapeError("transpose_last: rank must be >= 2, got " + shape_str(x.shape()));
    }
    const int m = x.dim(x.rank() - 2);
    const int n = x.dim(x.rank() - 1);
    Shape out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    Tensor<S> out(out_shape);
    const std::size_t step = static_cast<std::size_t>(m) * n;
    const std::size_t slices = x.numel() / step;
    for (std::size_t l = 0; l < slices; ++l) {
        detail::MatMap<S>(out.ptr() + l * step, n, m) =
            detail::ConstMatMap<S>(x.ptr() + l * step, m, n).transpose();
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out, slices, step, m, n]() mutable {
            if (!out.grad_allocated()) return;
            for (std::size_t l = 0; l < slices; ++l) {
                detail::MatMap<S>(x.grad().data() + l * step, m, n) +=
                    detail::ConstMatMap<S>(out.grad().data() + l * step, n, m).transpose();
            }
        });
    }
    return out;
}

// [B,S,D] -> [B,H,S,D/H]
template <class S>
Tensor<S> split_heads(const Tensor<S>& x, int heads) {
    if (x.rank() != 3) {
        throw ShapeError("split_heads: expected rank-3 input, got " + shape_str(x.shape()));
    }
    const int batch = x.dim(0), seq = x.dim(1), dim = x.dim(2);
    if (heads < 1 || dim % heads != 0) {
        throw ShapeError("split_heads: width " + std::to_string(dim) +
                         " not divisible by " + std::to_string(heads) + " heads");
    }
    const int hd = dim / heads;
    Tensor<S> out({batch, heads, seq, hd});
    const S* xp = x.ptr();
    S* op = out.ptr();
    for (int b = 0; b < batch; ++b)
        for (int h = 0; h < heads; ++h)
            for (int s = 0; s < seq; ++s) {
                const S* src = xp + (static_cast<std::size_t>(b) * seq + s) * dim + h * hd;
                S* dst = op + ((static_cast<std::size_t>(b) * heads + h) * seq + s) * hd;
                std::copy(src, src + hd, dst);
            }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out, batch, heads, seq, dim, hd]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (int b = 0; b < batch; ++b)
                for (int h = 0; h < heads; ++h)
                    for (int s = 0; s < seq; ++s) {
                        const S* src = go.data() +
                                       ((static_cast<std::size_t>(b) * heads + h) * seq + s) * hd;
                        S* dst = gx.data() +
                                 (static_cast<std::size_t>(b) * seq + s) * dim + h * hd;
                        for (int c = 0; c < hd; ++c) dst[c] += src[c];
                    }
        });
    }
    return out;
}

// [B,H,S,Dh] -> [B,S,H*Dh]
template <class S>
Tensor<S> merge_heads(const Tensor<S>& x) {
    if (x.rank() != 4) {
        throw ShapeError("merge_heads: expected rank-4 input, got " + shape_str(x.shape()));
    }
    const int batch = x.dim(0), heads = x.dim(1), seq = x.dim(2), hd = x.dim(3);
    const int dim = heads * hd;
    Tensor<S> out({batch, seq, dim});
    const S* xp = x.ptr();
    S* op = out.ptr();
    for (int b = 0; b < batch; ++b)
        for (int h = 0; h < heads; ++h)
            for (int s = 0; s < seq; ++s) {
                const S* src = xp + ((static_cast<std::size_t>(b) * heads + h) * seq + s) * hd;
                S* dst = op + (static_cast<std::size_t>(b) * seq + s) * dim + h * hd;
                std::copy(src, src + hd, dst);
            }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out, batch, heads, seq, dim, hd]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (int b = 0; b < batch; ++b)
                for (int h = 0; h < heads; ++h)
                    for (int s = 0; s < seq; ++s) {
                        const S* src = go.data() +
                                       (static_cast<std::size_t>(b) * seq + s) * dim + h * hd;
                        S* dst = gx.data() +
                                 ((static_cast<std::size_t>(b) * heads + h) * seq + s) * hd;
                        for (int c = 0; c < hd; ++c) dst[c] += src[c];
                    }
        });
    }
    return out;
}

// Same data, new shape (materialized copy; element count must match).
template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    }
    Tensor<S> out(std::move(new_shape), std::vector<S>(x.data()));
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out]() mutable {
            if (!out.grad_allocated()) return;
            detail::VecMap<S>(x.grad().data(), x.numel()) +=
                detail::ConstVecMap<S>(out.grad().data(), out.numel());
        });
    }
    return out;
}

// Concatenate along the last axis.
template <class S>
Tensor<S> concat_last(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != b.rank()) {
        throw ShapeError("concat_last: rank mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    for (int i = 0; i + 1 < a.rank(); ++i) {
        if (a.dim(i) != b.dim(i)) {
            throw ShapeError("concat_last: leading dims disagree, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
        }
    }
    const int da = a.dim(a.rank() - 1);
    const int db = b.dim(b.rank() - 1);
    Shape out_shape = a.shape();
    out_shape.back() = da + db;
    Tensor<S> out(out_shape);
    const std::size_t rows = a.numel() / static_cast<std::size_t>(da);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(a.ptr() + r * da, a.ptr() + (r + 1) * da,
                  out.ptr() + r * (da + db));
        std::copy(b.ptr() + r * db, b.ptr() + (r + 1) * db,
                  out.ptr() + r * (da + db) + da);
    }
    if (detail::recording<S>({&a, &b})) {
        detail::mark_output(out);
        Tape<S>::current()->record([a, b, out, rows, da, db]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            for (std::size_t r = 0; r < rows; ++r) {
                if (a.requires_grad()) {
                    auto& ga = a.grad();
                    for (int c = 0; c < da; ++c) {
                        ga[r * static_cast<std::size_t>(da) + c] +=
                            go[r * static_cast<std::size_t>(da + db) + c];
                    }
                }
                if (b.requires_grad()) {
                    auto& gb = b.grad();
                    for (int c = 0; c < db; ++c) {
                        gb[r * static_cast<std::size_t>(db) + c] +=
                            go[r * static_cast<std::size_t>(da + db) + da + c];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
    Tensor<S> out({1});
    // serial accumulation: vectorized reductions round differently depending
    // on buffer alignment, which breaks bitwise reproducibility
    S total = S(0);
    for (std::size_t i = 0; i < x.numel(); ++i) total += x.ptr()[i];
    out.data()[0] = total;
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out]() mutable {
            if (!out.grad_allocated()) return;
            const S g = out.grad()[0];
            detail::VecMap<S>(x.grad().data(), x.numel()) += g;
        });
    }
    return out;
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
    return scale(sum_all(x), S(1) / static_cast<S>(x.numel()));
}

// ---------------------------------------------------------------------------
// normalization and attention primitives
// ---------------------------------------------------------------------------

// Softmax over the last axis with optional boolean mask. Masked positions get
// probability exactly zero; every row must keep at least one unmasked entry.
// The mask may broadcast over leading axes (dims of size 1); its last axis
// must match the logits. Row max is subtracted before exponentiation.
template <class S>
Tensor<S> masked_softmax(const Tensor<S>& logits, const BoolTensor* mask) {
    const int n = logits.dim(logits.rank() - 1);
    std::vector<std::size_t> mask_strides;
    if (mask != nullptr) {
        if (static_cast<int>(mask->shape.size()) != logits.rank()) {
            throw ShapeError("masked_softmax: mask rank " + shape_str(mask->shape) +
                             " does not match logits " + shape_str(logits.shape()));
        }
        if (mask->shape.back() != n) {
            throw ShapeError("masked_softmax: mask last axis " + shape_str(mask->shape) +
                             " must match logits " + shape_str(logits.shape()));
        }
        for (std::size_t i = 0; i + 1 < mask->shape.size(); ++i) {
            const int md = mask->shape[i];
            const int ld = logits.shape()[i];
            if (md != ld && md != 1) {
                throw ShapeError("masked_softmax: mask axis " + std::to_string(i) +
                                 " of " + shape_str(mask->shape) +
                                 " cannot broadcast to " + shape_str(logits.shape()));
            }
        }
        mask_strides = detail::row_major_strides(mask->shape);
        for (std::size_t i = 0; i + 1 < mask->shape.size(); ++i) {
            if (mask->shape[i] == 1) mask_strides[i] = 0;
        }
    }

    const std::size_t rows = logits.numel() / static_cast<std::size_t>(n);
    Tensor<S> out(logits.shape());
    const Shape lsh = logits.shape();
    const int lead_rank = logits.rank() - 1;

    std::vector<int> idx(static_cast<std::size_t>(lead_rank), 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::uint8_t* mrow = nullptr;
        if (mask != nullptr) {
            std::size_t moff = 0;
            for (int i = 0; i < lead_rank; ++i) {
                moff += static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) *
                        mask_strides[static_cast<std::size_t>(i)];
            }
            mrow = mask->v.data() + moff;
        }
        const S* lp = logits.ptr() + r * n;
        S* op = out.ptr() + r * n;

        S row_max = std::numeric_limits<S>::lowest();
        bool any = false;
        for (int j = 0; j < n; ++j) {
            if (mrow == nullptr || mrow[j]) {
                any = true;
                row_max = std::max(row_max, lp[j]);
            }
        }
        if (!any) {
            throw DegenerateRowError("masked_softmax: fully masked row " + std::to_string(r));
        }
        S denom = S(0);
        for (int j = 0; j < n; ++j) {
            if (mrow == nullptr || mrow[j]) {
                op[j] = std::exp(lp[j] - row_max);
                denom += op[j];
            } else {
                op[j] = S(0);
            }
        }
        for (int j = 0; j < n; ++j) op[j] /= denom;

        for (int i = lead_rank - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < lsh[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }

    if (detail::recording<S>({&logits})) {
        detail::mark_output(out);
        Tape<S>::current()->record([logits, out, rows, n]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gl = logits.grad();
            const S* probs = out.ptr();
            for (std::size_t r = 0; r < rows; ++r) {
                const S* p = probs + r * n;
                const S* g = go.data() + r * n;
                S dot = S(0);
                for (int j = 0; j < n; ++j) dot += g[j] * p[j];
                S* gr = gl.data() + r * n;
                for (int j = 0; j < n; ++j) gr[j] += p[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

template <class S>
Tensor<S> masked_softmax(const Tensor<S>& logits, const BoolTensor& mask) {
    return masked_softmax(logits, &mask);
}

template <class S>
Tensor<S> softmax(const Tensor<S>& logits) {
    return masked_softmax<S>(logits, nullptr);
}

// Per-row standardization over the last axis (population variance), then an
// affine map. eps sits under the square root.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps) {
    const int d = x.dim(x.rank() - 1);
    if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
        throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                         shape_str(gain.shape()) + " and " + shape_str(bias.shape()));
    }
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    Tensor<S> out(x.shape());
    auto normalized = std::make_shared<std::vector<S>>(x.numel());
    auto inv_std = std::make_shared<std::vector<S>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const S* xp = x.ptr() + r * d;
        S mean = S(0);
        for (int j = 0; j < d; ++j) mean += xp[j];
        mean /= static_cast<S>(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) {
            const S c = xp[j] - mean;
            var += c * c;
        }
        var /= static_cast<S>(d);
        const S inv = S(1) / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        S* nrm = normalized->data() + r * d;
        S* op = out.ptr() + r * d;
        for (int j = 0; j < d; ++j) {
            nrm[j] = (xp[j] - mean) * inv;
            op[j] = gain.ptr()[j] * nrm[j] + bias.ptr()[j];
        }
    }
    if (detail::recording<S>({&x, &gain, &bias})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, gain, bias, out, normalized, inv_std, rows, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const S* g = go.data() + r * d;
                const S* nrm = normalized->data() + r * d;
                if (gain.requires_grad()) {
                    auto& gg = gain.grad();
                    for (int j = 0; j < d; ++j) gg[j] += g[j] * nrm[j];
                }
                if (bias.requires_grad()) {
                    auto& gb = bias.grad();
                    for (int j = 0; j < d; ++j) gb[j] += g[j];
                }
                if (x.requires_grad()) {
                    S mean_dn = S(0), mean_dn_nrm = S(0);
                    for (int j = 0; j < d; ++j) {
                        const S dn = g[j] * gain.ptr()[j];
                        mean_dn += dn;
                        mean_dn_nrm += dn * nrm[j];
                    }
                    mean_dn /= static_cast<S>(d);
                    mean_dn_nrm /= static_cast<S>(d);
                    S* gx = x.grad().data() + r * d;
                    const S inv = (*inv_std)[r];
                    for (int j = 0; j < d; ++j) {
                        const S dn = g[j] * gain.ptr()[j];
                        gx[j] += inv * (dn - mean_dn - nrm[j] * mean_dn_nrm);
                    }
                }
            }
        });
    }
    return out;
}

// Inverted dropout: in training mode each element is zeroed independently
// with probability p and survivors are scaled by 1/(1-p); eval is identity.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, bool training, CounterRng* rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ValueError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) return x;
    if (rng == nullptr) {
        throw ValueError("dropout: training mode requires a generator");
    }
    const std::uint64_t stream = rng->next_stream();
    const std::uint64_t seed = rng->seed();
    const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
    Tensor<S> out(x.shape());
    auto factors = std::make_shared<std::vector<S>>(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const bool keep = CounterRng::uniform(seed, stream, i) >= p;
        (*factors)[i] = keep ? keep_scale : S(0);
        out.ptr()[i] = x.ptr()[i] * (*factors)[i];
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, out, factors]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * (*factors)[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// lookup / gather ops
// ---------------------------------------------------------------------------

// table[V,d] indexed by integer ids; output shape = index_shape + [d].
// Backward scatter-adds output gradient rows into the table.
template <class S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& indices,
                           const Shape& index_shape) {
    if (table.rank() != 2) {
        throw ShapeError("embedding_lookup: table must be rank 2, got " +
                         shape_str(table.shape()));
    }
    if (indices.size() != shape_numel(index_shape)) {
        throw ShapeError("embedding_lookup: " + std::to_string(indices.size()) +
                         " indices do not fill shape " + shape_str(index_shape));
    }
    const int vocab = table.dim(0);
    const int d = table.dim(1);
    for (int id : indices) {
        if (id < 0 || id >= vocab) {
            throw ValueError("embedding_lookup: index " + std::to_string(id) +
                             " outside table of " + std::to_string(vocab) + " rows");
        }
    }
    Shape out_shape = index_shape;
    out_shape.push_back(d);
    Tensor<S> out(out_shape);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const S* src = table.ptr() + static_cast<std::size_t>(indices[r]) * d;
        std::copy(src, src + d, out.ptr() + r * d);
    }
    if (detail::recording<S>({&table})) {
        detail::mark_output(out);
        auto idx = std::make_shared<std::vector<int>>(indices);
        Tape<S>::current()->record([table, out, idx, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gt = table.grad();
            for (std::size_t r = 0; r < idx->size(); ++r) {
                S* dst = gt.data() + static_cast<std::size_t>((*idx)[r]) * d;
                const S* src = go.data() + r * d;
                for (int c = 0; c < d; ++c) dst[c] += src[c];
            }
        });
    }
    return out;
}

// x[B,S,D] -> [B,D], picking token index[b] from each sequence.
template <class S>
Tensor<S> select_tokens(const Tensor<S>& x, const std::vector<int>& index) {
    if (x.rank() != 3) {
        throw ShapeError("select_tokens: expected rank-3 input, got " + shape_str(x.shape()));
    }
    const int batch = x.dim(0), seq = x.dim(1), d = x.dim(2);
    if (static_cast<int>(index.size()) != batch) {
        throw ShapeError("select_tokens: need one index per sequence");
    }
    for (int i : index) {
        if (i < 0 || i >= seq) {
            throw ValueError("select_tokens: index " + std::to_string(i) +
                             " outside sequence of length " + std::to_string(seq));
        }
    }
    Tensor<S> out({batch, d});
    for (int b = 0; b < batch; ++b) {
        const S* src = x.ptr() + (static_cast<std::size_t>(b) * seq + index[static_cast<std::size_t>(b)]) * d;
        std::copy(src, src + d, out.ptr() + static_cast<std::size_t>(b) * d);
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        auto idx = std::make_shared<std::vector<int>>(index);
        Tape<S>::current()->record([x, out, idx, seq, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (std::size_t b = 0; b < idx->size(); ++b) {
                S* dst = gx.data() + (b * seq + static_cast<std::size_t>((*idx)[b])) * d;
                const S* src = go.data() + b * d;
                for (int c = 0; c < d; ++c) dst[c] += src[c];
            }
        });
    }
    return out;
}

// Mask-respecting sum over the token axis: x[B,S,D], mask[B,S] -> [B,D].
template <class S>
Tensor<S> masked_sum_tokens(const Tensor<S>& x, const BoolTensor& mask) {
    if (x.rank() != 3) {
        throw ShapeError("masked_sum_tokens: expected rank-3 input, got " +
                         shape_str(x.shape()));
    }
    const int batch = x.dim(0), seq = x.dim(1), d = x.dim(2);
    if (mask.shape != Shape{batch, seq}) {
        throw ShapeError("masked_sum_tokens: mask " + shape_str(mask.shape) +
                         " does not match " + shape_str(x.shape()));
    }
    Tensor<S> out({batch, d});
    for (int b = 0; b < batch; ++b) {
        auto acc = detail::VecMap<S>(out.ptr() + static_cast<std::size_t>(b) * d, d);
        for (int s = 0; s < seq; ++s) {
            if (mask.v[static_cast<std::size_t>(b) * seq + s]) {
                acc += detail::ConstVecMap<S>(
                    x.ptr() + (static_cast<std::size_t>(b) * seq + s) * d, d);
            }
        }
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        auto m = std::make_shared<BoolTensor>(mask);
        Tape<S>::current()->record([x, out, m, batch, seq, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (int b = 0; b < batch; ++b)
                for (int s = 0; s < seq; ++s) {
                    if (!m->v[static_cast<std::size_t>(b) * seq + s]) continue;
                    S* dst = gx.data() + (static_cast<std::size_t>(b) * seq + s) * d;
                    const S* src = go.data() + static_cast<std::size_t>(b) * d;
                    for (int c = 0; c < d; ++c) dst[c] += src[c];
                }
        });
    }
    return out;
}

// Mask-respecting mean over the token axis: x[B,S,D], mask[B,S] -> [B,D].
template <class S>
Tensor<S> masked_mean_tokens(const Tensor<S>& x, const BoolTensor& mask) {
    if (x.rank() != 3) {
        throw ShapeError("masked_mean_tokens: expected rank-3 input, got " +
                         shape_str(x.shape()));
    }
    const int batch = x.dim(0), seq = x.dim(1), d = x.dim(2);
    if (mask.shape != Shape{batch, seq}) {
        throw ShapeError("masked_mean_tokens: mask " + shape_str(mask.shape) +
                         " does not match " + shape_str(x.shape()));
    }
    Tensor<S> out({batch, d});
    std::vector<S> inv_count(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        int cnt = 0;
        auto acc = detail::VecMap<S>(out.ptr() + static_cast<std::size_t>(b) * d, d);
        for (int s = 0; s < seq; ++s) {
            if (mask.v[static_cast<std::size_t>(b) * seq + s]) {
                ++cnt;
                acc += detail::ConstVecMap<S>(
                    x.ptr() + (static_cast<std::size_t>(b) * seq + s) * d, d);
            }
        }
        if (cnt == 0) {
            throw ValueError("masked_mean_tokens: sequence " + std::to_string(b) +
                             " has no unmasked tokens");
        }
        inv_count[static_cast<std::size_t>(b)] = S(1) / static_cast<S>(cnt);
        acc *= inv_count[static_cast<std::size_t>(b)];
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        auto m = std::make_shared<BoolTensor>(mask);
        auto inv = std::make_shared<std::vector<S>>(std::move(inv_count));
        Tape<S>::current()->record([x, out, m, inv, batch, seq, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (int b = 0; b < batch; ++b)
                for (int s = 0; s < seq; ++s) {
                    if (!m->v[static_cast<std::size_t>(b) * seq + s]) continue;
                    S* dst = gx.data() + (static_cast<std::size_t>(b) * seq + s) * d;
                    const S* src = go.data() + static_cast<std::size_t>(b) * d;
                    const S f = (*inv)[static_cast<std::size_t>(b)];
                    for (int c = 0; c < d; ++c) dst[c] += src[c] * f;
                }
        });
    }
    return out;
}

// Zero out rows whose mask entry is false; mask covers all leading axes.
template <class S>
Tensor<S> zero_masked_rows(const Tensor<S>& x, const BoolTensor& mask) {
    const int d = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(d);
    if (mask.numel() != rows) {
        throw ShapeError("zero_masked_rows: mask " + shape_str(mask.shape) +
                         " does not cover rows of " + shape_str(x.shape()));
    }
    Tensor<S> out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        if (mask.v[r]) {
            std::copy(x.ptr() + r * d, x.ptr() + (r + 1) * d, out.ptr() + r * d);
        }
    }
    if (detail::recording<S>({&x})) {
        detail::mark_output(out);
        auto m = std::make_shared<BoolTensor>(mask);
        Tape<S>::current()->record([x, out, m, rows, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            auto& gx = x.grad();
            for (std::size_t r = 0; r < rows; ++r) {
                if (!m->v[r]) continue;
                for (int c = 0; c < d; ++c) {
                    gx[r * static_cast<std::size_t>(d) + c] +=
                        go[r * static_cast<std::size_t>(d) + c];
                }
            }
        });
    }
    return out;
}

// Insert a shared learnable token at position 0 of every sequence:
// x[B,S,D], token[D] -> [B,S+1,D].
template <class S>
Tensor<S> prepend_token(const Tensor<S>& x, const Tensor<S>& token) {
    if (x.rank() != 3 || token.rank() != 1 || token.dim(0) != x.dim(2)) {
        throw ShapeError("prepend_token: need x[B,S,D] and token[D], got " +
                         shape_str(x.shape()) + " and " + shape_str(token.shape()));
    }
    const int batch = x.dim(0), seq = x.dim(1), d = x.dim(2);
    Tensor<S> out({batch, seq + 1, d});
    for (int b = 0; b < batch; ++b) {
        S* dst = out.ptr() + static_cast<std::size_t>(b) * (seq + 1) * d;
        std::copy(token.ptr(), token.ptr() + d, dst);
        const S* src = x.ptr() + static_cast<std::size_t>(b) * seq * d;
        std::copy(src, src + static_cast<std::size_t>(seq) * d, dst + d);
    }
    if (detail::recording<S>({&x, &token})) {
        detail::mark_output(out);
        Tape<S>::current()->record([x, token, out, batch, seq, d]() mutable {
            if (!out.grad_allocated()) return;
            const auto& go = out.grad();
            for (int b = 0; b < batch; ++b) {
                const S* g0 = go.data() + static_cast<std::size_t>(b) * (seq + 1) * d;
                if (token.requires_grad()) {
                    auto& gt = token.grad();
                    for (int c = 0; c < d; ++c) gt[static_cast<std::size_t>(c)] += g0[c];
                }
                if (x.requires_grad()) {
                    S* dst = x.grad().data() + static_cast<std::size_t>(b) * seq * d;
                    const S* src = g0 + d;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(seq) * d; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

// Mean negative log-likelihood of the true class, computed from unnormalized
// scores via log-sum-exp. scores[B,C], labels in [0,C).
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& scores, const std::vector<int>& labels) {
    if (scores.rank() != 2) {
        throw ShapeError("cross_entropy: expected [batch, classes], got " +
                         shape_str(scores.shape()));
    }
    const int batch = scores.dim(0), classes = scores.dim(1);
    if (static_cast<int>(labels.size()) != batch) {
        throw ValueError("cross_entropy: need one label per row");
    }
    for (int y : labels) {
        if (y < 0 || y >= classes) {
            throw ValueError("cross_entropy: label " + std::to_string(y) +
                             " outside " + std::to_string(classes) + " classes");
        }
    }
    Tensor<S> out({1});
    auto probs = std::make_shared<std::vector<S>>(scores.numel());
    S total = S(0);
    for (int b = 0; b < batch; ++b) {
        const S* z = scores.ptr() + static_cast<std::size_t>(b) * classes;
        S m = z[0];
        for (int c = 1; c < classes; ++c) m = std::max(m, z[c]);
        S denom = S(0);
        S* p = probs->data() + static_cast<std::size_t>(b) * classes;
        for (int c = 0; c < classes; ++c) {
            p[c] = std::exp(z[c] - m);
            denom += p[c];
        }
        for (int c = 0; c < classes; ++c) p[c] /= denom;
        const S lse = m + std::log(denom);
        total += lse - z[labels[static_cast<std::size_t>(b)]];
    }
    out.data()[0] = total / static_cast<S>(batch);
    if (detail::recording<S>({&scores})) {
        detail::mark_output(out);
        auto lab = std::make_shared<std::vector<int>>(labels);
        Tape<S>::current()->record([scores, out, probs, lab, batch, classes]() mutable {
            if (!out.grad_allocated()) return;
            const S g = out.grad()[0] / static_cast<S>(batch);
            auto& gs = scores.grad();
            for (int b = 0; b < batch; ++b) {
                const S* p = probs->data() + static_cast<std::size_t>(b) * classes;
                S* gz = gs.data() + static_cast<std::size_t>(b) * classes;
                for (int c = 0; c < classes; ++c) {
                    const S onehot = (c == (*lab)[static_cast<std::size_t>(b)]) ? S(1) : S(0);
                    gz[c] += g * (p[c] - onehot);
                }
            }
        });
    }
    return out;
}

}  // namespace graphtrans
