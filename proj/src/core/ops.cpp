// SPDX-License-Identifier: Apache-2.0
#include "core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tfk {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapMat = Eigen::Map<RowMat<Real>>;
template <typename Real>
using CMapMat = Eigen::Map<const RowMat<Real>>;
template <typename Real>
using CMapVec = Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>>;

template <typename Real>
void accumulate(Tensor<Real> t, const std::vector<Real>& g) {
    if (!t.requires_grad()) return;
    auto dst = t.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    std::vector<Real> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result<Real>(a.shape(), std::move(out), {a, b}, "add", [a, b](Node<Real>& self) {
        accumulate(a, self.grad);
        accumulate(b, self.grad);
    });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    std::vector<Real> out(a.numel());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result<Real>(a.shape(), std::move(out), {a, b}, "mul", [a, b](Node<Real>& self) {
        const std::size_t n = self.grad.size();
        if (a.requires_grad()) {
            std::vector<Real> g(n);
            auto y = b.data();
            for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] * y[i];
            accumulate(a, g);
        }
        if (b.requires_grad()) {
            std::vector<Real> g(n);
            auto x = a.data();
            for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] * x[i];
            accumulate(b, g);
        }
    });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real s) {
    std::vector<Real> out(x.data().begin(), x.data().end());
    for (auto& v : out) v *= s;
    return make_result<Real>(x.shape(), std::move(out), {x}, "scale", [x, s](Node<Real>& self) {
        std::vector<Real> g(self.grad);
        for (auto& v : g) v *= s;
        accumulate(x, g);
    });
}

template <typename Real>
Tensor<Real> add_broadcast(const Tensor<Real>& x, const Tensor<Real>& b) {
    const auto& xs = x.shape();
    const auto& bs = b.shape();
    if (bs.size() > xs.size() || !std::equal(bs.rbegin(), bs.rend(), xs.rbegin())) {
        throw DimensionError("add_broadcast: " + shape_str(bs) + " is not a trailing shape of " + shape_str(xs));
    }
    const std::size_t period = b.numel();
    std::vector<Real> out(x.data().begin(), x.data().end());
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % period];
    return make_result<Real>(xs, std::move(out), {x, b}, "add_broadcast", [x, b, period](Node<Real>& self) {
        accumulate(x, self.grad);
        if (b.requires_grad()) {
            std::vector<Real> g(period, Real(0));
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i];
            accumulate(b, g);
        }
    });
}

template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b) {
    if (w.rank() != 2 || x.dim(-1) != w.dim(0)) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(w.shape()));
    }
    const std::size_t din = w.dim(0);
    const std::size_t dout = w.dim(1);
    if (b.defined() && (b.rank() != 1 || b.dim(0) != dout)) {
        throw DimensionError("linear: bias " + shape_str(b.shape()) + " incompatible with weight " +
                             shape_str(w.shape()));
    }
    const std::size_t rows = x.numel() / din;
    Shape out_shape = x.shape();
    out_shape.back() = dout;
    std::vector<Real> out(rows * dout);
    {
        CMapMat<Real> X(x.data().data(), rows, din);
        CMapMat<Real> W(w.data().data(), din, dout);
        MapMat<Real> Y(out.data(), rows, dout);
        Y.noalias() = X * W;
        if (b.defined()) Y.rowwise() += CMapVec<Real>(b.data().data(), dout);
    }
    return make_result<Real>(std::move(out_shape), std::move(out), {x, w, b}, "linear",
                             [x, w, b, rows, din, dout](Node<Real>& self) {
                                 CMapMat<Real> G(self.grad.data(), rows, dout);
                                 if (x.requires_grad()) {
                                     std::vector<Real> gx(rows * din);
                                     MapMat<Real> GX(gx.data(), rows, din);
                                     GX.noalias() = G * CMapMat<Real>(w.data().data(), din, dout).transpose();
                                     accumulate(x, gx);
                                 }
                                 if (w.requires_grad()) {
                                     std::vector<Real> gw(din * dout);
                                     MapMat<Real> GW(gw.data(), din, dout);
                                     GW.noalias() = CMapMat<Real>(x.data().data(), rows, din).transpose() * G;
                                     accumulate(w, gw);
                                 }
                                 if (b.defined() && b.requires_grad()) {
                                     std::vector<Real> gb(dout, Real(0));
                                     for (std::size_t r = 0; r < rows; ++r)
                                         for (std::size_t j = 0; j < dout; ++j) gb[j] += self.grad[r * dout + j];
                                     accumulate(b, gb);
                                 }
                             });
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool transpose_b) {
    if (a.rank() < 2 || b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
        throw DimensionError("matmul: incompatible batch shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t n = a.dim(-2);
    const std::size_t k = a.dim(-1);
    const std::size_t m = transpose_b ? b.dim(-2) : b.dim(-1);
    const std::size_t kb = transpose_b ? b.dim(-1) : b.dim(-2);
    if (kb != k) {
        throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t batch = a.numel() / (n * k);
    Shape out_shape = a.shape();
    out_shape.back() = m;
    std::vector<Real> out(batch * n * m);
    for (std::size_t s = 0; s < batch; ++s) {
        CMapMat<Real> A(a.data().data() + s * n * k, n, k);
        MapMat<Real> C(out.data() + s * n * m, n, m);
        if (transpose_b) {
            C.noalias() = A * CMapMat<Real>(b.data().data() + s * m * k, m, k).transpose();
        } else {
            C.noalias() = A * CMapMat<Real>(b.data().data() + s * k * m, k, m);
        }
    }
    return make_result<Real>(std::move(out_shape), std::move(out), {a, b}, "matmul",
                             [a, b, batch, n, k, m, transpose_b](Node<Real>& self) {
                                 std::vector<Real> ga, gb;
                                 if (a.requires_grad()) ga.assign(batch * n * k, Real(0));
                                 if (b.requires_grad()) gb.assign(batch * k * m, Real(0));
                                 for (std::size_t s = 0; s < batch; ++s) {
                                     CMapMat<Real> G(self.grad.data() + s * n * m, n, m);
                                     CMapMat<Real> A(a.data().data() + s * n * k, n, k);
                                     if (transpose_b) {
                                         CMapMat<Real> B(b.data().data() + s * m * k, m, k);
                                         if (!ga.empty()) MapMat<Real>(ga.data() + s * n * k, n, k).noalias() = G * B;
                                         if (!gb.empty())
                                             MapMat<Real>(gb.data() + s * m * k, m, k).noalias() = G.transpose() * A;
                                     } else {
                                         CMapMat<Real> B(b.data().data() + s * k * m, k, m);
                                         if (!ga.empty())
                                             MapMat<Real>(ga.data() + s * n * k, n, k).noalias() = G * B.transpose();
                                         if (!gb.empty())
                                             MapMat<Real>(gb.data() + s * k * m, k, m).noalias() = A.transpose() * G;
                                     }
                                 }
                                 if (!ga.empty()) accumulate(a, ga);
                                 if (!gb.empty()) accumulate(b, gb);
                             });
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x) {
    const std::size_t k = x.dim(-1);
    const std::size_t rows = x.numel() / k;
    auto in = x.data();
    std::vector<Real> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* src = in.data() + r * k;
        Real* dst = out.data() + r * k;
        Real hi = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            if (std::isnan(src[j])) throw NumericError("softmax: NaN in input row " + std::to_string(r));
            hi = std::max(hi, src[j]);
        }
        if (!std::isfinite(hi)) throw NumericError("softmax: row " + std::to_string(r) + " has no finite logit");
        Real total = 0;
        for (std::size_t j = 0; j < k; ++j) {
            dst[j] = std::exp(src[j] - hi);
            total += dst[j];
        }
        for (std::size_t j = 0; j < k; ++j) dst[j] /= total;
    }
    // The backward reads the output values held by the node itself.
    return make_result<Real>(x.shape(), std::move(out), {x}, "softmax", [x, rows, k](Node<Real>& self) {
        std::vector<Real> g(rows * k);
        for (std::size_t r = 0; r < rows; ++r) {
            const Real* y = self.data.data() + r * k;
            const Real* gy = self.grad.data() + r * k;
            Real dot = 0;
            for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < k; ++j) g[r * k + j] = y[j] * (gy[j] - dot);
        }
        accumulate(x, g);
    });
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta, Real eps) {
    if (x.rank() == 0 || x.dim(-1) == 0) throw DimensionError("layer_norm: empty feature axis");
    const std::size_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layer_norm: affine params " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                             " do not match feature extent of " + shape_str(x.shape()));
    }
    const std::size_t rows = x.numel() / d;
    auto in = x.data();
    auto gm = gamma.data();
    auto bt = beta.data();
    std::vector<Real> out(x.numel());
    auto xhat = std::make_shared<std::vector<Real>>(x.numel());
    auto rstd = std::make_shared<std::vector<Real>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* src = in.data() + r * d;
        Real mu = 0;
        for (std::size_t j = 0; j < d; ++j) mu += src[j];
        mu /= Real(d);
        Real var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (src[j] - mu) * (src[j] - mu);
        var /= Real(d);
        const Real inv = Real(1) / std::sqrt(var + eps);
        (*rstd)[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const Real h = (src[j] - mu) * inv;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = h * gm[j] + bt[j];
        }
    }
    return make_result<Real>(x.shape(), std::move(out), {x, gamma, beta}, "layer_norm",
                             [x, gamma, beta, xhat, rstd, rows, d](Node<Real>& self) {
                                 auto gm = gamma.data();
                                 if (x.requires_grad()) {
                                     std::vector<Real> gx(rows * d);
                                     for (std::size_t r = 0; r < rows; ++r) {
                                         const Real* gy = self.grad.data() + r * d;
                                         const Real* h = xhat->data() + r * d;
                                         Real m1 = 0, m2 = 0;
                                         for (std::size_t j = 0; j < d; ++j) {
                                             const Real gh = gy[j] * gm[j];
                                             m1 += gh;
                                             m2 += gh * h[j];
                                         }
                                         m1 /= Real(d);
                                         m2 /= Real(d);
                                         for (std::size_t j = 0; j < d; ++j)
                                             gx[r * d + j] = (*rstd)[r] * (gy[j] * gm[j] - m1 - h[j] * m2);
                                     }
                                     accumulate(x, gx);
                                 }
                                 if (gamma.requires_grad() || beta.requires_grad()) {
                                     std::vector<Real> gg(d, Real(0)), gb(d, Real(0));
                                     for (std::size_t r = 0; r < rows; ++r)
                                         for (std::size_t j = 0; j < d; ++j) {
                                             gg[j] += self.grad[r * d + j] * (*xhat)[r * d + j];
                                             gb[j] += self.grad[r * d + j];
                                         }
                                     accumulate(gamma, gg);
                                     accumulate(beta, gb);
                                 }
                             });
}

template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
    constexpr Real kInvSqrt2 = Real(0.70710678118654752440);
    std::vector<Real> out(x.numel());
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real(0.5) * in[i] * (Real(1) + std::erf(in[i] * kInvSqrt2));
    return make_result<Real>(x.shape(), std::move(out), {x}, "gelu", [x](Node<Real>& self) {
        constexpr Real kInvSqrt2 = Real(0.70710678118654752440);
        constexpr Real kInvSqrt2Pi = Real(0.39894228040143267794);
        auto in = x.data();
        std::vector<Real> g(in.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Real v = in[i];
            const Real cdf = Real(0.5) * (Real(1) + std::erf(v * kInvSqrt2));
            const Real pdf = kInvSqrt2Pi * std::exp(Real(-0.5) * v * v);
            g[i] = self.grad[i] * (cdf + v * pdf);
        }
        accumulate(x, g);
    });
}

template <typename Real>
Tensor<Real> gather(const Tensor<Real>& x, const IndexMap& index, Shape shape) {
    if (numel(shape) != index->size()) {
        throw DimensionError("gather: index map of " + std::to_string(index->size()) + " entries cannot fill " +
                             shape_str(shape));
    }
    auto in = x.data();
    std::vector<Real> out(index->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto src = (*index)[i];
        if (src >= in.size()) throw DimensionError("gather: index out of range for " + shape_str(x.shape()));
        out[i] = in[src];
    }
    return make_result<Real>(std::move(shape), std::move(out), {x}, "gather", [x, index](Node<Real>& self) {
        std::vector<Real> g(x.numel(), Real(0));
        for (std::size_t i = 0; i < index->size(); ++i) g[(*index)[i]] += self.grad[i];
        accumulate(x, g);
    });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
    }
    std::vector<Real> out(x.data().begin(), x.data().end());
    return make_result<Real>(std::move(shape), std::move(out), {x}, "reshape",
                             [x](Node<Real>& self) { accumulate(x, self.grad); });
}

IndexMap permute_index(const Shape& shape, const std::vector<std::size_t>& axes) {
    const std::size_t r = shape.size();
    if (axes.size() != r) throw DimensionError("permute: axis list does not match rank of " + shape_str(shape));
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * shape[i];
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = shape[axes[i]];
    auto index = std::make_shared<std::vector<std::uint32_t>>(numel(shape));
    std::vector<std::size_t> pos(r, 0);
    for (std::size_t flat = 0; flat < index->size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t i = 0; i < r; ++i) src += pos[i] * in_stride[axes[i]];
        (*index)[flat] = static_cast<std::uint32_t>(src);
        for (std::size_t i = r; i-- > 0;) {
            if (++pos[i] < out_shape[i]) break;
            pos[i] = 0;
        }
    }
    return index;
}

template <typename Real>
Tensor<Real> permute(const Tensor<Real>& x, const std::vector<std::size_t>& axes) {
    Shape out_shape(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = x.shape().at(axes[i]);
    return gather(x, permute_index(x.shape(), axes), std::move(out_shape));
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size()) throw DimensionError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(s));
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != first[i])
                throw DimensionError("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s));
        }
        widths.push_back(s[axis] * inner);
        out_shape[axis] += s[axis];
    }
    const std::size_t row = out_shape[axis] * inner;
    std::vector<Real> out(outer * row);
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            auto src = parts[p].data().subspan(o * widths[p], widths[p]);
            std::copy(src.begin(), src.end(), out.begin() + o * row + off);
            off += widths[p];
        }
    }
    return make_result<Real>(std::move(out_shape), std::move(out), parts, "concat",
                             [parts, widths, outer, row](Node<Real>& self) {
                                 std::size_t off = 0;
                                 for (std::size_t p = 0; p < parts.size(); ++p) {
                                     if (parts[p].requires_grad()) {
                                         std::vector<Real> g(outer * widths[p]);
                                         for (std::size_t o = 0; o < outer; ++o)
                                             std::copy_n(self.grad.begin() + o * row + off, widths[p],
                                                         g.begin() + o * widths[p]);
                                         accumulate(parts[p], g);
                                     }
                                     off += widths[p];
                                 }
                             });
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
    Real total = 0;
    for (auto v : x.data()) total += v;
    return make_result<Real>(Shape{1}, std::vector<Real>{total}, {x}, "sum", [x](Node<Real>& self) {
        accumulate(x, std::vector<Real>(x.numel(), self.grad[0]));
    });
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
    return scale(sum(x), Real(1) / Real(x.numel()));
}

template <typename Real>
Tensor<Real> mean_axis(const Tensor<Real>& x, std::size_t axis) {
    const Shape& s = x.shape();
    if (axis >= s.size()) throw DimensionError("mean_axis: axis out of range for " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t n = s[axis];
    Shape out_shape;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (i != axis) out_shape.push_back(s[i]);
    if (out_shape.empty()) out_shape.push_back(1);
    auto in = x.data();
    std::vector<Real> out(outer * inner, Real(0));
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += in[(o * n + k) * inner + i];
    for (auto& v : out) v /= Real(n);
    return make_result<Real>(std::move(out_shape), std::move(out), {x}, "mean_axis",
                             [x, outer, inner, n](Node<Real>& self) {
                                 std::vector<Real> g(x.numel());
                                 for (std::size_t o = 0; o < outer; ++o)
                                     for (std::size_t k = 0; k < n; ++k)
                                         for (std::size_t i = 0; i < inner; ++i)
                                             g[(o * n + k) * inner + i] = self.grad[o * inner + i] / Real(n);
                                 accumulate(x, g);
                             });
}

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<std::size_t>& targets) {
    if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
        throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                             std::to_string(targets.size()) + " targets");
    }
    const std::size_t rows = logits.dim(0);
    const std::size_t k = logits.dim(1);
    auto in = logits.data();
    auto probs = std::make_shared<std::vector<Real>>(rows * k);
    Real total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] >= k) throw LabelError("cross_entropy: target " + std::to_string(targets[r]) + " >= " + std::to_string(k));
        const Real* src = in.data() + r * k;
        Real hi = *std::max_element(src, src + k);
        if (std::isnan(hi)) throw NumericError("cross_entropy: NaN logit");
        Real z = 0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(src[j] - hi);
        const Real lse = hi + std::log(z);
        for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(src[j] - lse);
        total += lse - src[targets[r]];
    }
    return make_result<Real>(Shape{1}, std::vector<Real>{total / Real(rows)}, {logits}, "cross_entropy",
                             [logits, probs, targets, rows, k](Node<Real>& self) {
                                 std::vector<Real> g(*probs);
                                 for (std::size_t r = 0; r < rows; ++r) g[r * k + targets[r]] -= Real(1);
                                 const Real s = self.grad[0] / Real(rows);
                                 for (auto& v : g) v *= s;
                                 accumulate(logits, g);
                             });
}

#define TFK_INSTANTIATE_OPS(R)                                                                     \
    template Tensor<R> add(const Tensor<R>&, const Tensor<R>&);                                    \
    template Tensor<R> mul(const Tensor<R>&, const Tensor<R>&);                                    \
    template Tensor<R> scale(const Tensor<R>&, R);                                                 \
    template Tensor<R> add_broadcast(const Tensor<R>&, const Tensor<R>&);                          \
    template Tensor<R> linear(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&);               \
    template Tensor<R> matmul(const Tensor<R>&, const Tensor<R>&, bool);                           \
    template Tensor<R> softmax(const Tensor<R>&);                                                  \
    template Tensor<R> layer_norm(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&, R);        \
    template Tensor<R> gelu(const Tensor<R>&);                                                     \
    template Tensor<R> gather(const Tensor<R>&, const IndexMap&, Shape);                           \
    template Tensor<R> reshape(const Tensor<R>&, Shape);                                           \
    template Tensor<R> permute(const Tensor<R>&, const std::vector<std::size_t>&);                 \
    template Tensor<R> concat(const std::vector<Tensor<R>>&, std::size_t);                         \
    template Tensor<R> sum(const Tensor<R>&);                                                      \
    template Tensor<R> mean(const Tensor<R>&);                                                     \
    template Tensor<R> mean_axis(const Tensor<R>&, std::size_t);                                   \
    template Tensor<R> cross_entropy(const Tensor<R>&, const std::vector<std::size_t>&);

TFK_INSTANTIATE_OPS(float)
TFK_INSTANTIATE_OPS(double)

}  // namespace tfk
