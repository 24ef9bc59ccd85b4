#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "tensor.hpp"

namespace sgtn {

inline Tensor broadcast_to(const Tensor& t, const std::vector<std::size_t>& shape) {
    if (t.shape() == shape) return t;
    Tensor out(shape);
    const std::size_t rt = t.rank(), ro = shape.size();
    const auto st = t.strides();
    std::vector<std::size_t> idx(ro, 0);
    for (std::size_t lin = 0; lin < out.size(); ++lin) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < rt; ++i) {
            const std::size_t ti = rt - 1 - i;
            const std::size_t oi = ro - 1 - i;
            off += (t.shape()[ti] == 1 ? 0 : idx[oi]) * st[ti];
        }
        out[lin] = t[off];
        for (std::size_t a = ro; a-- > 0;) {
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

/// One vertex of a reverse-mode differentiation graph.
struct Node {
    Tensor value;
    Tensor grad; // allocated lazily; always value-shaped once allocated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor& g)> backward_fn;

    Tensor& ensure_grad() {
        // size check matters for rank 0: a default Tensor shares the scalar shape
        if (!grad.same_shape(value) || grad.size() != value.size())
            grad = Tensor(value.shape(), 0.0);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

/// Handle to a graph node; cheap to copy.
class Var {
public:
    Var() = default;
    explicit Var(Tensor v, bool requires_grad = false) : node_(std::make_shared<Node>()) {
        node_->value = std::move(v);
        node_->requires_grad = requires_grad;
    }
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    bool valid() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& grad() const { return node_->ensure_grad(); }
    bool requires_grad() const { return node_->requires_grad; }
    const NodePtr& node() const { return node_; }

    const std::vector<std::size_t>& shape() const { return node_->value.shape(); }

private:
    NodePtr node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var constant(double v) { return Var(Tensor::scalar(v), false); }

namespace detail {

inline void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite())
        throw std::runtime_error(std::string("non-finite value produced by '") + op + "'");
}

inline Var make_node(Tensor value, std::vector<Var> parents,
                     std::function<void(const Tensor&)> backward, const char* op) {
    check_finite(value, op);
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents) {
        n->parents.push_back(p.node());
        if (p.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return Var(n);
}

inline void accumulate(const NodePtr& n, const Tensor& g) {
    if (!n->requires_grad) return;
    Tensor& acc = n->ensure_grad();
    const Tensor r = reduce_to(g, n->value.shape());
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += r[i];
}

} // namespace detail

// ---- elementwise binary -------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    const auto shape = broadcast_shape(a.shape(), b.shape());
    const Tensor av = broadcast_to(a.value(), shape), bv = broadcast_to(b.value(), shape);
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(std::move(out), {a, b}, [an, bn](const Tensor& g) {
        detail::accumulate(an, g);
        detail::accumulate(bn, g);
    }, "add");
}

inline Var sub(const Var& a, const Var& b) {
    const auto shape = broadcast_shape(a.shape(), b.shape());
    const Tensor av = broadcast_to(a.value(), shape), bv = broadcast_to(b.value(), shape);
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(std::move(out), {a, b}, [an, bn](const Tensor& g) {
        detail::accumulate(an, g);
        Tensor ng(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ng[i] = -g[i];
        detail::accumulate(bn, ng);
    }, "sub");
}

inline Var mul(const Var& a, const Var& b) {
    const auto shape = broadcast_shape(a.shape(), b.shape());
    Tensor av = broadcast_to(a.value(), shape), bv = broadcast_to(b.value(), shape);
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    auto an = a.node(), bn = b.node();
    return detail::make_node(std::move(out), {a, b}, [an, bn, av, bv](const Tensor& g) {
        Tensor ga(g.shape()), gb(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] = g[i] * bv[i];
            gb[i] = g[i] * av[i];
        }
        detail::accumulate(an, ga);
        detail::accumulate(bn, gb);
    }, "mul");
}

inline Var div(const Var& a, const Var& b) {
    const auto shape = broadcast_shape(a.shape(), b.shape());
    Tensor av = broadcast_to(a.value(), shape), bv = broadcast_to(b.value(), shape);
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (bv[i] == 0.0) throw std::domain_error("div: division by zero");
        out[i] = av[i] / bv[i];
    }
    auto an = a.node(), bn = b.node();
    return detail::make_node(std::move(out), {a, b}, [an, bn, av, bv](const Tensor& g) {
        Tensor ga(g.shape()), gb(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] = g[i] / bv[i];
            gb[i] = -g[i] * av[i] / (bv[i] * bv[i]);
        }
        detail::accumulate(an, ga);
        detail::accumulate(bn, gb);
    }, "div");
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator+(const Var& a, double s) { return add(a, constant(s)); }
inline Var operator-(const Var& a, double s) { return sub(a, constant(s)); }
inline Var operator*(const Var& a, double s) { return mul(a, constant(s)); }
inline Var operator/(const Var& a, double s) { return div(a, constant(s)); }
inline Var operator*(double s, const Var& a) { return mul(constant(s), a); }

// ---- elementwise unary --------------------------------------------------

inline Var vneg(const Var& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a.value()[i];
    auto an = a.node();
    return detail::make_node(std::move(out), {a}, [an](const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = -g[i];
        detail::accumulate(an, ga);
    }, "neg");
}

inline Var vexp(const Var& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
    auto an = a.node();
    Tensor ov = out;
    return detail::make_node(std::move(out), {a}, [an, ov](const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * ov[i];
        detail::accumulate(an, ga);
    }, "exp");
}

inline Var vlog(const Var& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (a.value()[i] <= 0.0) throw std::domain_error("log: non-positive input");
        out[i] = std::log(a.value()[i]);
    }
    auto an = a.node();
    Tensor av = a.value();
    return detail::make_node(std::move(out), {a}, [an, av](const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / av[i];
        detail::accumulate(an, ga);
    }, "log");
}

inline Var vtanh(const Var& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
    auto an = a.node();
    Tensor ov = out;
    return detail::make_node(std::move(out), {a}, [an, ov](const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - ov[i] * ov[i]);
        detail::accumulate(an, ga);
    }, "tanh");
}

inline Var vsqrt(const Var& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (a.value()[i] < 0.0) throw std::domain_error("sqrt: negative input");
        out[i] = std::sqrt(a.value()[i]);
    }
    auto an = a.node();
    Tensor ov = out;
    return detail::make_node(std::move(out), {a}, [an, ov](const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * 0.5 / ov[i];
        detail::accumulate(an, ga);
    }, "sqrt");
}

// ---- matmul -------------------------------------------------------------

/// Batched matrix product. Leading batch extents must match exactly; a
/// rank-2 right operand is shared across the left operand's batch.
inline Var matmul(const Var& a, const Var& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) throw std::invalid_argument("matmul: rank must be >= 2");
    const bool shared_b = sb.size() == 2 && sa.size() > 2;
    if (!shared_b && sa.size() != sb.size())
        throw std::invalid_argument("matmul: rank mismatch");
    if (!shared_b)
        for (std::size_t i = 0; i + 2 < sa.size(); ++i)
            if (sa[i] != sb[i]) throw std::invalid_argument("matmul: batch extent mismatch");
    const std::size_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const std::size_t k2 = sb[sb.size() - 2], n = sb[sb.size() - 1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner-dimension mismatch " + Tensor::shape_string(sa) +
                                    " vs " + Tensor::shape_string(sb));
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
    std::vector<std::size_t> os(sa.begin(), sa.end() - 2);
    os.push_back(m);
    os.push_back(n);
    Tensor out(os);
    const double* pa = a.value().data();
    const double* pb = b.value().data();
    double* po = out.data();
    for (std::size_t q = 0; q < batch; ++q) {
        const double* A = pa + q * m * k;
        const double* B = pb + (shared_b ? 0 : q * k * n);
        double* O = po + q * m * n;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < k; ++t) s += A[i * k + t] * B[t * n + j];
                O[i * n + j] = s;
            }
    }
    auto an = a.node(), bn = b.node();
    Tensor av = a.value(), bv = b.value();
    return detail::make_node(std::move(out), {a, b},
        [an, bn, av, bv, batch, m, k, n, shared_b](const Tensor& g) {
            if (an->requires_grad) {
                Tensor ga(av.shape(), 0.0);
                for (std::size_t q = 0; q < batch; ++q) {
                    const double* G = g.data() + q * m * n;
                    const double* B = bv.data() + (shared_b ? 0 : q * k * n);
                    double* GA = ga.data() + q * m * k;
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t t = 0; t < k; ++t) {
                            double s = 0.0;
                            for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[t * n + j];
                            GA[i * k + t] += s;
                        }
                }
                detail::accumulate(an, ga);
            }
            if (bn->requires_grad) {
                Tensor gb(bv.shape(), 0.0);
                for (std::size_t q = 0; q < batch; ++q) {
                    const double* G = g.data() + q * m * n;
                    const double* A = av.data() + q * m * k;
                    double* GB = gb.data() + (shared_b ? 0 : q * k * n);
                    for (std::size_t t = 0; t < k; ++t)
                        for (std::size_t j = 0; j < n; ++j) {
                            double s = 0.0;
                            for (std::size_t i = 0; i < m; ++i) s += A[i * k + t] * G[i * n + j];
                            GB[t * n + j] += s;
                        }
                }
                detail::accumulate(bn, gb);
            }
        }, "matmul");
}

// ---- conv2d over the time axis ------------------------------------------

/// x: T x K x Cin, kernel: H x 1 x Cin x Cout, zero padding (H-1)/2 on the
/// time axis so the (T, K) resolution is preserved. W must be 1.
inline Var conv2d(const Var& x, const Var& kernel) {
    const auto& sx = x.shape();
    const auto& sk = kernel.shape();
    if (sx.size() != 3) throw std::invalid_argument("conv2d: input must be T x K x Cin");
    if (sk.size() != 4) throw std::invalid_argument("conv2d: kernel must be H x W x Cin x Cout");
    const std::size_t T = sx[0], K = sx[1], Cin = sx[2];
    const std::size_t H = sk[0], W = sk[1], KCin = sk[2], Cout = sk[3];
    if (W != 1) throw std::invalid_argument("conv2d: kernel width must be 1");
    if (H % 2 == 0) throw std::invalid_argument("conv2d: kernel height must be odd");
    if (KCin != Cin) throw std::invalid_argument("conv2d: channel mismatch");
    const std::size_t pad = (H - 1) / 2;
    Tensor out({T, K, Cout}, 0.0);
    const double* px = x.value().data();
    const double* pw = kernel.value().data();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t h = 0; h < H; ++h) {
            const long ts = static_cast<long>(t) + static_cast<long>(h) - static_cast<long>(pad);
            if (ts < 0 || ts >= static_cast<long>(T)) continue;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                    const double xv = px[(ts * K + k) * Cin + ci];
                    if (xv == 0.0) continue;
                    const double* wrow = pw + (h * Cin + ci) * Cout;
                    double* orow = out.data() + (t * K + k) * Cout;
                    for (std::size_t co = 0; co < Cout; ++co) orow[co] += xv * wrow[co];
                }
        }
    auto xn = x.node(), wn = kernel.node();
    Tensor xv = x.value(), wv = kernel.value();
    return detail::make_node(std::move(out), {x, kernel},
        [xn, wn, xv, wv, T, K, Cin, H, Cout, pad](const Tensor& g) {
            if (xn->requires_grad) {
                Tensor gx(xv.shape(), 0.0);
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t h = 0; h < H; ++h) {
                        const long ts = static_cast<long>(t) + static_cast<long>(h) - static_cast<long>(pad);
                        if (ts < 0 || ts >= static_cast<long>(T)) continue;
                        for (std::size_t k = 0; k < K; ++k)
                            for (std::size_t ci = 0; ci < Cin; ++ci) {
                                const double* wrow = wv.data() + (h * Cin + ci) * Cout;
                                const double* grow = g.data() + (t * K + k) * Cout;
                                double s = 0.0;
                                for (std::size_t co = 0; co < Cout; ++co) s += grow[co] * wrow[co];
                                gx[(ts * K + k) * Cin + ci] += s;
                            }
                    }
                detail::accumulate(xn, gx);
            }
            if (wn->requires_grad) {
                Tensor gw(wv.shape(), 0.0);
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t h = 0; h < H; ++h) {
                        const long ts = static_cast<long>(t) + static_cast<long>(h) - static_cast<long>(pad);
                        if (ts < 0 || ts >= static_cast<long>(T)) continue;
                        for (std::size_t k = 0; k < K; ++k)
                            for (std::size_t ci = 0; ci < Cin; ++ci) {
                                const double xval = xv[(ts * K + k) * Cin + ci];
                                if (xval == 0.0) continue;
                                const double* grow = g.data() + (t * K + k) * Cout;
                                double* wrow = gw.data() + (h * Cin + ci) * Cout;
                                for (std::size_t co = 0; co < Cout; ++co) wrow[co] += xval * grow[co];
                            }
                    }
                detail::accumulate(wn, gw);
            }
        }, "conv2d");
}

// ---- softmax ------------------------------------------------------------

/// Numerically stable softmax along `axis` (max-subtraction).
inline Var softmax(const Var& x, std::size_t axis) {
    const auto& s = x.shape();
    if (axis >= s.size()) throw std::invalid_argument("softmax: axis out of range");
    const std::size_t n = s[axis];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    Tensor out(s);
    const double* px = x.value().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, px[(o * n + j) * inner + in]);
            double denom = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double e = std::exp(px[(o * n + j) * inner + in] - mx);
                out[(o * n + j) * inner + in] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < n; ++j) out[(o * n + j) * inner + in] /= denom;
        }
    auto xn = x.node();
    Tensor ov = out;
    return detail::make_node(std::move(out), {x},
        [xn, ov, outer, inner, n](const Tensor& g) {
            Tensor gx(ov.shape());
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t ix = (o * n + j) * inner + in;
                        dot += g[ix] * ov[ix];
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t ix = (o * n + j) * inner + in;
                        gx[ix] = ov[ix] * (g[ix] - dot);
                    }
                }
            detail::accumulate(xn, gx);
        }, "softmax");
}

// ---- reductions ---------------------------------------------------------

enum class Reduce { sum, mean };

/// Reduce along one axis. keepdims keeps a size-1 extent in place.
inline Var reduce(Reduce op, const Var& x, std::size_t axis, bool keepdims = false) {
    const auto& s = x.shape();
    if (axis >= s.size()) throw std::invalid_argument("reduce: axis out of range");
    const std::size_t n = s[axis];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<std::size_t> os;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == axis) {
            if (keepdims) os.push_back(1);
        } else {
            os.push_back(s[i]);
        }
    }
    Tensor out(os, 0.0);
    const double* px = x.value().data();
    const double scale = op == Reduce::mean ? 1.0 / static_cast<double>(n) : 1.0;
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += px[(o * n + j) * inner + in];
            out[o * inner + in] = acc * scale;
        }
    auto xn = x.node();
    auto xshape = s;
    return detail::make_node(std::move(out), {x},
        [xn, xshape, outer, inner, n, scale](const Tensor& g) {
            Tensor gx(xshape);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    const double gv = g[o * inner + in] * scale;
                    for (std::size_t j = 0; j < n; ++j) gx[(o * n + j) * inner + in] = gv;
                }
            detail::accumulate(xn, gx);
        }, "reduce");
}

/// Reduce over all axes to a rank-0 scalar.
inline Var reduce_all(Reduce op, const Var& x) {
    const std::size_t n = x.value().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x.value()[i];
    const double scale = op == Reduce::mean ? 1.0 / static_cast<double>(n) : 1.0;
    Tensor out = Tensor::scalar(acc * scale);
    auto xn = x.node();
    auto xshape = x.shape();
    return detail::make_node(std::move(out), {x}, [xn, xshape, scale](const Tensor& g) {
        Tensor gx(xshape, g[0] * scale);
        detail::accumulate(xn, gx);
    }, "reduce");
}

inline Var sum(const Var& x) { return reduce_all(Reduce::sum, x); }
inline Var mean(const Var& x) { return reduce_all(Reduce::mean, x); }
inline Var sum(const Var& x, std::size_t axis, bool keepdims = false) {
    return reduce(Reduce::sum, x, axis, keepdims);
}
inline Var mean(const Var& x, std::size_t axis, bool keepdims = false) {
    return reduce(Reduce::mean, x, axis, keepdims);
}

// ---- shape manipulation -------------------------------------------------

inline Var reshape(const Var& x, std::vector<std::size_t> shape) {
    if (Tensor::shape_size(shape) != x.value().size())
        throw std::invalid_argument("reshape: size mismatch");
    Tensor out(shape, std::vector<double>(x.value().data(), x.value().data() + x.value().size()));
    auto xn = x.node();
    auto xshape = x.shape();
    return detail::make_node(std::move(out), {x}, [xn, xshape](const Tensor& g) {
        Tensor gx(xshape, std::vector<double>(g.data(), g.data() + g.size()));
        detail::accumulate(xn, gx);
    }, "reshape");
}

inline Tensor permute_tensor(const Tensor& t, const std::vector<std::size_t>& perm) {
    if (perm.size() != t.rank()) throw std::invalid_argument("permute: rank mismatch");
    std::vector<std::size_t> os(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) os[i] = t.shape()[perm[i]];
    Tensor out(os);
    const auto st = t.strides();
    std::vector<std::size_t> idx(os.size(), 0);
    for (std::size_t lin = 0; lin < out.size(); ++lin) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) off += idx[i] * st[perm[i]];
        out[lin] = t[off];
        for (std::size_t a = os.size(); a-- > 0;) {
            if (++idx[a] < os[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

inline Var permute(const Var& x, std::vector<std::size_t> perm) {
    Tensor out = permute_tensor(x.value(), perm);
    auto xn = x.node();
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return detail::make_node(std::move(out), {x}, [xn, inv](const Tensor& g) {
        detail::accumulate(xn, permute_tensor(g, inv));
    }, "permute");
}

/// Swap the last two axes (for Q . K^T style products).
inline Var transpose_last2(const Var& x) {
    std::vector<std::size_t> perm(x.shape().size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
    return permute(x, perm);
}

inline Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len) {
    const auto& s = x.shape();
    if (axis >= s.size() || start + len > s[axis]) throw std::invalid_argument("slice: out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<std::size_t> os = s;
    os[axis] = len;
    Tensor out(os);
    const std::size_t n = s[axis];
    const double* px = x.value().data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < len; ++j)
            std::copy(px + (o * n + start + j) * inner, px + (o * n + start + j + 1) * inner,
                      out.data() + (o * len + j) * inner);
    auto xn = x.node();
    auto xshape = s;
    return detail::make_node(std::move(out), {x},
        [xn, xshape, axis, start, len, outer, inner, n](const Tensor& g) {
            Tensor gx(xshape, 0.0);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < len; ++j)
                    std::copy(g.data() + (o * len + j) * inner, g.data() + (o * len + j + 1) * inner,
                              gx.data() + (o * n + start + j) * inner);
            detail::accumulate(xn, gx);
        }, "slice");
}

inline Var concat(const std::vector<Var>& xs, std::size_t axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input");
    const auto& s0 = xs[0].shape();
    std::size_t total = 0;
    for (const auto& x : xs) {
        const auto& s = x.shape();
        if (s.size() != s0.size()) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != s0[i]) throw std::invalid_argument("concat: extent mismatch");
        total += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    std::vector<std::size_t> os = s0;
    os[axis] = total;
    Tensor out(os);
    std::vector<std::size_t> lens;
    std::size_t off = 0;
    for (const auto& x : xs) {
        const std::size_t len = x.shape()[axis];
        lens.push_back(len);
        const double* px = x.value().data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(px + o * len * inner, px + (o + 1) * len * inner,
                      out.data() + (o * total + off) * inner);
        off += len;
    }
    std::vector<NodePtr> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    return detail::make_node(std::move(out), xs,
        [nodes, lens, outer, inner, total](const Tensor& g) {
            std::size_t off = 0;
            for (std::size_t p = 0; p < nodes.size(); ++p) {
                const std::size_t len = lens[p];
                if (nodes[p]->requires_grad) {
                    auto shp = nodes[p]->value.shape();
                    Tensor gx(shp);
                    for (std::size_t o = 0; o < outer; ++o)
                        std::copy(g.data() + (o * total + off) * inner,
                                  g.data() + (o * total + off + len) * inner,
                                  gx.data() + o * len * inner);
                    detail::accumulate(nodes[p], gx);
                }
                off += len;
            }
        }, "concat");
}

// ---- backward -----------------------------------------------------------

/// Reverse-mode sweep from a scalar root. Gradients accumulate on leaves
/// until explicitly zeroed.
inline void backward(const Var& root) {
    if (root.value().size() != 1)
        throw std::invalid_argument("backward: root must be scalar, got shape " +
                                    Tensor::shape_string(root.shape()));
    if (!root.requires_grad()) return;

    // iterative post-order over grad-requiring nodes
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            NodePtr p = n->parents[next++];
            if (p->requires_grad && !visited.count(p.get())) {
                visited.insert(p.get());
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n.get());
            stack.pop_back();
        }
    }
    root.node()->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(n->ensure_grad());
    }
}

// ---- parameters ---------------------------------------------------------

/// A trainable leaf with a stable name (used by the checkpoint format).
struct Parameter {
    std::string name;
    Var var;
};

class ParameterStore {
public:
    Var add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        Var v(std::move(init), true);
        index_[name] = params_.size();
        params_.push_back({name, v});
        return v;
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Var get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no such parameter: " + name);
        return params_[it->second].var;
    }

    void zero_grad() {
        for (auto& p : params_) p.var.grad().fill(0.0);
    }

    std::size_t count() const { return params_.size(); }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.var.value().size();
        return n;
    }

    std::vector<Parameter>& items() { return params_; }
    const std::vector<Parameter>& items() const { return params_; }

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace sgtn
