#include "memroute/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

#include "memroute/kernels.hpp"
#include "memroute/tape.hpp"

namespace memroute::ops {

namespace {

namespace K = memroute::kernels;

template <typename T>
bool taping(std::initializer_list<const Tensor<T>*> inputs) {
    if (!Tape<T>::active()) return false;
    for (const auto* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

template <typename T>
void record(Tensor<T>& out, std::function<void()> fn) {
    auto* tape = Tape<T>::active();
    out.set_requires_grad(true);
    out.set_creator_tape(tape->id());
    tape->record(std::move(fn));
}

// Broadcast plan for elementwise binaries (numpy alignment at trailing axes).
struct BcastPlan {
    Shape oshape;
    std::vector<std::size_t> astr, bstr;
    bool same = false;
};

BcastPlan make_bcast(const Shape& a, const Shape& b, const char* op) {
    BcastPlan plan;
    if (a == b) {
        plan.oshape = a;
        plan.same = true;
        return plan;
    }
    const std::size_t nd = std::max(a.size(), b.size());
    plan.oshape.resize(nd);
    plan.astr.assign(nd, 0);
    plan.bstr.assign(nd, 0);
    // row-major strides in each operand's own shape
    std::vector<std::size_t> as(a.size()), bs(b.size());
    std::size_t acc = 1;
    for (std::size_t i = a.size(); i-- > 0;) as[i] = acc, acc *= a[i];
    acc = 1;
    for (std::size_t i = b.size(); i-- > 0;) bs[i] = acc, acc *= b[i];
    for (std::size_t d = 0; d < nd; ++d) {
        const bool ha = d >= nd - a.size();
        const bool hb = d >= nd - b.size();
        const std::size_t da = ha ? a[d - (nd - a.size())] : 1;
        const std::size_t db = hb ? b[d - (nd - b.size())] : 1;
        if (da != db && da != 1 && db != 1)
            throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                             shape_str(b) + " are not broadcastable");
        plan.oshape[d] = std::max(da, db);
        if (ha && da != 1) plan.astr[d] = as[d - (nd - a.size())];
        if (hb && db != 1) plan.bstr[d] = bs[d - (nd - b.size())];
    }
    return plan;
}

// Sum `g` (shape gshape) into target's grad buffer, reducing the axes that
// were broadcast away.
template <typename T>
void accumulate_reduced(Tensor<T> target, std::span<const T> g, const Shape& gshape) {
    auto buf = target.grad_buffer();
    const Shape& ts = target.shape();
    if (ts == gshape) {
        K::accumulate(g.data(), buf.data(), g.size());
        return;
    }
    const std::size_t nd = gshape.size();
    std::vector<std::size_t> tstr(nd, 0);
    std::vector<std::size_t> own(ts.size());
    std::size_t acc = 1;
    for (std::size_t i = ts.size(); i-- > 0;) own[i] = acc, acc *= ts[i];
    for (std::size_t d = 0; d < nd; ++d) {
        const bool has = d >= nd - ts.size();
        if (has && ts[d - (nd - ts.size())] != 1) tstr[d] = own[d - (nd - ts.size())];
    }
    std::vector<std::size_t> coord(nd, 0);
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < nd; ++d) off += coord[d] * tstr[d];
        buf[off] += g[idx];
        for (std::size_t d = nd; d-- > 0;) {
            if (++coord[d] < gshape[d]) break;
            coord[d] = 0;
        }
    }
}

// g (full output shape) times `other` broadcast up to the same shape.
template <typename T>
Tensor<T> mul_against(std::span<const T> g, const Shape& gs, const Tensor<T>& other) {
    Tensor<T> tmp = Tensor<T>::zeros(gs);
    BcastPlan p = make_bcast(gs, other.shape(), "mul_bwd");
    if (p.same) {
        K::binary_same(K::BinaryOp::mul, g.data(), other.data().data(),
                       tmp.mut_data().data(), tmp.size());
    } else {
        K::binary_bcast(K::BinaryOp::mul, g.data(), p.astr.data(), other.data().data(),
                        p.bstr.data(), tmp.mut_data().data(), p.oshape.data(),
                        p.oshape.size());
    }
    return tmp;
}

template <typename T>
Tensor<T> binary_op(K::BinaryOp kop, const char* name, const Tensor<T>& a,
                    const Tensor<T>& b) {
    BcastPlan plan = make_bcast(a.shape(), b.shape(), name);
    Tensor<T> out = Tensor<T>::zeros(plan.oshape);
    if (plan.same) {
        K::binary_same(kop, a.data().data(), b.data().data(), out.mut_data().data(),
                       out.size());
    } else {
        K::binary_bcast(kop, a.data().data(), plan.astr.data(), b.data().data(),
                        plan.bstr.data(), out.mut_data().data(), plan.oshape.data(),
                        plan.oshape.size());
    }
    ensure_finite(out, name);
    if (taping<T>({&a, &b})) {
        record(out, [kop, a, b, out]() {
            if (!out.has_grad()) return;
            const auto g = out.grad();
            const Shape& gs = out.shape();
            if (a.requires_grad()) {
                if (kop == K::BinaryOp::mul) {
                    Tensor<T> tmp = mul_against(g, gs, b);
                    accumulate_reduced(a, tmp.data(), gs);
                } else {
                    accumulate_reduced(a, g, gs);
                }
            }
            if (b.requires_grad()) {
                if (kop == K::BinaryOp::mul) {
                    Tensor<T> tmp = mul_against(g, gs, a);
                    accumulate_reduced(b, tmp.data(), gs);
                } else if (kop == K::BinaryOp::sub) {
                    std::vector<T> neg(g.begin(), g.end());
                    for (T& v : neg) v = -v;
                    accumulate_reduced(b, std::span<const T>(neg), gs);
                } else {
                    accumulate_reduced(b, g, gs);
                }
            }
        });
    }
    return out;
}

std::size_t normalize_axis(int axis, std::size_t ndim, const char* op) {
    const int nd = static_cast<int>(ndim);
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd)
        throw ShapeError(std::string(op) + ": axis out of range for ndim " +
                         std::to_string(ndim));
    return static_cast<std::size_t>(axis);
}

// Raw permute of values; used by forward and (with the inverse) backward.
template <typename T>
std::vector<T> permute_values(std::span<const T> x, const Shape& in_shape,
                              const std::vector<std::size_t>& perm) {
    const std::size_t nd = in_shape.size();
    if (nd == 0) return std::vector<T>(x.begin(), x.end());
    Shape out_shape(nd);
    for (std::size_t d = 0; d < nd; ++d) out_shape[d] = in_shape[perm[d]];
    std::vector<std::size_t> in_str(nd, 1), map(nd);
    for (std::size_t i = nd - 1; i-- > 0;) in_str[i] = in_str[i + 1] * in_shape[i + 1];
    for (std::size_t d = 0; d < nd; ++d) map[d] = in_str[perm[d]];
    std::vector<T> out(x.size());
    std::vector<std::size_t> coord(nd, 0);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < nd; ++d) off += coord[d] * map[d];
        out[idx] = x[off];
        for (std::size_t d = nd; d-- > 0;) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
        }
    }
    return out;
}

}  // namespace

template <typename T>
void ensure_finite(const Tensor<T>& x, const char* op) {
    if (!K::all_finite(x.data().data(), x.size()))
        throw NumericError(std::string(op) + " produced a non-finite value");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(K::BinaryOp::add, "add", a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(K::BinaryOp::sub, "sub", a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return binary_op(K::BinaryOp::mul, "mul", a, b);
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, T mul_c, T add_c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::affine_map(x.data().data(), mul_c, add_c, out.mut_data().data(), x.size());
    ensure_finite(out, "affine");
    if (taping<T>({&x})) {
        record(out, [x, out, mul_c]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            auto g = out.grad();
            auto buf = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) buf[i] += mul_c * g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::sigmoid_map(x.data().data(), out.mut_data().data(), x.size());
    ensure_finite(out, "sigmoid");
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<T> gx(x.size());
            K::sigmoid_bwd(out.data().data(), out.grad().data(), gx.data(), x.size());
            K::accumulate(gx.data(), x.grad_buffer().data(), x.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::gelu_map(x.data().data(), out.mut_data().data(), x.size());
    ensure_finite(out, "gelu");
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<T> gx(x.size());
            K::gelu_bwd(x.data().data(), out.grad().data(), gx.data(), x.size());
            K::accumulate(gx.data(), x.grad_buffer().data(), x.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::abs_map(x.data().data(), out.mut_data().data(), x.size());
    ensure_finite(out, "abs");
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<T> gx(x.size());
            K::abs_bwd(x.data().data(), out.grad().data(), gx.data(), x.size());
            K::accumulate(gx.data(), x.grad_buffer().data(), x.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return mul(x, x);
}

namespace {

// Normalizes a/b to (batch, rows, cols) views for the matmul family.
struct MatmulDims {
    std::size_t batch, n, m, p;
    bool shared_b;
    Shape out_shape;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b, bool b_transposed, const char* op) {
    if (a.size() < 2 || b.size() < 2)
        throw ShapeError(std::string(op) + ": operands must have >= 2 dims, got " +
                         shape_str(a) + " and " + shape_str(b));
    MatmulDims d;
    d.n = a[a.size() - 2];
    d.m = a[a.size() - 1];
    const std::size_t b_rows = b[b.size() - 2], b_cols = b[b.size() - 1];
    d.p = b_transposed ? b_rows : b_cols;
    const std::size_t b_inner = b_transposed ? b_cols : b_rows;
    if (b_inner != d.m)
        throw ShapeError(std::string(op) + ": inner dimensions do not match: " +
                         shape_str(a) + " vs " + shape_str(b));
    d.batch = 1;
    for (std::size_t i = 0; i + 2 < a.size(); ++i) d.batch *= a[i];
    d.shared_b = b.size() == 2;
    if (!d.shared_b) {
        if (b.size() != a.size())
            throw ShapeError(std::string(op) + ": batch ranks differ: " + shape_str(a) +
                             " vs " + shape_str(b));
        for (std::size_t i = 0; i + 2 < a.size(); ++i)
            if (a[i] != b[i])
                throw ShapeError(std::string(op) + ": batch dims differ: " + shape_str(a) +
                                 " vs " + shape_str(b));
    }
    d.out_shape.assign(a.begin(), a.end() - 2);
    d.out_shape.push_back(d.n);
    d.out_shape.push_back(d.p);
    return d;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    MatmulDims d = matmul_dims(a.shape(), b.shape(), false, "matmul");
    Tensor<T> out = Tensor<T>::zeros(d.out_shape);
    K::matmul(a.data().data(), b.data().data(), out.mut_data().data(), d.batch, d.n, d.m,
              d.p, d.shared_b);
    ensure_finite(out, "matmul");
    if (taping<T>({&a, &b})) {
        record(out, [a, b, out, d]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            if (a.requires_grad()) {
                // ga = g . b^T
                std::vector<T> ga(a.size());
                K::matmul_nt(g, b.data().data(), ga.data(), d.batch, d.n, d.p, d.m,
                             d.shared_b);
                K::accumulate(ga.data(), a.grad_buffer().data(), ga.size());
            }
            if (b.requires_grad()) {
                // gb = a^T . g, accumulated over the batch when b is shared
                if (d.shared_b && d.batch > 1) {
                    std::vector<T> gb(b.size());
                    std::vector<T> tmp(b.size());
                    for (std::size_t bi = 0; bi < d.batch; ++bi) {
                        K::matmul_tn(a.data().data() + bi * d.n * d.m, g + bi * d.n * d.p,
                                     tmp.data(), 1, d.m, d.n, d.p, false);
                        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += tmp[i];
                    }
                    K::accumulate(gb.data(), b.grad_buffer().data(), gb.size());
                } else {
                    std::vector<T> gb(b.size());
                    K::matmul_tn(a.data().data(), g, gb.data(), d.batch, d.m, d.n, d.p,
                                 false);
                    K::accumulate(gb.data(), b.grad_buffer().data(), gb.size());
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    MatmulDims d = matmul_dims(a.shape(), b.shape(), true, "matmul_nt");
    Tensor<T> out = Tensor<T>::zeros(d.out_shape);
    K::matmul_nt(a.data().data(), b.data().data(), out.mut_data().data(), d.batch, d.n, d.m,
                 d.p, d.shared_b);
    ensure_finite(out, "matmul_nt");
    if (taping<T>({&a, &b})) {
        record(out, [a, b, out, d]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            if (a.requires_grad()) {
                // ga = g . b
                std::vector<T> ga(a.size());
                K::matmul(g, b.data().data(), ga.data(), d.batch, d.n, d.p, d.m, d.shared_b);
                K::accumulate(ga.data(), a.grad_buffer().data(), ga.size());
            }
            if (b.requires_grad()) {
                // gb = g^T . a
                if (d.shared_b && d.batch > 1) {
                    std::vector<T> gb(b.size());
                    std::vector<T> tmp(b.size());
                    for (std::size_t bi = 0; bi < d.batch; ++bi) {
                        K::matmul_tn(g + bi * d.n * d.p, a.data().data() + bi * d.n * d.m,
                                     tmp.data(), 1, d.p, d.n, d.m, false);
                        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += tmp[i];
                    }
                    K::accumulate(gb.data(), b.grad_buffer().data(), gb.size());
                } else {
                    std::vector<T> gb(b.size());
                    K::matmul_tn(g, a.data().data(), gb.data(), d.batch, d.p, d.n, d.m,
                                 false);
                    K::accumulate(gb.data(), b.grad_buffer().data(), gb.size());
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
    const std::size_t ax = normalize_axis(axis, x.ndim(), "softmax");
    if (ax != x.ndim() - 1) {
        std::vector<std::size_t> perm(x.ndim());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::swap(perm[ax], perm[x.ndim() - 1]);
        return permute(softmax(permute(x, perm), -1), perm);
    }
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.size() / std::max<std::size_t>(cols, 1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::softmax_rows(x.data().data(), out.mut_data().data(), rows, cols);
    ensure_finite(out, "softmax");
    if (taping<T>({&x})) {
        record(out, [x, out, rows, cols]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<T> gx(x.size());
            K::softmax_bwd_rows(out.data().data(), out.grad().data(), gx.data(), rows, cols);
            K::accumulate(gx.data(), x.grad_buffer().data(), gx.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
    const std::size_t ax = normalize_axis(axis, x.ndim(), "log_softmax");
    if (ax != x.ndim() - 1) {
        std::vector<std::size_t> perm(x.ndim());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        std::swap(perm[ax], perm[x.ndim() - 1]);
        return permute(log_softmax(permute(x, perm), -1), perm);
    }
    const std::size_t cols = x.shape().back();
    const std::size_t rows = x.size() / std::max<std::size_t>(cols, 1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::log_softmax_rows(x.data().data(), out.mut_data().data(), rows, cols);
    ensure_finite(out, "log_softmax");
    if (taping<T>({&x})) {
        record(out, [x, out, rows, cols]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<T> gx(x.size());
            K::log_softmax_bwd_rows(out.data().data(), out.grad().data(), gx.data(), rows,
                                    cols);
            K::accumulate(gx.data(), x.grad_buffer().data(), gx.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps) {
    if (x.ndim() < 1)
        throw ShapeError("layer_norm: input must have at least one axis");
    const std::size_t cols = x.shape().back();
    if (gain.ndim() != 1 || gain.dim(0) != cols || bias.ndim() != 1 || bias.dim(0) != cols)
        throw ShapeError("layer_norm: gain/bias must be 1-D of length " +
                         std::to_string(cols) + ", got " + shape_str(gain.shape()) +
                         " and " + shape_str(bias.shape()));
    const std::size_t rows = x.size() / cols;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    Tensor<T> xhat = Tensor<T>::zeros(x.shape());
    Tensor<T> inv_std = Tensor<T>::zeros({rows});
    K::layer_norm_rows(x.data().data(), gain.data().data(), bias.data().data(), eps,
                       out.mut_data().data(), xhat.mut_data().data(),
                       inv_std.mut_data().data(), rows, cols);
    ensure_finite(out, "layer_norm");
    if (taping<T>({&x, &gain, &bias})) {
        record(out, [x, gain, bias, out, xhat, inv_std, rows, cols]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            std::vector<T> gx(x.size()), ggain(cols, T(0)), gbias(cols, T(0));
            K::layer_norm_bwd_rows(xhat.data().data(), inv_std.data().data(),
                                   gain.data().data(), g, gx.data(), ggain.data(),
                                   gbias.data(), rows, cols);
            if (x.requires_grad())
                K::accumulate(gx.data(), x.grad_buffer().data(), gx.size());
            if (gain.requires_grad())
                K::accumulate(ggain.data(), gain.grad_buffer().data(), cols);
            if (bias.requires_grad())
                K::accumulate(gbias.data(), bias.grad_buffer().data(), cols);
        });
    }
    return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel) {
    if (x.ndim() != 4)
        throw ShapeError("depthwise_conv2d: input must be [B,C,H,W], got " +
                         shape_str(x.shape()));
    if (kernel.ndim() != 3 || kernel.dim(0) != x.dim(1))
        throw ShapeError("depthwise_conv2d: kernel must be [C,kh,kw] with C=" +
                         std::to_string(x.dim(1)) + ", got " + shape_str(kernel.shape()));
    const std::size_t kh = kernel.dim(1), kw = kernel.dim(2);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw ConfigError("depthwise_conv2d: kernel dims must be odd, got " +
                          shape_str(kernel.shape()));
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::dwconv2d(x.data().data(), kernel.data().data(), out.mut_data().data(), B, C, H, W,
                kh, kw);
    ensure_finite(out, "depthwise_conv2d");
    if (taping<T>({&x, &kernel})) {
        record(out, [x, kernel, out, B, C, H, W, kh, kw]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            if (x.requires_grad())
                K::dwconv2d_bwd_input(kernel.data().data(), g, x.grad_buffer().data(), B, C,
                                      H, W, kh, kw);
            if (kernel.requires_grad())
                K::dwconv2d_bwd_kernel(x.data().data(), g, kernel.grad_buffer().data(), B,
                                       C, H, W, kh, kw);
        });
    }
    return out;
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernel) {
    if (x.ndim() != 3 || x.dim(1) != 1)
        throw ShapeError("conv1d: input must be [B,1,C], got " + shape_str(x.shape()));
    if (kernel.ndim() != 1)
        throw ShapeError("conv1d: kernel must be 1-D, got " + shape_str(kernel.shape()));
    const std::size_t kw = kernel.dim(0);
    if (kw % 2 == 0)
        throw ConfigError("conv1d: kernel length must be odd, got " + std::to_string(kw));
    const std::size_t B = x.dim(0), L = x.dim(2);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    K::conv1d_same(x.data().data(), kernel.data().data(), out.mut_data().data(), B, L, kw);
    ensure_finite(out, "conv1d");
    if (taping<T>({&x, &kernel})) {
        record(out, [x, kernel, out, B, L, kw]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            if (x.requires_grad())
                K::conv1d_bwd_input(kernel.data().data(), g, x.grad_buffer().data(), B, L,
                                    kw);
            if (kernel.requires_grad())
                K::conv1d_bwd_kernel(x.data().data(), g, kernel.grad_buffer().data(), B, L,
                                     kw);
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis, bool keepdim) {
    if (axis >= x.ndim())
        throw ShapeError("mean_axis: axis out of range for shape " + shape_str(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    const std::size_t n = x.dim(axis);
    Shape oshape;
    for (std::size_t i = 0; i < x.ndim(); ++i) {
        if (i == axis) {
            if (keepdim) oshape.push_back(1);
        } else {
            oshape.push_back(x.dim(i));
        }
    }
    Tensor<T> out = Tensor<T>::zeros(oshape);
    K::reduce_sum_mid(x.data().data(), out.mut_data().data(), outer, n, inner);
    const T inv = T(1) / static_cast<T>(n);
    for (T& v : out.mut_data()) v *= inv;
    ensure_finite(out, "mean_axis");
    if (taping<T>({&x})) {
        record(out, [x, out, outer, n, inner, inv]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            const auto g = out.grad();
            auto buf = x.grad_buffer();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < n; ++k)
                    for (std::size_t i = 0; i < inner; ++i)
                        buf[(o * n + k) * inner + i] += g[o * inner + i] * inv;
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    ensure_finite(out, "sum_all");
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            const T g = out.grad()[0];
            auto buf = x.grad_buffer();
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    return affine(sum_all(x), T(1) / static_cast<T>(x.size()), T(0));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    Tensor<T> out = Tensor<T>::from(std::move(shape),
                                    std::vector<T>(x.data().begin(), x.data().end()));
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            K::accumulate(out.grad().data(), x.grad_buffer().data(), x.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm) {
    if (perm.size() != x.ndim())
        throw ShapeError("permute: permutation size mismatch for " + shape_str(x.shape()));
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t d : perm) {
        if (d >= perm.size() || seen[d]) throw ShapeError("permute: invalid permutation");
        seen[d] = true;
    }
    Shape oshape(x.ndim());
    for (std::size_t d = 0; d < perm.size(); ++d) oshape[d] = x.dim(perm[d]);
    Tensor<T> out = Tensor<T>::from(oshape, permute_values(x.data(), x.shape(), perm));
    if (taping<T>({&x})) {
        record(out, [x, out, perm]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            std::vector<std::size_t> inv(perm.size());
            for (std::size_t d = 0; d < perm.size(); ++d) inv[perm[d]] = d;
            auto gx = permute_values(out.grad(), out.shape(), inv);
            K::accumulate(gx.data(), x.grad_buffer().data(), gx.size());
        });
    }
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    if (x.ndim() != 2) throw ShapeError("transpose: expects 2-D, got " + shape_str(x.shape()));
    return permute(x, {1, 0});
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
    BcastPlan plan = make_bcast(x.shape(), shape, "broadcast_to");
    if (plan.oshape != shape)
        throw ShapeError("broadcast_to: cannot broadcast " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
    if (plan.same) return reshape(x, shape);
    Tensor<T> out = Tensor<T>::zeros(shape);
    std::vector<std::size_t> coord(shape.size(), 0);
    auto dst = out.mut_data();
    const auto src = x.data();
    for (std::size_t idx = 0; idx < dst.size(); ++idx) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < shape.size(); ++d) off += coord[d] * plan.astr[d];
        dst[idx] = src[off];
        for (std::size_t d = shape.size(); d-- > 0;) {
            if (++coord[d] < shape[d]) break;
            coord[d] = 0;
        }
    }
    if (taping<T>({&x})) {
        record(out, [x, out]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            accumulate_reduced(x, out.grad(), out.shape());
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range");
    Shape oshape = first;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const Shape& s = parts[i].shape();
        if (s.size() != first.size())
            throw ShapeError("concat: rank mismatch between inputs");
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != first[d])
                throw ShapeError("concat: shape mismatch at non-concat axis: " +
                                 shape_str(first) + " vs " + shape_str(s));
        oshape[axis] += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
    for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
    Tensor<T> out = Tensor<T>::zeros(oshape);
    auto dst = out.mut_data();
    const std::size_t orow = oshape[axis] * inner;
    std::size_t col0 = 0;
    for (const auto& part : parts) {
        const std::size_t prow = part.dim(axis) * inner;
        const auto src = part.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(dst.data() + o * orow + col0, src.data() + o * prow,
                        prow * sizeof(T));
        col0 += prow;
    }
    bool any_grad = false;
    for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
    if (Tape<T>::active() && any_grad) {
        record(out, [parts, out, outer, inner, orow, axis]() mutable {
            if (!out.has_grad()) return;
            const auto g = out.grad();
            std::size_t col = 0;
            for (auto& part : parts) {
                const std::size_t prow = part.dim(axis) * inner;
                if (part.requires_grad()) {
                    auto buf = part.grad_buffer();
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < prow; ++i)
                            buf[o * prow + i] += g[o * orow + col + i];
                }
                col += prow;
            }
        });
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis,
                             const std::vector<std::size_t>& sizes) {
    if (axis >= x.ndim()) throw ShapeError("split: axis out of range");
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total != x.dim(axis))
        throw ShapeError("split: sizes do not sum to axis length of " +
                         shape_str(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    const std::size_t xrow = x.dim(axis) * inner;
    std::vector<Tensor<T>> outs;
    std::size_t col0 = 0;
    for (std::size_t s : sizes) {
        Shape oshape = x.shape();
        oshape[axis] = s;
        Tensor<T> part = Tensor<T>::zeros(oshape);
        auto dst = part.mut_data();
        const std::size_t prow = s * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::memcpy(dst.data() + o * prow, x.data().data() + o * xrow + col0,
                        prow * sizeof(T));
        if (taping<T>({&x})) {
            const std::size_t col = col0;
            record(part, [x, part, outer, inner, xrow, col, prow]() mutable {
                if (!part.has_grad() || !x.requires_grad()) return;
                const auto g = part.grad();
                auto buf = x.grad_buffer();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < prow; ++i)
                        buf[o * xrow + col + i] += g[o * prow + i];
            });
        }
        outs.push_back(std::move(part));
        col0 += s * inner;
    }
    return outs;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
    if (x.ndim() != 2) throw ShapeError("gather_rows: expects 2-D, got " + shape_str(x.shape()));
    const std::size_t N = x.dim(0), D = x.dim(1);
    for (std::size_t i : idx)
        if (i >= N)
            throw ShapeError("gather_rows: index " + std::to_string(i) +
                             " out of range for " + std::to_string(N) + " rows");
    Tensor<T> out = Tensor<T>::zeros({idx.size(), D});
    auto dst = out.mut_data();
    for (std::size_t j = 0; j < idx.size(); ++j)
        std::memcpy(dst.data() + j * D, x.data().data() + idx[j] * D, D * sizeof(T));
    if (taping<T>({&x})) {
        record(out, [x, out, idx, D]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            const auto g = out.grad();
            auto buf = x.grad_buffer();
            for (std::size_t j = 0; j < idx.size(); ++j)
                for (std::size_t c = 0; c < D; ++c) buf[idx[j] * D + c] += g[j * D + c];
        });
    }
    return out;
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& rows, const std::vector<std::size_t>& idx,
                       std::size_t n_rows) {
    if (rows.ndim() != 2)
        throw ShapeError("scatter_rows: expects 2-D rows, got " + shape_str(rows.shape()));
    if (idx.size() != rows.dim(0))
        throw ShapeError("scatter_rows: index count does not match row count");
    std::vector<bool> seen(n_rows, false);
    for (std::size_t i : idx) {
        if (i >= n_rows)
            throw ShapeError("scatter_rows: index " + std::to_string(i) +
                             " out of range for " + std::to_string(n_rows) + " rows");
        if (seen[i])
            throw ShapeError("scatter_rows: duplicate index " + std::to_string(i));
        seen[i] = true;
    }
    const std::size_t D = rows.ndim() == 2 ? rows.dim(1) : 0;
    Tensor<T> out = Tensor<T>::zeros({n_rows, D});
    auto dst = out.mut_data();
    for (std::size_t j = 0; j < idx.size(); ++j)
        std::memcpy(dst.data() + idx[j] * D, rows.data().data() + j * D, D * sizeof(T));
    if (taping<T>({&rows})) {
        record(out, [rows, out, idx, D]() mutable {
            if (!out.has_grad() || !rows.requires_grad()) return;
            const auto g = out.grad();
            auto buf = rows.grad_buffer();
            for (std::size_t j = 0; j < idx.size(); ++j)
                for (std::size_t c = 0; c < D; ++c) buf[j * D + c] += g[idx[j] * D + c];
        });
    }
    return out;
}

template <typename T>
Tensor<T> select0(const Tensor<T>& x, std::size_t index) {
    if (x.ndim() < 1 || index >= x.dim(0))
        throw ShapeError("select0: index out of range for " + shape_str(x.shape()));
    Shape oshape(x.shape().begin() + 1, x.shape().end());
    const std::size_t block = numel(oshape);
    Tensor<T> out = Tensor<T>::zeros(oshape);
    std::memcpy(out.mut_data().data(), x.data().data() + index * block, block * sizeof(T));
    if (taping<T>({&x})) {
        record(out, [x, out, index, block]() mutable {
            if (!out.has_grad() || !x.requires_grad()) return;
            const auto g = out.grad();
            auto buf = x.grad_buffer();
            for (std::size_t i = 0; i < block; ++i) buf[index * block + i] += g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("stack0: no inputs");
    const Shape& s = parts[0].shape();
    for (const auto& p : parts)
        if (p.shape() != s)
            throw ShapeError("stack0: all inputs must share a shape, got " + shape_str(s) +
                             " vs " + shape_str(p.shape()));
    Shape oshape;
    oshape.push_back(parts.size());
    oshape.insert(oshape.end(), s.begin(), s.end());
    const std::size_t block = numel(s);
    Tensor<T> out = Tensor<T>::zeros(oshape);
    for (std::size_t j = 0; j < parts.size(); ++j)
        std::memcpy(out.mut_data().data() + j * block, parts[j].data().data(),
                    block * sizeof(T));
    bool any_grad = false;
    for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
    if (Tape<T>::active() && any_grad) {
        record(out, [parts, out, block]() mutable {
            if (!out.has_grad()) return;
            const auto g = out.grad();
            for (std::size_t j = 0; j < parts.size(); ++j) {
                auto part = parts[j];
                if (!part.requires_grad()) continue;
                auto buf = part.grad_buffer();
                for (std::size_t i = 0; i < block; ++i) buf[i] += g[j * block + i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> extract_patches(const Tensor<T>& img, std::size_t patch) {
    if (img.ndim() != 4)
        throw ShapeError("extract_patches: expects [B,C,H,W], got " + shape_str(img.shape()));
    const std::size_t B = img.dim(0), C = img.dim(1), H = img.dim(2), W = img.dim(3);
    if (patch == 0 || H % patch != 0 || W % patch != 0)
        throw ConfigError("extract_patches: image " + std::to_string(H) + "x" +
                          std::to_string(W) + " not divisible by patch size " +
                          std::to_string(patch));
    const std::size_t n = (H / patch) * (W / patch);
    Tensor<T> out = Tensor<T>::zeros({B, n, C * patch * patch});
    K::extract_patches(img.data().data(), out.mut_data().data(), B, C, H, W, patch);
    if (taping<T>({&img})) {
        record(out, [img, out, B, C, H, W, patch]() mutable {
            if (!out.has_grad() || !img.requires_grad()) return;
            K::extract_patches_bwd(out.grad().data(), img.grad_buffer().data(), B, C, H, W,
                                   patch);
        });
    }
    return out;
}

template <typename T>
Tensor<T> upsample_conv(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                        std::size_t factor) {
    if (x.ndim() != 4) throw ShapeError("upsample_conv: expects [B,Cin,H,W]");
    if (k.ndim() != 4 || k.dim(0) != x.dim(1) || k.dim(2) != factor || k.dim(3) != factor)
        throw ShapeError("upsample_conv: kernel must be [Cin,Cout,f,f] with f=" +
                         std::to_string(factor) + ", got " + shape_str(k.shape()));
    const std::size_t B = x.dim(0), Cin = x.dim(1), Cout = k.dim(1), H = x.dim(2),
                      W = x.dim(3);
    if (bias.ndim() != 1 || bias.dim(0) != Cout)
        throw ShapeError("upsample_conv: bias must be [Cout]");
    Tensor<T> out = Tensor<T>::zeros({B, Cout, H * factor, W * factor});
    K::upsample_conv(x.data().data(), k.data().data(), bias.data().data(),
                     out.mut_data().data(), B, Cin, Cout, H, W, factor);
    ensure_finite(out, "upsample_conv");
    if (taping<T>({&x, &k, &bias})) {
        record(out, [x, k, bias, out, B, Cin, Cout, H, W, factor]() mutable {
            if (!out.has_grad()) return;
            const T* g = out.grad().data();
            if (x.requires_grad())
                K::upsample_conv_bwd_input(k.data().data(), g, x.grad_buffer().data(), B,
                                           Cin, Cout, H, W, factor);
            if (k.requires_grad())
                K::upsample_conv_bwd_kernel(x.data().data(), g, k.grad_buffer().data(), B,
                                            Cin, Cout, H, W, factor);
            if (bias.requires_grad())
                K::upsample_conv_bwd_bias(g, bias.grad_buffer().data(), B, Cout,
                                          H * factor * W * factor);
        });
    }
    return out;
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
    return x.clone();
}

template <typename T>
Tensor<T> straight_through(const Tensor<T>& soft, const Tensor<T>& hard) {
    if (soft.shape() != hard.shape())
        throw ShapeError("straight_through: soft " + shape_str(soft.shape()) +
                         " and hard " + shape_str(hard.shape()) + " must match");
    Tensor<T> out = hard.clone();
    if (taping<T>({&soft})) {
        record(out, [soft, out]() mutable {
            if (!out.has_grad() || !soft.requires_grad()) return;
            K::accumulate(out.grad().data(), soft.grad_buffer().data(), out.size());
        });
    }
    return out;
}

#define MEMROUTE_INSTANTIATE_OPS(T)                                                        \
    template void ensure_finite<T>(const Tensor<T>&, const char*);                         \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                         \
    template Tensor<T> affine<T>(const Tensor<T>&, T, T);                                  \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                       \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                          \
    template Tensor<T> abs<T>(const Tensor<T>&);                                           \
    template Tensor<T> square<T>(const Tensor<T>&);                                        \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> matmul_nt<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> softmax<T>(const Tensor<T>&, int);                                  \
    template Tensor<T> log_softmax<T>(const Tensor<T>&, int);                              \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                     T);                                                   \
    template Tensor<T> depthwise_conv2d<T>(const Tensor<T>&, const Tensor<T>&);            \
    template Tensor<T> conv1d<T>(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> mean_axis<T>(const Tensor<T>&, std::size_t, bool);                  \
    template Tensor<T> sum_all<T>(const Tensor<T>&);                                       \
    template Tensor<T> mean_all<T>(const Tensor<T>&);                                      \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                \
    template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::size_t>&);      \
    template Tensor<T> transpose<T>(const Tensor<T>&);                                     \
    template Tensor<T> broadcast_to<T>(const Tensor<T>&, const Shape&);                    \
    template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);              \
    template std::vector<Tensor<T>> split<T>(const Tensor<T>&, std::size_t,                \
                                             const std::vector<std::size_t>&);             \
    template Tensor<T> gather_rows<T>(const Tensor<T>&, const std::vector<std::size_t>&);  \
    template Tensor<T> scatter_rows<T>(const Tensor<T>&, const std::vector<std::size_t>&,  \
                                       std::size_t);                                       \
    template Tensor<T> select0<T>(const Tensor<T>&, std::size_t);                          \
    template Tensor<T> stack0<T>(const std::vector<Tensor<T>>&);                           \
    template Tensor<T> extract_patches<T>(const Tensor<T>&, std::size_t);                  \
    template Tensor<T> upsample_conv<T>(const Tensor<T>&, const Tensor<T>&,                \
                                        const Tensor<T>&, std::size_t);                    \
    template Tensor<T> detach<T>(const Tensor<T>&);                                        \
    template Tensor<T> straight_through<T>(const Tensor<T>&, const Tensor<T>&);

MEMROUTE_INSTANTIATE_OPS(float)
MEMROUTE_INSTANTIATE_OPS(double)

#undef MEMROUTE_INSTANTIATE_OPS

}  // namespace memroute::ops
