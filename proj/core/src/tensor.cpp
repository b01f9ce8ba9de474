/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/tensor.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "gsr/parallel.hpp"

namespace gsr {

// ---- thread pool --------------------------------------------------------

namespace {
std::atomic<int> g_threads{0};  // 0 = auto
}

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n <= 0) {
        unsigned hc = std::thread::hardware_concurrency();
        n = hc > 0 ? static_cast<int>(hc) : 1;
    }
    return n;
}

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

void parallel_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    const int workers = std::min<int64_t>(thread_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    // Chunk layout depends only on n and the worker count of this call site;
    // each chunk is computed independently so the fan-out is race-free.
    const int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) {
        const int64_t b = w * chunk;
        const int64_t e = std::min<int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min<int64_t>(n, chunk));
    for (auto& t : pool) t.join();
}

// ---- shape helpers ------------------------------------------------------

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                " vs " + shape_str(b));
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<float> values) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::make_shared<std::vector<float>>(std::move(values));
    return n;
}

float* grad_acc(TensorNode& n) {
    if (n.grad.empty()) n.grad.assign(n.values->size(), 0.0f);
    return n.grad.data();
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

Tensor finish(std::shared_ptr<TensorNode> out, std::vector<std::shared_ptr<TensorNode>> parents,
              std::function<void(TensorNode&)> fn, bool needs_grad) {
    if (needs_grad) {
        out->requires_grad = true;
        out->parents = std::move(parents);
        out->backward_fn = std::move(fn);
    }
    return Tensor(std::move(out));
}

}  // namespace

// ---- Tensor -------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape), {});
    n->values->assign(static_cast<size_t>(shape_numel(n->shape)), 0.0f);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto n = make_node(std::move(shape), {});
    n->values->assign(static_cast<size_t>(shape_numel(n->shape)), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_vector(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw std::invalid_argument("from_vector: shape " + shape_str(shape) + " wants " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(values.size()));
    auto n = make_node(std::move(shape), std::move(values));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(float value) { return from_vector({1}, {value}); }

Tensor Tensor::randn(Shape shape, Rng& rng, float stddev, bool requires_grad) {
    std::vector<float> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = rng.normal_f() * stddev;
    return from_vector(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
int64_t Tensor::numel() const { return static_cast<int64_t>(node_->values->size()); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const float> Tensor::data() const { return {node_->values->data(), node_->values->size()}; }

std::span<float> Tensor::leaf_data() {
    if (node_->backward_fn)
        throw std::logic_error("leaf_data: tensor is an op result, not a leaf");
    return {node_->values->data(), node_->values->size()};
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const { return {node_->grad.data(), node_->grad.size()}; }

std::span<float> Tensor::grad_buffer() {
    grad_acc(*node_);
    return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() { node_->grad.clear(); }

float Tensor::item() const {
    if (numel() != 1) throw std::logic_error("item: tensor has " + std::to_string(numel()) + " elements");
    return (*node_->values)[0];
}

void Tensor::set_requires_grad(bool requires_grad) {
    if (node_->backward_fn)
        throw std::logic_error("set_requires_grad: tensor is an op result, not a leaf");
    node_->requires_grad = requires_grad;
    if (!requires_grad) node_->grad.clear();
}

Tensor Tensor::detach() const {
    auto n = std::make_shared<TensorNode>();
    n->shape = node_->shape;
    n->values = node_->values;  // share storage
    return Tensor(std::move(n));
}

// ---- deterministic reduction --------------------------------------------

double blocked_sum(std::span<const float> v) {
    constexpr size_t kBlock = 4096;
    double total = 0.0;
    for (size_t b = 0; b < v.size(); b += kBlock) {
        const size_t e = std::min(v.size(), b + kBlock);
        float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        size_t i = b;
        for (; i + 8 <= e; i += 8)
            for (int j = 0; j < 8; ++j) acc[j] += v[i + j];
        float tail = 0.0f;
        for (; i < e; ++i) tail += v[i];
        double block = 0.0;
        for (int j = 0; j < 8; ++j) block += acc[j];
        total += block + tail;
    }
    return total;
}

// ---- broadcasting machinery ----------------------------------------------

namespace {

constexpr int kMaxRank = 4;

struct BcastPlan {
    Shape out;
    std::array<int64_t, kMaxRank> stride_a{};
    std::array<int64_t, kMaxRank> dims{};
    std::array<int64_t, kMaxRank> stride_b{};
    int rank = 0;
    bool same_shape = false;
};

BcastPlan make_bcast(const char* op, const Shape& a, const Shape& b) {
    if (a.size() > kMaxRank || b.size() > kMaxRank) shape_error(op, a, b);
    BcastPlan p;
    if (a == b) {
        p.out = a;
        p.same_shape = true;
        return p;
    }
    const int rank = static_cast<int>(std::max(a.size(), b.size()));
    p.rank = rank;
    p.out.resize(rank);
    // Align trailing dims; compute element strides with 0 on broadcast axes.
    std::array<int64_t, kMaxRank> da{}, db{};
    da.fill(1);
    db.fill(1);
    for (size_t i = 0; i < a.size(); ++i) da[rank - a.size() + i] = a[i];
    for (size_t i = 0; i < b.size(); ++i) db[rank - b.size() + i] = b[i];
    for (int i = 0; i < rank; ++i) {
        if (da[i] != db[i] && da[i] != 1 && db[i] != 1) shape_error(op, a, b);
        p.out[i] = std::max(da[i], db[i]);
        p.dims[i] = p.out[i];
    }
    int64_t sa = 1, sb = 1;
    for (int i = rank - 1; i >= 0; --i) {
        p.stride_a[i] = (da[i] == 1 && p.out[i] != 1) ? 0 : sa;
        p.stride_b[i] = (db[i] == 1 && p.out[i] != 1) ? 0 : sb;
        sa *= da[i];
        sb *= db[i];
    }
    return p;
}

template <class F>
void bcast_apply(const BcastPlan& p, F&& f) {
    // f(out_index, a_index, b_index)
    const int rank = p.rank;
    int64_t n = shape_numel(p.out);
    std::array<int64_t, kMaxRank> idx{};
    int64_t oa = 0, ob = 0;
    for (int64_t i = 0; i < n; ++i) {
        f(i, oa, ob);
        for (int d = rank - 1; d >= 0; --d) {
            idx[d]++;
            oa += p.stride_a[d];
            ob += p.stride_b[d];
            if (idx[d] < p.dims[d]) break;
            idx[d] = 0;
            oa -= p.stride_a[d] * p.dims[d];
            ob -= p.stride_b[d] * p.dims[d];
        }
    }
}

// Elementwise binary op with broadcasting; fwd(a,b)->out, bwd accumulates
// into either parent given (g, a, b).
template <class Fwd, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, DA da_fn, DB db_fn) {
    const BcastPlan plan = make_bcast(name, a.shape(), b.shape());
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<float> out(static_cast<size_t>(shape_numel(plan.out)));
    if (plan.same_shape) {
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    } else if (b.numel() == 1) {
        const float s = bv[0];
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], s);
    } else if (a.numel() == 1) {
        const float s = av[0];
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(s, bv[i]);
    } else {
        bcast_apply(plan, [&](int64_t o, int64_t ia, int64_t ib) { out[o] = fwd(av[ia], bv[ib]); });
    }
    auto node = make_node(plan.out, std::move(out));
    const bool ng = any_grad({&a, &b});
    auto an = a.node();
    auto bn = b.node();
    return finish(
        node, {an, bn},
        [an, bn, plan, da_fn, db_fn](TensorNode& self) {
            const float* g = self.grad.data();
            const float* av2 = an->values->data();
            const float* bv2 = bn->values->data();
            float* ga = an->requires_grad ? grad_acc(*an) : nullptr;
            float* gb = bn->requires_grad ? grad_acc(*bn) : nullptr;
            if (plan.same_shape) {
                const size_t n = self.values->size();
                if (ga)
                    for (size_t i = 0; i < n; ++i) ga[i] += da_fn(g[i], av2[i], bv2[i]);
                if (gb)
                    for (size_t i = 0; i < n; ++i) gb[i] += db_fn(g[i], av2[i], bv2[i]);
            } else {
                bcast_apply(plan, [&](int64_t o, int64_t ia, int64_t ib) {
                    if (ga) ga[ia] += da_fn(g[o], av2[ia], bv2[ib]);
                    if (gb) gb[ib] += db_fn(g[o], av2[ia], bv2[ib]);
                });
            }
        },
        ng);
}

// Elementwise unary op; bwd(g, x, y) where y is the op output.
template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    const auto av = a.data();
    std::vector<float> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
    auto node = make_node(a.shape(), std::move(out));
    auto an = a.node();
    return finish(
        node, {an},
        [an, bwd](TensorNode& self) {
            const float* g = self.grad.data();
            const float* x = an->values->data();
            const float* y = self.values->data();
            float* ga = grad_acc(*an);
            const size_t n = self.values->size();
            for (size_t i = 0; i < n; ++i) ga[i] += bwd(g[i], x[i], y[i]);
        },
        a.requires_grad());
}

float stable_sigmoid(float x) {
    if (x >= 0.0f) {
        const float e = std::exp(-x);
        return 1.0f / (1.0f + e);
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

}  // namespace

// ---- elementwise ops ------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](float x, float y) { return x + y; },
        [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](float x, float y) { return x - y; },
        [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](float x, float y) { return x * y; },
        [](float g, float, float y) { return g * y; }, [](float g, float x, float) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](float x, float y) { return x / y; },
        [](float g, float, float y) { return g / y; },
        [](float g, float x, float y) { return -g * x / (y * y); });
}

Tensor affine(const Tensor& a, float mul_c, float add_c) {
    return unary_op(
        a, [mul_c, add_c](float x) { return x * mul_c + add_c; },
        [mul_c](float g, float, float) { return g * mul_c; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, [](float x) { return std::exp(x); }, [](float g, float, float y) { return g * y; });
}

Tensor log(const Tensor& a) {
    return unary_op(
        a, [](float x) { return std::log(x); }, [](float g, float x, float) { return g / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op(
        a, [](float x) { return std::sqrt(x); },
        [](float g, float, float y) { return 0.5f * g / y; });
}

Tensor abs(const Tensor& a) {
    return unary_op(
        a, [](float x) { return std::fabs(x); },
        [](float g, float x, float) { return x > 0.0f ? g : (x < 0.0f ? -g : 0.0f); });
}

Tensor square(const Tensor& a) {
    return unary_op(
        a, [](float x) { return x * x; }, [](float g, float x, float) { return 2.0f * g * x; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](float x) { return stable_sigmoid(x); },
        [](float g, float, float y) { return g * y * (1.0f - y); });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, [](float x) { return std::tanh(x); },
        [](float g, float, float y) { return g * (1.0f - y * y); });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](float x) { return x > 0.0f ? x : 0.0f; },
        [](float g, float x, float) { return x > 0.0f ? g : 0.0f; });
}

Tensor silu(const Tensor& a) {
    return unary_op(
        a, [](float x) { return x * stable_sigmoid(x); },
        [](float g, float x, float) {
            const float s = stable_sigmoid(x);
            return g * s * (1.0f + x * (1.0f - s));
        });
}

// ---- GEMM kernels ---------------------------------------------------------

namespace {

// C[M,N] += A[M,K] * B[K,N]. Four-row register blocking; parallel over
// column chunks (each chunk writes a disjoint slice of C).
void gemm_nn(const float* A, const float* B, float* C, int64_t M, int64_t K, int64_t N) {
    parallel_chunks(N, [&](int64_t nb, int64_t ne) {
        int64_t m = 0;
        for (; m + 4 <= M; m += 4) {
            float* c0 = C + (m + 0) * N;
            float* c1 = C + (m + 1) * N;
            float* c2 = C + (m + 2) * N;
            float* c3 = C + (m + 3) * N;
            for (int64_t k = 0; k < K; ++k) {
                const float a0 = A[(m + 0) * K + k];
                const float a1 = A[(m + 1) * K + k];
                const float a2 = A[(m + 2) * K + k];
                const float a3 = A[(m + 3) * K + k];
                const float* b = B + k * N;
                for (int64_t n = nb; n < ne; ++n) {
                    const float bv = b[n];
                    c0[n] += a0 * bv;
                    c1[n] += a1 * bv;
                    c2[n] += a2 * bv;
                    c3[n] += a3 * bv;
                }
            }
        }
        for (; m < M; ++m) {
            float* c = C + m * N;
            for (int64_t k = 0; k < K; ++k) {
                const float a = A[m * K + k];
                const float* b = B + k * N;
                for (int64_t n = nb; n < ne; ++n) c[n] += a * b[n];
            }
        }
    });
}

// Multi-accumulator dot product; vectorizes without reassociation licence.
float dot_strided(const float* a, const float* b, int64_t n) {
    float acc[32];
    for (int j = 0; j < 32; ++j) acc[j] = 0.0f;
    int64_t i = 0;
    for (; i + 32 <= n; i += 32)
        for (int j = 0; j < 32; ++j) acc[j] += a[i + j] * b[i + j];
    float tail = 0.0f;
    for (; i < n; ++i) tail += a[i] * b[i];
    float s = 0.0f;
    for (int j = 0; j < 32; ++j) s += acc[j];
    return s + tail;
}

// C[M,K] += A[M,N] * B[K,N]^T  (rows of A dotted with rows of B)
void gemm_nt(const float* A, const float* B, float* C, int64_t M, int64_t N, int64_t K) {
    parallel_chunks(M, [&](int64_t mb, int64_t me) {
        for (int64_t m = mb; m < me; ++m)
            for (int64_t k = 0; k < K; ++k) C[m * K + k] += dot_strided(A + m * N, B + k * N, N);
    });
}

// C[K,N] += A[M,K]^T * B[M,N]
void gemm_tn(const float* A, const float* B, float* C, int64_t M, int64_t K, int64_t N) {
    parallel_chunks(N, [&](int64_t nb, int64_t ne) {
        for (int64_t m = 0; m < M; ++m) {
            const float* b = B + m * N;
            for (int64_t k = 0; k < K; ++k) {
                const float a = A[m * K + k];
                float* c = C + k * N;
                for (int64_t n = nb; n < ne; ++n) c[n] += a * b[n];
            }
        }
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        shape_error("matmul", a.shape(), b.shape());
    const int64_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
    std::vector<float> out(static_cast<size_t>(M * N), 0.0f);
    gemm_nn(a.data().data(), b.data().data(), out.data(), M, K, N);
    auto node = make_node({M, N}, std::move(out));
    auto an = a.node();
    auto bn = b.node();
    return finish(
        node, {an, bn},
        [an, bn, M, K, N](TensorNode& self) {
            const float* g = self.grad.data();
            if (an->requires_grad) gemm_nt(g, bn->values->data(), grad_acc(*an), M, N, K);
            if (bn->requires_grad) gemm_tn(an->values->data(), g, grad_acc(*bn), M, K, N);
        },
        any_grad({&a, &b}));
}

// ---- conv2d ----------------------------------------------------------------

namespace {

struct ConvDims {
    int64_t N, C, H, W, O, kh, kw, OH, OW;
    int stride, pad;
};

void im2col(const float* x, const ConvDims& d, float* cols) {
    // cols: [C*kh*kw, OH*OW]
    const int64_t ckk = d.C * d.kh * d.kw;
    parallel_chunks(ckk, [&](int64_t rb, int64_t re) {
        for (int64_t r = rb; r < re; ++r) {
            const int64_t c = r / (d.kh * d.kw);
            const int64_t ky = (r / d.kw) % d.kh;
            const int64_t kx = r % d.kw;
            float* row = cols + r * d.OH * d.OW;
            const float* xc = x + c * d.H * d.W;
            for (int64_t oy = 0; oy < d.OH; ++oy) {
                const int64_t iy = oy * d.stride + ky - d.pad;
                float* dst = row + oy * d.OW;
                if (iy < 0 || iy >= d.H) {
                    std::fill(dst, dst + d.OW, 0.0f);
                    continue;
                }
                const float* src = xc + iy * d.W;
                for (int64_t ox = 0; ox < d.OW; ++ox) {
                    const int64_t ix = ox * d.stride + kx - d.pad;
                    dst[ox] = (ix >= 0 && ix < d.W) ? src[ix] : 0.0f;
                }
            }
        }
    });
}

void col2im_acc(const float* cols, const ConvDims& d, float* gx) {
    // Scatter-add; rows of one input channel never alias rows of another,
    // so parallelizing over channels is race-free and order-fixed.
    parallel_chunks(d.C, [&](int64_t cb, int64_t ce) {
        for (int64_t c = cb; c < ce; ++c) {
            float* xc = gx + c * d.H * d.W;
            for (int64_t ky = 0; ky < d.kh; ++ky) {
                for (int64_t kx = 0; kx < d.kw; ++kx) {
                    const int64_t r = (c * d.kh + ky) * d.kw + kx;
                    const float* row = cols + r * d.OH * d.OW;
                    for (int64_t oy = 0; oy < d.OH; ++oy) {
                        const int64_t iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.H) continue;
                        float* dst = xc + iy * d.W;
                        const float* src = row + oy * d.OW;
                        for (int64_t ox = 0; ox < d.OW; ++ox) {
                            const int64_t ix = ox * d.stride + kx - d.pad;
                            if (ix >= 0 && ix < d.W) dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    if (x.shape().size() != 4 || w.shape().size() != 4 || x.shape()[1] != w.shape()[1])
        shape_error("conv2d", x.shape(), w.shape());
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    ConvDims d;
    d.N = x.shape()[0];
    d.C = x.shape()[1];
    d.H = x.shape()[2];
    d.W = x.shape()[3];
    d.O = w.shape()[0];
    d.kh = w.shape()[2];
    d.kw = w.shape()[3];
    d.stride = stride;
    d.pad = padding;
    d.OH = (d.H + 2 * padding - d.kh) / stride + 1;
    d.OW = (d.W + 2 * padding - d.kw) / stride + 1;
    if (d.OH <= 0 || d.OW <= 0) shape_error("conv2d", x.shape(), w.shape());
    if (bias.defined() && bias.numel() != d.O)
        shape_error("conv2d bias", bias.shape(), w.shape());

    const int64_t ckk = d.C * d.kh * d.kw;
    const int64_t opix = d.OH * d.OW;
    std::vector<float> cols(static_cast<size_t>(ckk * opix));
    std::vector<float> out(static_cast<size_t>(d.N * d.O * opix), 0.0f);
    for (int64_t n = 0; n < d.N; ++n) {
        im2col(x.data().data() + n * d.C * d.H * d.W, d, cols.data());
        gemm_nn(w.data().data(), cols.data(), out.data() + n * d.O * opix, d.O, ckk, opix);
    }
    if (bias.defined()) {
        const auto bv = bias.data();
        for (int64_t n = 0; n < d.N; ++n)
            for (int64_t o = 0; o < d.O; ++o) {
                float* dst = out.data() + (n * d.O + o) * opix;
                const float b = bv[o];
                for (int64_t i = 0; i < opix; ++i) dst[i] += b;
            }
    }

    auto node = make_node({d.N, d.O, d.OH, d.OW}, std::move(out));
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<std::shared_ptr<TensorNode>> parents = {xn, wn};
    if (bn) parents.push_back(bn);
    const bool ng = bias.defined() ? any_grad({&x, &w, &bias}) : any_grad({&x, &w});
    return finish(
        node, std::move(parents),
        [xn, wn, bn, d, ckk, opix](TensorNode& self) {
            const float* g = self.grad.data();
            std::vector<float> cols(static_cast<size_t>(ckk * opix));
            std::vector<float> gcols;
            float* gw = wn->requires_grad ? grad_acc(*wn) : nullptr;
            float* gx = xn->requires_grad ? grad_acc(*xn) : nullptr;
            float* gb = (bn && bn->requires_grad) ? grad_acc(*bn) : nullptr;
            if (gx) gcols.resize(static_cast<size_t>(ckk * opix));
            for (int64_t n = 0; n < d.N; ++n) {
                const float* gn = g + n * d.O * opix;
                if (gw || gb) {
                    if (gw) {
                        im2col(xn->values->data() + n * d.C * d.H * d.W, d, cols.data());
                        gemm_nt(gn, cols.data(), gw, d.O, opix, ckk);
                    }
                    if (gb)
                        for (int64_t o = 0; o < d.O; ++o)
                            gb[o] += static_cast<float>(
                                blocked_sum({gn + o * opix, static_cast<size_t>(opix)}));
                }
                if (gx) {
                    std::fill(gcols.begin(), gcols.end(), 0.0f);
                    gemm_tn(wn->values->data(), gn, gcols.data(), d.O, ckk, opix);
                    col2im_acc(gcols.data(), d, gx + n * d.C * d.H * d.W);
                }
            }
        },
        ng);
}

// ---- resampling ------------------------------------------------------------

Tensor upsample_nearest2(const Tensor& x) {
    if (x.shape().size() != 4) throw std::invalid_argument("upsample_nearest2: want rank 4");
    const int64_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    std::vector<float> out(static_cast<size_t>(N * C * 4 * H * W));
    const auto xv = x.data();
    const int64_t W2 = 2 * W;
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const float* src = xv.data() + nc * H * W;
        float* dst = out.data() + nc * 4 * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x2 = 0; x2 < W; ++x2) {
                const float v = src[y * W + x2];
                float* d0 = dst + (2 * y) * W2 + 2 * x2;
                d0[0] = v;
                d0[1] = v;
                d0[W2] = v;
                d0[W2 + 1] = v;
            }
    }
    auto node = make_node({N, C, 2 * H, 2 * W}, std::move(out));
    auto xn = x.node();
    return finish(
        node, {xn},
        [xn, N, C, H, W, W2](TensorNode& self) {
            const float* g = self.grad.data();
            float* gx = grad_acc(*xn);
            for (int64_t nc = 0; nc < N * C; ++nc) {
                const float* gs = g + nc * 4 * H * W;
                float* gd = gx + nc * H * W;
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t x2 = 0; x2 < W; ++x2) {
                        const float* s = gs + (2 * y) * W2 + 2 * x2;
                        gd[y * W + x2] += s[0] + s[1] + s[W2] + s[W2 + 1];
                    }
            }
        },
        x.requires_grad());
}

Tensor avgpool2(const Tensor& x) {
    if (x.shape().size() != 4 || x.shape()[2] % 2 != 0 || x.shape()[3] % 2 != 0)
        throw std::invalid_argument("avgpool2: want rank 4 with even H,W, got " + shape_str(x.shape()));
    const int64_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t OH = H / 2, OW = W / 2;
    std::vector<float> out(static_cast<size_t>(N * C * OH * OW));
    const auto xv = x.data();
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const float* src = xv.data() + nc * H * W;
        float* dst = out.data() + nc * OH * OW;
        for (int64_t y = 0; y < OH; ++y)
            for (int64_t x2 = 0; x2 < OW; ++x2) {
                const float* s = src + (2 * y) * W + 2 * x2;
                dst[y * OW + x2] = 0.25f * (s[0] + s[1] + s[W] + s[W + 1]);
            }
    }
    auto node = make_node({N, C, OH, OW}, std::move(out));
    auto xn = x.node();
    return finish(
        node, {xn},
        [xn, N, C, H, W, OH, OW](TensorNode& self) {
            const float* g = self.grad.data();
            float* gx = grad_acc(*xn);
            for (int64_t nc = 0; nc < N * C; ++nc) {
                const float* gs = g + nc * OH * OW;
                float* gd = gx + nc * H * W;
                for (int64_t y = 0; y < OH; ++y)
                    for (int64_t x2 = 0; x2 < OW; ++x2) {
                        const float q = 0.25f * gs[y * OW + x2];
                        float* d = gd + (2 * y) * W + 2 * x2;
                        d[0] += q;
                        d[1] += q;
                        d[W] += q;
                        d[W + 1] += q;
                    }
            }
        },
        x.requires_grad());
}

// ---- reductions -------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    const float s = static_cast<float>(blocked_sum(a.data()));
    auto node = make_node({1}, {s});
    auto an = a.node();
    return finish(
        node, {an},
        [an](TensorNode& self) {
            const float g = self.grad[0];
            float* ga = grad_acc(*an);
            const size_t n = an->values->size();
            for (size_t i = 0; i < n; ++i) ga[i] += g;
        },
        a.requires_grad());
}

Tensor mean_all(const Tensor& a) {
    return mul_scalar(sum_all(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor sum_axis(const Tensor& a, int axis) {
    const auto& sh = a.shape();
    if (axis < 0 || axis >= static_cast<int>(sh.size()))
        throw std::invalid_argument("sum_axis: axis out of range for " + shape_str(sh));
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sh[i];
    for (size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
    const int64_t len = sh[axis];
    Shape os = sh;
    os[axis] = 1;
    std::vector<float> out(static_cast<size_t>(outer * inner), 0.0f);
    const auto av = a.data();
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t l = 0; l < len; ++l) {
            const float* src = av.data() + (o * len + l) * inner;
            float* dst = out.data() + o * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    auto node = make_node(os, std::move(out));
    auto an = a.node();
    return finish(
        node, {an},
        [an, outer, inner, len](TensorNode& self) {
            const float* g = self.grad.data();
            float* ga = grad_acc(*an);
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t l = 0; l < len; ++l) {
                    float* dst = ga + (o * len + l) * inner;
                    const float* src = g + o * inner;
                    for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                }
        },
        a.requires_grad());
}

// ---- slicing / concat / reshape ---------------------------------------------

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
    const auto& sh = a.shape();
    if (axis < 0 || axis >= static_cast<int>(sh.size()) || start < 0 || len <= 0 ||
        start + len > sh[axis])
        throw std::invalid_argument("slice: bad range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") on axis " +
                                    std::to_string(axis) + " of " + shape_str(sh));
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sh[i];
    for (size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
    const int64_t alen = sh[axis];
    Shape os = sh;
    os[axis] = len;
    std::vector<float> out(static_cast<size_t>(outer * len * inner));
    const auto av = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * len * inner, av.data() + (o * alen + start) * inner,
                    static_cast<size_t>(len * inner) * sizeof(float));
    auto node = make_node(os, std::move(out));
    auto an = a.node();
    return finish(
        node, {an},
        [an, outer, inner, alen, start, len](TensorNode& self) {
            const float* g = self.grad.data();
            float* ga = grad_acc(*an);
            for (int64_t o = 0; o < outer; ++o) {
                float* dst = ga + (o * alen + start) * inner;
                const float* src = g + o * len * inner;
                for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        },
        a.requires_grad());
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const auto& sh0 = parts[0].shape();
    if (axis < 0 || axis >= static_cast<int>(sh0.size()))
        throw std::invalid_argument("concat: axis out of range for " + shape_str(sh0));
    Shape os = sh0;
    int64_t total_axis = 0;
    for (const auto& p : parts) {
        const auto& sh = p.shape();
        if (sh.size() != sh0.size()) shape_error("concat", sh0, sh);
        for (size_t i = 0; i < sh.size(); ++i)
            if (static_cast<int>(i) != axis && sh[i] != sh0[i]) shape_error("concat", sh0, sh);
        total_axis += sh[axis];
    }
    os[axis] = total_axis;
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= sh0[i];
    for (size_t i = axis + 1; i < sh0.size(); ++i) inner *= sh0[i];
    std::vector<float> out(static_cast<size_t>(outer * total_axis * inner));
    int64_t off = 0;
    for (const auto& p : parts) {
        const int64_t plen = p.shape()[axis];
        const auto pv = p.data();
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + (o * total_axis + off) * inner, pv.data() + o * plen * inner,
                        static_cast<size_t>(plen * inner) * sizeof(float));
        off += plen;
    }
    auto node = make_node(os, std::move(out));
    std::vector<std::shared_ptr<TensorNode>> parents;
    bool ng = false;
    for (const auto& p : parts) {
        parents.push_back(p.node());
        ng = ng || p.requires_grad();
    }
    auto lens = std::make_shared<std::vector<int64_t>>();
    for (const auto& p : parts) lens->push_back(p.shape()[axis]);
    return finish(
        node, parents,
        [parents, lens, outer, inner, total_axis](TensorNode& self) {
            const float* g = self.grad.data();
            int64_t off2 = 0;
            for (size_t pi = 0; pi < parents.size(); ++pi) {
                const int64_t plen = (*lens)[pi];
                if (parents[pi]->requires_grad) {
                    float* ga = grad_acc(*parents[pi]);
                    for (int64_t o = 0; o < outer; ++o) {
                        const float* src = g + (o * total_axis + off2) * inner;
                        float* dst = ga + o * plen * inner;
                        for (int64_t i = 0; i < plen * inner; ++i) dst[i] += src[i];
                    }
                }
                off2 += plen;
            }
        },
        ng);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = a.node()->values;  // alias, storage is contiguous
    auto an = a.node();
    return finish(
        node, {an},
        [an](TensorNode& self) {
            float* ga = grad_acc(*an);
            const float* g = self.grad.data();
            const size_t n = self.grad.size();
            for (size_t i = 0; i < n; ++i) ga[i] += g[i];
        },
        a.requires_grad());
}

// ---- backward ----------------------------------------------------------------

void backward(const Tensor& root) {
    if (!root.defined() || root.numel() != 1)
        throw std::invalid_argument("backward: root must be a scalar tensor");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS over grad-requiring parents.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    struct Frame {
        TensorNode* n;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            TensorNode* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    grad_acc(*root.node());
    root.node()->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace gsr
