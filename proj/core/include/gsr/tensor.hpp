/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsr/rng.hpp"

namespace gsr {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode;

// Reverse-mode autodiff tensor. Values are float32 and immutable once an op
// has produced them; only leaf tensors (parameters, inputs) may be mutated
// between graph builds. Gradients accumulate into `grad` across backward
// passes until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value);
    static Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    bool requires_grad() const;

    std::span<const float> data() const;
    // Leaf-only mutable access (parameter updates between graph builds).
    std::span<float> leaf_data();

    bool has_grad() const;
    std::span<const float> grad() const;
    std::span<float> grad_buffer();  // allocates zero-filled buffer if absent
    void zero_grad();

    float item() const;  // scalar tensors only

    // Leaf-only: toggles gradient tracking (used to freeze trained weights).
    void set_requires_grad(bool requires_grad);

    // Value-sharing leaf with no graph history and no gradient tracking.
    Tensor detach() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    Shape shape;
    std::shared_ptr<std::vector<float>> values;
    bool requires_grad = false;
    std::vector<float> grad;  // empty until first accumulation
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Reads this node's grad and accumulates into parents' grad buffers.
    std::function<void(TensorNode&)> backward_fn;
};

// ---- graph-building operations ------------------------------------------
// Binary elementwise ops broadcast numpy-style (trailing dims equal or 1).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// y = a * mul + add
Tensor affine(const Tensor& a, float mul_c, float add_c);
inline Tensor neg(const Tensor& a) { return affine(a, -1.0f, 0.0f); }
inline Tensor add_scalar(const Tensor& a, float c) { return affine(a, 1.0f, c); }
inline Tensor mul_scalar(const Tensor& a, float c) { return affine(a, c, 0.0f); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);

// a: [M,K] x b: [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [N,C,H,W], w: [O,C,kh,kw], bias: [O] or undefined; stride 1 or 2.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);

Tensor upsample_nearest2(const Tensor& x);  // [N,C,H,W] -> [N,C,2H,2W]
Tensor avgpool2(const Tensor& x);           // [N,C,H,W] -> [N,C,H/2,W/2]

Tensor sum_all(const Tensor& a);   // -> scalar
Tensor mean_all(const Tensor& a);  // -> scalar
// Sum over one axis, keeping it as size 1.
Tensor sum_axis(const Tensor& a, int axis);

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor reshape(const Tensor& a, Shape shape);  // aliases storage

// Populates grad on every requires_grad leaf reachable from root.
// root must be scalar-shaped.
void backward(const Tensor& root);

// Deterministic blocked sum used by reductions (fixed block size, serial
// combine) so results do not depend on the thread count.
double blocked_sum(std::span<const float> v);

}  // namespace gsr
