/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <string>
#include <vector>

#include "gsr/tensor.hpp"

namespace gsr {

// Ordered named parameter list. Order is the optimizer-state order and the
// checkpoint order, so it must be construction-deterministic.
class ParamStore {
public:
    // Returns a handle sharing the stored tensor (Tensor is a shared_ptr
    // wrapper, so the copy stays in sync with the store).
    Tensor add(const std::string& name, Tensor t);
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    size_t size() const { return items_.size(); }

    void zero_grad();
    int64_t param_count() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct AdamWConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
    float clip_norm = 0.0f;  // <= 0 disables clipping
};

// AdamW with global gradient-norm clipping applied before the moment update
// and decoupled weight decay. Throws std::runtime_error naming the parameter
// if its gradient is non-finite.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    void step(ParamStore& params);

    // Global gradient norm of the last step, before clipping.
    double last_grad_norm() const { return last_grad_norm_; }
    int64_t steps_taken() const { return t_; }

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(float lr) { cfg_.lr = lr; }

private:
    AdamWConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
    double last_grad_norm_ = 0.0;
};

}  // namespace gsr
