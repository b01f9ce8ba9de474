/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gsr {

Tensor ParamStore::add(const std::string& name, Tensor t) {
    if (find(name)) throw std::logic_error("ParamStore: duplicate parameter " + name);
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor* ParamStore::find(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return &t;
    return nullptr;
}

void ParamStore::zero_grad() {
    for (auto& [n, t] : items_) t.zero_grad();
}

int64_t ParamStore::param_count() const {
    int64_t c = 0;
    for (const auto& [n, t] : items_) c += t.numel();
    return c;
}

void AdamW::step(ParamStore& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            const size_t n = static_cast<size_t>(params.items()[i].second.numel());
            m_[i].assign(n, 0.0f);
            v_[i].assign(n, 0.0f);
        }
    }
    if (m_.size() != params.size())
        throw std::logic_error("AdamW: parameter list changed between steps");

    // Global norm over all parameter gradients; missing grads count as zero.
    double sq = 0.0;
    for (auto& [name, p] : params.items()) {
        if (!p.has_grad()) continue;
        for (float g : p.grad()) {
            if (!std::isfinite(g))
                throw std::runtime_error("AdamW: non-finite gradient in parameter " + name);
            sq += static_cast<double>(g) * g;
        }
    }
    last_grad_norm_ = std::sqrt(sq);
    float scale = 1.0f;
    if (cfg_.clip_norm > 0.0f && last_grad_norm_ > cfg_.clip_norm)
        scale = static_cast<float>(cfg_.clip_norm / last_grad_norm_);

    ++t_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.items()[i].second;
        if (!p.has_grad()) continue;
        auto w = p.leaf_data();
        auto g = p.grad();
        float* m = m_[i].data();
        float* v = v_[i].data();
        for (size_t j = 0; j < w.size(); ++j) {
            const float gj = g[j] * scale;
            m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * gj * gj;
            const float mhat = m[j] / bc1;
            const float vhat = v[j] / bc2;
            w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace gsr
