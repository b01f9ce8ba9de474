/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace gsr {

float DiffusionSchedule::sigma(int t) const {
    if (t < 0 || t > t_count)
        throw std::invalid_argument("schedule: t=" + std::to_string(t) + " outside [0," +
                                    std::to_string(t_count) + "]");
    return static_cast<float>(t) / static_cast<float>(t_count);
}

void DiffusionSchedule::validate() const {
    if (t_count < 2) throw std::invalid_argument("schedule: T must be >= 2");
    if (t0 <= 0 || t0 >= t_count)
        throw std::invalid_argument("schedule: t0 must lie strictly inside (0,T)");
    if (t_min >= t_max || t_min <= 0 || t_max >= t_count)
        throw std::invalid_argument("schedule: need 0 < t_min < t_max < T");
}

namespace {

struct ConvSpec {
    const char* name;
    int in, out, stride;
};

// Encoder-decoder layout; `in`/`out` are multiples of the base width except
// for the mid block which uses mid_channels directly.
std::vector<ConvSpec> conv_specs(const DenoiserConfig& c) {
    const int c0 = c.base_channels, c1 = 2 * c.base_channels, cm = c.mid_channels;
    return {
        {"conv0", 3, c0, 1},  {"conv1", c0, c1, 2}, {"conv2", c1, c1, 1}, {"conv3", c1, cm, 2},
        {"conv4", cm, cm, 1}, {"conv5", cm, cm, 1}, {"conv6", cm, c1, 1}, {"conv7", c1, c1, 1},
        {"conv8", c1, c0, 1}, {"conv9", c0, c0, 1}, {"conv10", c0, 3, 1},
    };
}

struct LinSpec {
    const char* name;
    int in, out;
};

std::vector<LinSpec> lin_specs(const DenoiserConfig& c) {
    return {
        {"time_lin", c.emb_dim, c.emb_dim},
        {"emb1", c.emb_dim, 2 * c.base_channels},
        {"emb2", c.emb_dim, c.mid_channels},
        {"emb3", c.emb_dim, c.mid_channels},
    };
}

}  // namespace

DenoiserNet::DenoiserNet(const DenoiserConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    for (const auto& cs : conv_specs(cfg)) {
        const float fan_in = static_cast<float>(cs.in * 9);
        float std = std::sqrt(2.0f / fan_in);
        if (std::string(cs.name) == "conv10") std *= 0.1f;  // gentle output head
        base_.add(std::string(cs.name) + ".w",
                  Tensor::randn({cs.out, cs.in, 3, 3}, init_rng, std, true));
        base_.add(std::string(cs.name) + ".b", Tensor::zeros({cs.out}, true));
    }
    for (const auto& ls : lin_specs(cfg)) {
        const float std = std::sqrt(2.0f / static_cast<float>(ls.in));
        base_.add(std::string(ls.name) + ".w", Tensor::randn({ls.in, ls.out}, init_rng, std, true));
        base_.add(std::string(ls.name) + ".b", Tensor::zeros({ls.out}, true));
    }
    base_.add("cond_table",
              Tensor::randn({cfg.cond_vocab + 1, cfg.emb_dim}, init_rng, 0.02f, true));
}

void DenoiserNet::set_trainable(bool trainable) {
    for (auto& [name, t] : base_.items()) t.set_requires_grad(trainable);
}

ParamStore DenoiserNet::make_adapters(const std::string& prefix, Rng& rng) const {
    ParamStore ps;
    const int r = cfg_.lora_rank;
    for (const auto& cs : conv_specs(cfg_)) {
        // Conv weight as an [out, in*9] matrix: delta = B @ A.
        ps.add(prefix + "." + cs.name + ".B", Tensor::zeros({cs.out, r}, true));
        ps.add(prefix + "." + cs.name + ".A", Tensor::randn({r, cs.in * 9}, rng, 0.02f, true));
    }
    for (const auto& ls : lin_specs(cfg_)) {
        // Linear weight [in, out]: delta = A @ B, B (output side) zero.
        ps.add(prefix + "." + ls.name + ".A", Tensor::randn({ls.in, r}, rng, 0.02f, true));
        ps.add(prefix + "." + ls.name + ".B", Tensor::zeros({r, ls.out}, true));
    }
    return ps;
}

Tensor DenoiserNet::forward(const Tensor& x_t, std::span<const int> t, std::span<const int> cond,
                            const DiffusionSchedule& schedule, const ParamStore* adapters,
                            const std::string& adapter_prefix) const {
    const auto& sh = x_t.shape();
    if (sh.size() != 4 || sh[1] != 3)
        throw std::invalid_argument("denoiser: want input [N,3,H,W], got " + shape_str(sh));
    const int64_t n = sh[0];
    if (static_cast<int64_t>(t.size()) != n || static_cast<int64_t>(cond.size()) != n)
        throw std::invalid_argument("denoiser: per-sample t/cond counts must match the batch");
    for (const int c : cond)
        if (c < 0 || c > cfg_.cond_vocab)
            throw std::invalid_argument("denoiser: condition index out of range");

    auto weight = [&](const std::string& name, bool is_conv) -> Tensor {
        const Tensor& w = *base_.find(name + ".w");
        if (!adapters) return w;
        const Tensor* a = adapters->find(adapter_prefix + "." + name + ".A");
        const Tensor* b = adapters->find(adapter_prefix + "." + name + ".B");
        if (!a || !b) return w;
        Tensor delta = is_conv ? matmul(*b, *a) : matmul(*a, *b);
        return add(w, mul_scalar(reshape(delta, w.shape()), cfg_.lora_scale));
    };
    auto bias = [&](const std::string& name) -> const Tensor& { return *base_.find(name + ".b"); };

    auto conv = [&](const Tensor& x, const char* name, int stride) {
        return conv2d(x, weight(name, true), bias(name), stride, 1);
    };
    auto linear = [&](const Tensor& x, const char* name) {
        return add(matmul(x, weight(name, false)), bias(name));
    };

    // Sinusoidal timestep embedding (constant w.r.t. parameters).
    const int half = cfg_.emb_dim / 2;
    std::vector<float> sinus(static_cast<size_t>(n * cfg_.emb_dim));
    for (int64_t i = 0; i < n; ++i) {
        schedule.sigma(t[i]);  // range check
        for (int k = 0; k < half; ++k) {
            const double f = std::exp(-std::log(10000.0) * k / std::max(1, half - 1));
            sinus[i * cfg_.emb_dim + k] = static_cast<float>(std::sin(t[i] * f));
            sinus[i * cfg_.emb_dim + half + k] = static_cast<float>(std::cos(t[i] * f));
        }
    }
    Tensor emb = silu(linear(
        Tensor::from_vector({n, cfg_.emb_dim}, std::move(sinus)), "time_lin"));
    const Tensor& table = *base_.find("cond_table");
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) rows.push_back(slice(table, 0, cond[i], 1));
    emb = add(emb, rows.size() == 1 ? rows[0] : concat(rows, 0));

    auto inject = [&](const Tensor& x, const char* emb_name) {
        const Tensor e = linear(emb, emb_name);  // [N, C]
        return add(x, reshape(e, {n, e.shape()[1], 1, 1}));
    };

    const Tensor e0 = silu(conv(x_t, "conv0", 1));
    Tensor e1 = silu(conv(e0, "conv1", 2));
    e1 = inject(e1, "emb1");
    e1 = silu(conv(e1, "conv2", 1));
    Tensor m = silu(conv(e1, "conv3", 2));
    m = inject(m, "emb2");
    m = silu(conv(m, "conv4", 1));
    m = inject(m, "emb3");
    m = silu(conv(m, "conv5", 1));
    Tensor u1 = upsample_nearest2(silu(conv(m, "conv6", 1)));
    u1 = add(u1, e1);
    u1 = silu(conv(u1, "conv7", 1));
    Tensor u0 = upsample_nearest2(silu(conv(u1, "conv8", 1)));
    u0 = add(u0, e0);
    u0 = silu(conv(u0, "conv9", 1));
    return conv(u0, "conv10", 1);
}

}  // namespace gsr
