/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <span>
#include <string>

#include "gsr/optim.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

// Linear sigma schedule: sigma_t = t/T, so sigma_0 = 0 and sigma_T = 1.
struct DiffusionSchedule {
    int t_count = 1000;  // T
    int t0 = 199;
    int t_min = 20;
    int t_max = 980;

    float sigma(int t) const;
    void validate() const;
};

struct DenoiserConfig {
    int base_channels = 16;
    int mid_channels = 64;
    int emb_dim = 64;
    int cond_vocab = 16;  // classes; index cond_vocab is the null token
    int lora_rank = 8;
    float lora_scale = 1.0f;
};

// Small convolutional encoder-decoder velocity predictor with sinusoidal
// timestep embedding and a learned class embedding (null token included).
// Low-rank adapters extend every conv and embedding projection; a zero-
// initialized adapter reproduces the base output bit for bit.
class DenoiserNet {
public:
    DenoiserNet(const DenoiserConfig& cfg, Rng& init_rng);

    // Fresh adapter pair set (B zero, A gaussian) named "<prefix>.<layer>.A/B".
    ParamStore make_adapters(const std::string& prefix, Rng& rng) const;

    // x_t: [N,3,H,W]; t and cond hold one entry per batch element (cond may
    // be the null token cond_vocab). adapters == nullptr runs the base net.
    Tensor forward(const Tensor& x_t, std::span<const int> t, std::span<const int> cond,
                   const DiffusionSchedule& schedule, const ParamStore* adapters,
                   const std::string& adapter_prefix) const;

    ParamStore& base() { return base_; }
    const ParamStore& base() const { return base_; }
    const DenoiserConfig& config() const { return cfg_; }
    void set_trainable(bool trainable);

private:
    DenoiserConfig cfg_;
    ParamStore base_;
};

}  // namespace gsr
