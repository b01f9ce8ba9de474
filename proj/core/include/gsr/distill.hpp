/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gsr/dataset.hpp"
#include "gsr/diffusion.hpp"
#include "gsr/perceptual.hpp"

namespace gsr {

struct DistillConfig {
    float alpha = 0.7f;
    float cfg_scale = 7.5f;
    float lambda_l2 = 1.0f;
    float lambda_perc = 1.0f;
    // Paper-pinned base rates scaled for the small net: phi- uses
    // 5e-6 * lr_scale, phi+ uses 1e-6 * lr_scale.
    float lr_scale = 100.0f;
    float weight_decay = 1e-4f;
    float clip_norm = 1.0f;
    int steps = 2000;
    int batch_size = 4;
    float cond_dropout = 0.1f;
    int ckpt_every = 1000;
    bool ablate_t0 = false;  // restore at t0 = T ("w/o t0")
    uint64_t seed = 1;
    std::string ckpt_dir;  // empty: no checkpoints written
};

struct StepReport {
    int64_t step = 0;
    double l_kl = 0.0;        // distribution-matching surrogate value
    double l2 = 0.0;
    double perceptual = 0.0;
    double l_phi_plus = 0.0;
    double grad_norm_minus = 0.0;  // pre-clip
    double grad_norm_plus = 0.0;   // pre-clip
    std::string to_json_line() const;
    bool finite() const;
};

// Distribution-matching gradient signal (applied to x_hat): with shared eps_t
// and teachers treated as constants,
//   signal = alpha * (s_restore(xhat_t) - s_real(xhat_t))
//          + (1-alpha) * (s_real(x_t) - s_real(xhat_t)),
// then normalized per sample by mean|signal| + 1e-4.
// xhat_vals/x_vals are value tensors [N,3,H,W]; t_samples one entry each.
Tensor dmd_gradient_signal(const RestorerState& state, const Tensor& xhat_vals,
                           const Tensor& x_vals, std::span<const int> t_samples,
                           const Tensor& eps_t, std::span<const int> cond, float alpha,
                           float cfg_scale);

class DistillTrainer {
public:
    DistillTrainer(RestorerState& state, const LoadedDataset& data, const DistillConfig& cfg);

    StepReport phi_minus_step(const std::vector<TrainingPair>& batch, int64_t step);
    StepReport phi_plus_step(const std::vector<TrainingPair>& batch, int64_t step);

    // Strict alternation: one phi- substep then one phi+ substep per global
    // step. Throws NumericalError if any report value goes non-finite.
    std::vector<StepReport> train(const std::function<void(const StepReport&)>& on_step = {});

    const PerceptualMetric& perceptual() const { return perc_; }

private:
    // Restore one batch through phi-; returns graph (with_grad) or values.
    Tensor restore_batch(const Tensor& degraded, std::span<const int> cond, int64_t step,
                         uint64_t eps_salt, bool with_grad);

    RestorerState& state_;
    const LoadedDataset& data_;
    DistillConfig cfg_;
    PerceptualMetric perc_;
    AdamW opt_minus_;
    AdamW opt_plus_;
};

}  // namespace gsr
