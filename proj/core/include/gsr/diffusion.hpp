/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <functional>
#include <memory>
#include <string>

#include "gsr/dataset.hpp"
#include "gsr/denoiser.hpp"
#include "gsr/image.hpp"

namespace gsr {

// Velocity predictor (v = eps - x convention): batched x_t -> v_hat, with
// classifier-free guidance folded in. Tests plug analytic oracles through
// this interface.
using VelocityFn = std::function<Tensor(const Tensor& x_t, std::span<const int> t,
                                        std::span<const int> cond, float cfg_scale)>;

// x_t = (1 - sigma_t) x + sigma_t eps
Tensor forward_diffuse(const Tensor& x, int t, const Tensor& eps, const DiffusionSchedule& s);

// s(x_t) = x_t - sigma_t * v_hat; at t=0 this is x_t itself.
Tensor denoised_estimate(const VelocityFn& model, const Tensor& x_t, int t,
                         std::span<const int> cond, float cfg_scale, const DiffusionSchedule& s);

// Deterministic Euler sampler; `steps` must divide the schedule length.
Tensor euler_sample(const VelocityFn& model, const Tensor& x_T, int steps,
                    std::span<const int> cond, float cfg_scale, const DiffusionSchedule& s);

// One-step restoration: noise the degraded latents to t0, then denoise in a
// single step. t0 == T selects the ablation form (no noising, predict at T).
Tensor one_step_restore(const VelocityFn& model, const Tensor& x_degraded, const Tensor& eps,
                        int t0, std::span<const int> cond, float cfg_scale,
                        const DiffusionSchedule& s);

enum class AdapterSel { Base, PhiMinus, PhiPlus };

// Frozen base denoiser plus the restorer adapter (phi-) and the critic
// adapter (phi+). identity_mode turns restoration into a passthrough, a
// wiring diagnostic for evaluation plumbing.
struct RestorerState {
    DiffusionSchedule schedule;
    std::shared_ptr<DenoiserNet> net;
    ParamStore phi_minus;
    ParamStore phi_plus;
    bool identity_mode = false;

    static RestorerState create(const DenoiserConfig& cfg, const DiffusionSchedule& schedule,
                                uint64_t seed);
    static RestorerState identity();

    // Graph-building predictor (adapter parameters keep gradients).
    Tensor predict(AdapterSel which, const Tensor& x_t, std::span<const int> t,
                   std::span<const int> cond, float cfg_scale) const;
    // Value-only predictor: adapters detached, no graph kept.
    Tensor predict_nograd(AdapterSel which, const Tensor& x_t, std::span<const int> t,
                          std::span<const int> cond, float cfg_scale) const;

    VelocityFn model(AdapterSel which, bool with_grad = true) const;

    // Restores [0,1]-domain images through the latent mapping x = 2*img - 1.
    // eps_scale 0 zeroes the injected noise (--deterministic-eps 0).
    Image restore_image(const Image& degraded, int condition, float cfg_scale, Rng& rng,
                        float eps_scale = 1.0f, int t0_override = -1) const;

    void save(const std::string& path) const;
    static RestorerState load(const std::string& path);

    void freeze_base() { net->set_trainable(false); }
};

struct PretrainConfig {
    int steps = 5000;
    int batch_size = 4;
    float lr = 3e-4f;
    float weight_decay = 1e-4f;
    float clip_norm = 1.0f;
    float cond_dropout = 0.1f;
    uint64_t seed = 1;
};

// Flow-matching pretraining of the base net on clean renders: l2 between the
// predicted and true velocity at uniformly sampled t. Returns final loss.
double pretrain_base(RestorerState& state, const LoadedDataset& data, const PretrainConfig& cfg,
                     const std::function<void(int, double)>& progress = {});

}  // namespace gsr
