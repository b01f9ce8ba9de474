/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/distill.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/loss.hpp"

namespace gsr {

using nlohmann::json;

std::string StepReport::to_json_line() const {
    json j;
    j["step"] = step;
    j["l_kl"] = l_kl;
    j["l2"] = l2;
    j["perceptual"] = perceptual;
    j["l_phi_plus"] = l_phi_plus;
    j["grad_norm_minus"] = grad_norm_minus;
    j["grad_norm_plus"] = grad_norm_plus;
    return j.dump();
}

bool StepReport::finite() const {
    return std::isfinite(l_kl) && std::isfinite(l2) && std::isfinite(perceptual) &&
           std::isfinite(l_phi_plus) && std::isfinite(grad_norm_minus) &&
           std::isfinite(grad_norm_plus);
}

namespace {

// Stack [0,1] images into a latent batch tensor in [-1,1].
Tensor to_latents(const std::vector<TrainingPair>& batch, bool degraded) {
    const Image& first = degraded ? batch[0].degraded : batch[0].clean;
    const int64_t n = static_cast<int64_t>(batch.size());
    const int64_t h = first.height, w = first.width;
    std::vector<float> v;
    v.reserve(static_cast<size_t>(n * 3 * h * w));
    for (const auto& p : batch) {
        const Image& img = degraded ? p.degraded : p.clean;
        const Tensor t = image_to_tensor(img);
        for (const float x : t.data()) v.push_back(2.0f * x - 1.0f);
    }
    return Tensor::from_vector({n, 3, h, w}, std::move(v));
}

Tensor per_sample_broadcast(const std::vector<float>& v) {
    return Tensor::from_vector({static_cast<int64_t>(v.size()), 1, 1, 1}, v);
}

}  // namespace

Tensor dmd_gradient_signal(const RestorerState& state, const Tensor& xhat_vals,
                           const Tensor& x_vals, std::span<const int> t_samples,
                           const Tensor& eps_t, std::span<const int> cond, float alpha,
                           float cfg_scale) {
    const auto& sh = xhat_vals.shape();
    const int64_t n = sh[0];
    if (static_cast<int64_t>(t_samples.size()) != n)
        throw std::invalid_argument("dmd_gradient: one t per sample required");
    for (const int t : t_samples)
        if (t < state.schedule.t_min || t > state.schedule.t_max)
            throw std::invalid_argument("dmd_gradient: t outside [t_min,t_max]");

    std::vector<float> sig(static_cast<size_t>(n)), om(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        sig[i] = state.schedule.sigma(t_samples[i]);
        om[i] = 1.0f - sig[i];
    }
    const Tensor sigma_b = per_sample_broadcast(sig);
    const Tensor one_minus_b = per_sample_broadcast(om);

    // Shared eps_t and shared t for both diffusion points (variance
    // reduction; makes the alpha=0, xhat=x case exactly zero).
    const Tensor xhat_t = add(mul(xhat_vals, one_minus_b), mul(eps_t, sigma_b));
    const Tensor x_t = add(mul(x_vals, one_minus_b), mul(eps_t, sigma_b));

    auto denoised = [&](AdapterSel which, const Tensor& point) {
        const Tensor v = state.predict_nograd(which, point, t_samples, cond, cfg_scale);
        return sub(point, mul(v, sigma_b));
    };
    const Tensor s_restore = denoised(AdapterSel::PhiPlus, xhat_t);
    const Tensor s_real_xhat = denoised(AdapterSel::Base, xhat_t);
    const Tensor s_real_x = denoised(AdapterSel::Base, x_t);

    Tensor signal = add(mul_scalar(sub(s_restore, s_real_xhat), alpha),
                        mul_scalar(sub(s_real_x, s_real_xhat), 1.0f - alpha));

    // Per-sample normalization by mean |signal| + 1e-4.
    const int64_t per = signal.numel() / n;
    std::vector<float> inv_scale(static_cast<size_t>(n));
    const auto sv = signal.data();
    for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < per; ++j) acc += std::fabs(sv[i * per + j]);
        inv_scale[i] = 1.0f / (static_cast<float>(acc / static_cast<double>(per)) + 1e-4f);
    }
    return mul(signal, per_sample_broadcast(inv_scale));
}

DistillTrainer::DistillTrainer(RestorerState& state, const LoadedDataset& data,
                               const DistillConfig& cfg)
    : state_(state),
      data_(data),
      cfg_(cfg),
      perc_(PerceptualMetric::kDefaultSeed),
      opt_minus_({.lr = 5e-6f * cfg.lr_scale,
                  .weight_decay = cfg.weight_decay,
                  .clip_norm = cfg.clip_norm}),
      opt_plus_({.lr = 1e-6f * cfg.lr_scale,
                 .weight_decay = cfg.weight_decay,
                 .clip_norm = cfg.clip_norm}) {
    if (cfg_.ablate_t0) state_.schedule.t0 = state_.schedule.t_count;
}

Tensor DistillTrainer::restore_batch(const Tensor& degraded, std::span<const int> cond,
                                     int64_t step, uint64_t eps_salt, bool with_grad) {
    Rng rng(derive_seed(cfg_.seed, 0xE9, static_cast<uint64_t>(step), eps_salt));
    std::vector<float> eps_v(static_cast<size_t>(degraded.numel()));
    for (auto& v : eps_v) v = rng.normal_f();
    const Tensor eps = Tensor::from_vector(degraded.shape(), std::move(eps_v));
    return one_step_restore(state_.model(AdapterSel::PhiMinus, with_grad), degraded, eps,
                            state_.schedule.t0, cond, cfg_.cfg_scale, state_.schedule);
}

StepReport DistillTrainer::phi_minus_step(const std::vector<TrainingPair>& batch, int64_t step) {
    if (batch.empty()) throw InputError("phi_minus_step: empty batch");
    StepReport rep;
    rep.step = step;
    const int64_t n = static_cast<int64_t>(batch.size());
    Rng rng(derive_seed(cfg_.seed, 0x31, static_cast<uint64_t>(step)));
    const int vocab = state_.net->config().cond_vocab;
    std::vector<int> cond;
    for (const auto& p : batch)
        cond.push_back(rng.uniform() < cfg_.cond_dropout ? vocab : p.condition);

    const Tensor x_clean = to_latents(batch, false);
    const Tensor x_degraded = to_latents(batch, true);

    const Tensor xhat = restore_batch(x_degraded, cond, step, 0xA1, true);

    // Distribution-matching signal on detached values.
    std::vector<int> t_samples;
    for (int64_t i = 0; i < n; ++i)
        t_samples.push_back(
            static_cast<int>(rng.range(state_.schedule.t_min, state_.schedule.t_max)));
    std::vector<float> eps_t_v(static_cast<size_t>(xhat.numel()));
    for (auto& v : eps_t_v) v = rng.normal_f();
    const Tensor eps_t = Tensor::from_vector(xhat.shape(), std::move(eps_t_v));
    const Tensor signal = dmd_gradient_signal(state_, xhat.detach(), x_clean, t_samples, eps_t,
                                              cond, cfg_.alpha, cfg_.cfg_scale);

    // <signal, xhat> carries d(xhat)/d(phi-) through the restore graph.
    const Tensor l_kl = mean_all(mul(signal, xhat));
    const Tensor l2 = mean_all(square(sub(x_clean, xhat)));
    const Tensor perc = perc_.distance_graph(affine(x_clean, 0.5f, 0.5f), affine(xhat, 0.5f, 0.5f));
    Tensor loss = l_kl;
    if (cfg_.lambda_l2 != 0.0f) loss = add(loss, mul_scalar(l2, cfg_.lambda_l2));
    if (cfg_.lambda_perc != 0.0f) loss = add(loss, mul_scalar(perc, cfg_.lambda_perc));

    rep.l_kl = l_kl.item();
    rep.l2 = l2.item();
    rep.perceptual = perc.item();

    state_.phi_minus.zero_grad();
    backward(loss);
    opt_minus_.step(state_.phi_minus);
    rep.grad_norm_minus = opt_minus_.last_grad_norm();
    return rep;
}

StepReport DistillTrainer::phi_plus_step(const std::vector<TrainingPair>& batch, int64_t step) {
    if (batch.empty()) throw InputError("phi_plus_step: empty batch");
    StepReport rep;
    rep.step = step;
    const int64_t n = static_cast<int64_t>(batch.size());
    Rng rng(derive_seed(cfg_.seed, 0x32, static_cast<uint64_t>(step)));
    const int vocab = state_.net->config().cond_vocab;
    std::vector<int> cond;
    for (const auto& p : batch)
        cond.push_back(rng.uniform() < cfg_.cond_dropout ? vocab : p.condition);

    const Tensor x_degraded = to_latents(batch, true);
    // Recompute the restoration with the current phi-, detached from its
    // differentiation path.
    const Tensor xhat = restore_batch(x_degraded, cond, step, 0xB2, false);

    std::vector<int> t_samples;
    std::vector<float> sig(static_cast<size_t>(n)), om(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        t_samples.push_back(
            static_cast<int>(rng.range(state_.schedule.t_min, state_.schedule.t_max)));
        sig[i] = state_.schedule.sigma(t_samples[i]);
        om[i] = 1.0f - sig[i];
    }
    std::vector<float> eps_v(static_cast<size_t>(xhat.numel()));
    for (auto& v : eps_v) v = rng.normal_f();
    const Tensor eps = Tensor::from_vector(xhat.shape(), std::move(eps_v));
    const Tensor xhat_t =
        add(mul(xhat, per_sample_broadcast(om)), mul(eps, per_sample_broadcast(sig)));
    // Velocity-convention diffusion loss: target = eps - xhat.
    const Tensor target = sub(eps, xhat);
    const Tensor pred = state_.predict(AdapterSel::PhiPlus, xhat_t, t_samples, cond, 1.0f);
    const Tensor loss = mean_all(square(sub(pred, target)));
    rep.l_phi_plus = loss.item();

    state_.phi_plus.zero_grad();
    backward(loss);
    opt_plus_.step(state_.phi_plus);
    rep.grad_norm_plus = opt_plus_.last_grad_norm();
    return rep;
}

std::vector<StepReport> DistillTrainer::train(
    const std::function<void(const StepReport&)>& on_step) {
    std::vector<StepReport> log;
    if (!cfg_.ckpt_dir.empty()) std::filesystem::create_directories(cfg_.ckpt_dir);
    for (int64_t step = 0; step < cfg_.steps; ++step) {
        Rng batch_rng(derive_seed(cfg_.seed, 0xBA7C, static_cast<uint64_t>(step)));
        const auto batch = data_.sample_batch(cfg_.batch_size, batch_rng);
        StepReport rep = phi_minus_step(batch, step);
        const StepReport plus = phi_plus_step(batch, step);
        rep.l_phi_plus = plus.l_phi_plus;
        rep.grad_norm_plus = plus.grad_norm_plus;
        if (!rep.finite()) {
            throw NumericalError("distill: non-finite report at step " + std::to_string(step) +
                                 ": " + rep.to_json_line());
        }
        if (!cfg_.ckpt_dir.empty() && cfg_.ckpt_every > 0 &&
            ((step + 1) % cfg_.ckpt_every == 0 || step + 1 == cfg_.steps)) {
            state_.save(cfg_.ckpt_dir + "/restorer_step" + std::to_string(step + 1) + ".ckpt");
        }
        if (on_step) on_step(rep);
        log.push_back(rep);
    }
    return log;
}

}  // namespace gsr
