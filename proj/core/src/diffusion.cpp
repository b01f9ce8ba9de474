/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "gsr/checkpoint.hpp"
#include "gsr/errors.hpp"
#include "gsr/loss.hpp"

namespace gsr {

using nlohmann::json;

Tensor forward_diffuse(const Tensor& x, int t, const Tensor& eps, const DiffusionSchedule& s) {
    const float sigma = s.sigma(t);
    if (x.shape() != eps.shape())
        throw std::invalid_argument("forward_diffuse: x and eps shapes differ");
    return add(mul_scalar(x, 1.0f - sigma), mul_scalar(eps, sigma));
}

Tensor denoised_estimate(const VelocityFn& model, const Tensor& x_t, int t,
                         std::span<const int> cond, float cfg_scale, const DiffusionSchedule& s) {
    const float sigma = s.sigma(t);
    if (t == 0) return x_t;
    std::vector<int> ts(cond.size(), t);
    const Tensor v = model(x_t, ts, cond, cfg_scale);
    return sub(x_t, mul_scalar(v, sigma));
}

Tensor euler_sample(const VelocityFn& model, const Tensor& x_T, int steps,
                    std::span<const int> cond, float cfg_scale, const DiffusionSchedule& s) {
    if (steps < 1 || s.t_count % steps != 0)
        throw std::invalid_argument("euler_sample: steps must divide the schedule length " +
                                    std::to_string(s.t_count));
    const int stride = s.t_count / steps;
    Tensor x = x_T;
    for (int t = s.t_count; t > 0; t -= stride) {
        std::vector<int> ts(cond.size(), t);
        const Tensor v = model(x, ts, cond, cfg_scale);
        // x_{t-dt} = x_t - (sigma_t - sigma_{t-dt}) * v
        const float dsigma = s.sigma(t) - s.sigma(t - stride);
        x = sub(x, mul_scalar(v, dsigma));
    }
    return x;
}

Tensor one_step_restore(const VelocityFn& model, const Tensor& x_degraded, const Tensor& eps,
                        int t0, std::span<const int> cond, float cfg_scale,
                        const DiffusionSchedule& s) {
    if (t0 == s.t_count) {
        // Ablation ("w/o t0"): predict at T directly from the degraded input.
        std::vector<int> ts(cond.size(), t0);
        const Tensor v = model(x_degraded, ts, cond, cfg_scale);
        return sub(x_degraded, mul_scalar(v, s.sigma(t0)));
    }
    const Tensor x_t0 = forward_diffuse(x_degraded, t0, eps, s);
    return denoised_estimate(model, x_t0, t0, cond, cfg_scale, s);
}

RestorerState RestorerState::create(const DenoiserConfig& cfg, const DiffusionSchedule& schedule,
                                    uint64_t seed) {
    schedule.validate();
    RestorerState st;
    st.schedule = schedule;
    Rng rng(derive_seed(seed, 0xBA5E));
    st.net = std::make_shared<DenoiserNet>(cfg, rng);
    Rng rng_minus(derive_seed(seed, 0xAD, 1));
    Rng rng_plus(derive_seed(seed, 0xAD, 2));
    st.phi_minus = st.net->make_adapters("phi_minus", rng_minus);
    st.phi_plus = st.net->make_adapters("phi_plus", rng_plus);
    return st;
}

RestorerState RestorerState::identity() {
    RestorerState st;
    st.identity_mode = true;
    return st;
}

namespace {

const ParamStore* select_adapters(const RestorerState& st, AdapterSel which) {
    switch (which) {
        case AdapterSel::Base: return nullptr;
        case AdapterSel::PhiMinus: return &st.phi_minus;
        case AdapterSel::PhiPlus: return &st.phi_plus;
    }
    throw std::invalid_argument("unknown adapter selector");
}

std::string adapter_prefix(AdapterSel which) {
    return which == AdapterSel::PhiPlus ? "phi_plus" : "phi_minus";
}

ParamStore detached_view(const ParamStore& ps) {
    ParamStore out;
    for (const auto& [name, t] : ps.items()) out.add(name, t.detach());
    return out;
}

}  // namespace

Tensor RestorerState::predict(AdapterSel which, const Tensor& x_t, std::span<const int> t,
                              std::span<const int> cond, float cfg_scale) const {
    if (!net) throw std::logic_error("predict: identity restorer has no network");
    const ParamStore* adapters = select_adapters(*this, which);
    const std::string prefix = adapter_prefix(which);
    const int null_token = net->config().cond_vocab;
    const bool all_null = std::all_of(cond.begin(), cond.end(),
                                      [&](int c) { return c == null_token; });
    if (cfg_scale == 1.0f || all_null) {
        // CFG identity: the blend reduces to a single branch.
        return net->forward(x_t, t, cond, schedule, adapters, prefix);
    }
    const Tensor v_cond = net->forward(x_t, t, cond, schedule, adapters, prefix);
    std::vector<int> nulls(cond.size(), null_token);
    const Tensor v_uncond = net->forward(x_t, t, nulls, schedule, adapters, prefix);
    // v_uncond + g * (v_cond - v_uncond)
    return add(v_uncond, mul_scalar(sub(v_cond, v_uncond), cfg_scale));
}

Tensor RestorerState::predict_nograd(AdapterSel which, const Tensor& x_t, std::span<const int> t,
                                     std::span<const int> cond, float cfg_scale) const {
    RestorerState view;
    view.schedule = schedule;
    view.net = net;
    view.phi_minus = detached_view(phi_minus);
    view.phi_plus = detached_view(phi_plus);
    const Tensor x_det = x_t.requires_grad() ? x_t.detach() : x_t;
    return view.predict(which, x_det, t, cond, cfg_scale);
}

VelocityFn RestorerState::model(AdapterSel which, bool with_grad) const {
    const RestorerState* self = this;
    return [self, which, with_grad](const Tensor& x_t, std::span<const int> t,
                                    std::span<const int> cond, float g) {
        if (t.empty() || t.size() != cond.size())
            throw std::invalid_argument("velocity model: t/cond size mismatch");
        // All samplers in this project share one t per call.
        const int t_shared = t[0];
        std::vector<int> ts(t.begin(), t.end());
        for (int& v : ts) v = t_shared;
        return with_grad ? self->predict(which, x_t, ts, cond, g)
                         : self->predict_nograd(which, x_t, ts, cond, g);
    };
}

Image RestorerState::restore_image(const Image& degraded, int condition, float cfg_scale, Rng& rng,
                                   float eps_scale, int t0_override) const {
    if (identity_mode) return degraded;
    const int t0 = t0_override > 0 ? t0_override : schedule.t0;
    Tensor x = image_to_tensor(degraded);
    x = affine(x, 2.0f, -1.0f);  // [0,1] -> [-1,1] latents
    Tensor eps = Tensor::zeros(x.shape());
    if (eps_scale != 0.0f) {
        auto eb = eps.leaf_data();
        for (auto& v : eb) v = rng.normal_f() * eps_scale;
    }
    std::vector<int> cond = {condition};
    const Tensor xhat =
        one_step_restore(model(AdapterSel::PhiMinus, false), x, eps, t0, cond, cfg_scale, schedule);
    Image out = tensor_to_image(affine(xhat, 0.5f, 0.5f));
    for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

void RestorerState::save(const std::string& path) const {
    if (!net) throw std::logic_error("save: identity restorer has no weights");
    json meta;
    meta["format"] = "restorer";
    meta["schedule"] = {{"t_count", schedule.t_count},
                       {"t0", schedule.t0},
                       {"t_min", schedule.t_min},
                       {"t_max", schedule.t_max}};
    const auto& c = net->config();
    meta["net"] = {{"base_channels", c.base_channels}, {"mid_channels", c.mid_channels},
                   {"emb_dim", c.emb_dim},             {"cond_vocab", c.cond_vocab},
                   {"lora_rank", c.lora_rank},         {"lora_scale", c.lora_scale}};
    Checkpoint ck;
    ck.meta_json = meta.dump();
    for (const auto& [name, t] : net->base().items()) ck.add("base." + name, t);
    for (const auto& [name, t] : phi_minus.items()) ck.add(name, t);
    for (const auto& [name, t] : phi_plus.items()) ck.add(name, t);
    ck.save(path);
}

RestorerState RestorerState::load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    json meta;
    try {
        meta = json::parse(ck.meta_json);
    } catch (const json::exception& e) {
        throw InputError(path + ": bad checkpoint metadata: " + e.what());
    }
    if (meta.value("format", "") != "restorer")
        throw InputError(path + ": not a restorer checkpoint");
    DiffusionSchedule sched;
    sched.t_count = meta.at("schedule").at("t_count").get<int>();
    sched.t0 = meta.at("schedule").at("t0").get<int>();
    sched.t_min = meta.at("schedule").at("t_min").get<int>();
    sched.t_max = meta.at("schedule").at("t_max").get<int>();
    DenoiserConfig cfg;
    cfg.base_channels = meta.at("net").at("base_channels").get<int>();
    cfg.mid_channels = meta.at("net").at("mid_channels").get<int>();
    cfg.emb_dim = meta.at("net").at("emb_dim").get<int>();
    cfg.cond_vocab = meta.at("net").at("cond_vocab").get<int>();
    cfg.lora_rank = meta.at("net").at("lora_rank").get<int>();
    cfg.lora_scale = meta.at("net").at("lora_scale").get<float>();

    RestorerState st = RestorerState::create(cfg, sched, 0);
    ParamStore all;
    for (auto& [name, t] : st.net->base().items()) all.add("base." + name, t);
    for (auto& [name, t] : st.phi_minus.items()) all.add(name, t);
    for (auto& [name, t] : st.phi_plus.items()) all.add(name, t);
    ck.load_into(all);
    st.freeze_base();
    return st;
}

double pretrain_base(RestorerState& state, const LoadedDataset& data, const PretrainConfig& cfg,
                     const std::function<void(int, double)>& progress) {
    state.net->set_trainable(true);
    AdamW opt({.lr = cfg.lr,
               .weight_decay = cfg.weight_decay,
               .clip_norm = cfg.clip_norm});
    const int vocab = state.net->config().cond_vocab;
    double last = 0.0;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng(derive_seed(cfg.seed, 0x9A27, static_cast<uint64_t>(step)));
        const auto batch = data.sample_batch(cfg.batch_size, rng);
        const int64_t n = static_cast<int64_t>(batch.size());
        const int64_t h = batch[0].clean.height, w = batch[0].clean.width;

        std::vector<float> xs, eps_v;
        xs.reserve(static_cast<size_t>(n * 3 * h * w));
        std::vector<int> ts, conds;
        for (const auto& pair : batch) {
            const Tensor xt = image_to_tensor(pair.clean);
            for (const float v : xt.data()) xs.push_back(2.0f * v - 1.0f);
            ts.push_back(static_cast<int>(rng.range(1, state.schedule.t_count - 1)));
            conds.push_back(rng.uniform() < cfg.cond_dropout ? vocab : pair.condition);
        }
        eps_v.resize(xs.size());
        for (auto& v : eps_v) v = rng.normal_f();

        const Tensor x = Tensor::from_vector({n, 3, h, w}, std::move(xs));
        const Tensor eps = Tensor::from_vector({n, 3, h, w}, std::move(eps_v));
        // Per-sample sigma as a broadcast [N,1,1,1] factor.
        std::vector<float> sig(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) sig[i] = state.schedule.sigma(ts[i]);
        const Tensor sigma = Tensor::from_vector({n, 1, 1, 1}, sig);
        const Tensor one_minus = Tensor::from_vector({n, 1, 1, 1}, [&] {
            std::vector<float> v(sig);
            for (auto& s : v) s = 1.0f - s;
            return v;
        }());
        const Tensor x_t = add(mul(x, one_minus), mul(eps, sigma));
        const Tensor target = sub(eps, x);

        const Tensor pred = state.net->forward(x_t, ts, conds, state.schedule, nullptr, "");
        const Tensor loss = mean_all(square(sub(pred, target)));
        last = loss.item();
        if (!std::isfinite(last))
            throw NumericalError("pretrain: non-finite loss at step " + std::to_string(step));
        state.net->base().zero_grad();
        backward(loss);
        opt.step(state.net->base());
        if (progress) progress(step, last);
    }
    state.freeze_base();
    return last;
}

}  // namespace gsr
