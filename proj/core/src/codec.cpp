/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gsr/errors.hpp"
#include "gsr/loss.hpp"
#include "gsr/rng.hpp"
#include "gsr/wire.hpp"

namespace gsr {

LevelSchedule level_schedule(int64_t n_full, int64_t c_min, int levels) {
    if (c_min < 1) throw InputError("level_schedule: c_min must be >= 1");
    if (n_full < c_min)
        throw InputError("level_schedule: n_full (" + std::to_string(n_full) +
                         ") is below c_min (" + std::to_string(c_min) + ")");
    if (levels < 2) throw InputError("level_schedule: need at least 2 levels");
    LevelSchedule s;
    s.c_min = c_min;
    s.cardinalities.resize(levels);
    const double ratio = (std::log(static_cast<double>(n_full)) -
                          std::log(static_cast<double>(c_min))) /
                         static_cast<double>(levels - 1);
    s.cardinalities[0] = c_min;
    s.cardinalities[levels - 1] = n_full;
    for (int l = 1; l < levels - 1; ++l)
        s.cardinalities[l] = std::llround(static_cast<double>(c_min) * std::exp(l * ratio));
    return s;
}

GaussianSet prune(const GaussianSet& gs, std::span<const double> scores, int64_t keep) {
    if (keep <= 0) throw InputError("prune: keep must be positive");
    if (keep > gs.count)
        throw InputError("prune: keep " + std::to_string(keep) + " exceeds primitive count " +
                         std::to_string(gs.count));
    if (static_cast<int64_t>(scores.size()) != gs.count)
        throw InputError("prune: score count does not match primitive count");
    std::vector<int64_t> idx(static_cast<size_t>(gs.count));
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + keep - 1, idx.end(), [&](int64_t a, int64_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties keep the lower original index
    });
    idx.resize(static_cast<size_t>(keep));
    std::sort(idx.begin(), idx.end());  // preserve original relative order
    return gs.subset(idx);
}

FinetuneResult finetune(const GaussianSet& gs, std::span<const Camera> views,
                        std::span<const Image> targets, int iters, const FinetuneLrs& lrs,
                        uint64_t seed, float lambda_ssim) {
    if (iters < 0) throw InputError("finetune: negative iteration count");
    if (views.empty() || views.size() != targets.size())
        throw InputError("finetune: need matching non-empty views and targets");
    FinetuneResult res;
    res.gs = gs;
    if (iters == 0) return res;

    // Per-group Adam in the stored (unconstrained) parameterization.
    struct Group {
        std::vector<float>* w;
        const std::vector<float>* g;
        float lr;
        std::vector<float> m, v;
    };
    GaussianGrads grads;
    std::vector<Group> groups = {
        {&res.gs.positions, &grads.positions, lrs.position, {}, {}},
        {&res.gs.rotations, &grads.rotations, lrs.rotation, {}, {}},
        {&res.gs.log_scales, &grads.log_scales, lrs.log_scale, {}, {}},
        {&res.gs.opacity_logits, &grads.opacity_logits, lrs.opacity, {}, {}},
    };
    for (auto& g : groups) {
        g.m.assign(g.w->size(), 0.0f);
        g.v.assign(g.w->size(), 0.0f);
    }
    // SH handled separately so DC and rest can use different rates.
    const int K = res.gs.sh_dim();
    std::vector<float> sh_m(res.gs.sh_coeffs.size(), 0.0f), sh_v(res.gs.sh_coeffs.size(), 0.0f);

    constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    Rng rng(derive_seed(seed, 0xF17E));
    for (int it = 0; it < iters; ++it) {
        const size_t vi = static_cast<size_t>(rng.below(views.size()));
        RenderLossResult r = render_loss_backward(res.gs, views[vi], targets[vi], lambda_ssim);
        if (!std::isfinite(r.loss))
            throw NumericalError("finetune: non-finite loss at iteration " + std::to_string(it) +
                                 " (view " + std::to_string(vi) + ")");
        res.losses.push_back(r.loss);
        grads = std::move(r.grads);
        groups[0].g = &grads.positions;
        groups[1].g = &grads.rotations;
        groups[2].g = &grads.log_scales;
        groups[3].g = &grads.opacity_logits;

        const float bc1 = 1.0f - std::pow(b1, static_cast<float>(it + 1));
        const float bc2 = 1.0f - std::pow(b2, static_cast<float>(it + 1));
        for (auto& g : groups) {
            for (size_t j = 0; j < g.w->size(); ++j) {
                const float gj = (*g.g)[j];
                g.m[j] = b1 * g.m[j] + (1.0f - b1) * gj;
                g.v[j] = b2 * g.v[j] + (1.0f - b2) * gj * gj;
                (*g.w)[j] -= g.lr * (g.m[j] / bc1) / (std::sqrt(g.v[j] / bc2) + eps);
            }
        }
        for (size_t j = 0; j < res.gs.sh_coeffs.size(); ++j) {
            const float lr = (j % K == 0) ? lrs.sh_dc : lrs.sh_rest;
            const float gj = grads.sh_coeffs[j];
            sh_m[j] = b1 * sh_m[j] + (1.0f - b1) * gj;
            sh_v[j] = b2 * sh_v[j] + (1.0f - b2) * gj * gj;
            res.gs.sh_coeffs[j] -= lr * (sh_m[j] / bc1) / (std::sqrt(sh_v[j] / bc2) + eps);
        }
    }
    return res;
}

int channel_count(int sh_degree) { return 11 + 3 * (sh_degree + 1) * (sh_degree + 1); }

namespace {

// Gather one attribute channel across primitives.
void gather_channel(const GaussianSet& gs, int channel, std::vector<float>& out) {
    const int64_t n = gs.count;
    const int K = gs.sh_dim();
    out.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        float v;
        if (channel < 3)
            v = gs.positions[i * 3 + channel];
        else if (channel < 7)
            v = gs.rotations[i * 4 + (channel - 3)];
        else if (channel < 10)
            v = gs.log_scales[i * 3 + (channel - 7)];
        else if (channel < 11)
            v = gs.opacity_logits[i];
        else
            v = gs.sh_coeffs[i * 3 * K + (channel - 11)];
        out[static_cast<size_t>(i)] = v;
    }
}

void scatter_channel(GaussianSet& gs, int channel, const std::vector<float>& in) {
    const int64_t n = gs.count;
    const int K = gs.sh_dim();
    for (int64_t i = 0; i < n; ++i) {
        const float v = in[static_cast<size_t>(i)];
        if (channel < 3)
            gs.positions[i * 3 + channel] = v;
        else if (channel < 7)
            gs.rotations[i * 4 + (channel - 3)] = v;
        else if (channel < 10)
            gs.log_scales[i * 3 + (channel - 7)] = v;
        else if (channel < 11)
            gs.opacity_logits[i] = v;
        else
            gs.sh_coeffs[i * 3 * K + (channel - 11)] = v;
    }
}

}  // namespace

QuantizedSet quantize(const GaussianSet& gs) {
    gs.validate();
    const int nch = channel_count(gs.sh_degree);
    QuantizedSet q;
    q.count = gs.count;
    q.sh_degree = gs.sh_degree;
    q.params.resize(nch);
    q.symbols.resize(nch);
    std::vector<float> vals;
    for (int ch = 0; ch < nch; ++ch) {
        gather_channel(gs, ch, vals);
        double lo = vals[0], hi = vals[0];
        for (const float v : vals) {
            if (!std::isfinite(v))
                throw NumericalError("quantize: non-finite value in channel " + std::to_string(ch));
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
        QuantParams& p = q.params[ch];
        p.min = static_cast<float>(lo);
        p.step = (hi == lo) ? 1.0f : static_cast<float>((hi - lo) / 255.0);
        auto& sym = q.symbols[ch];
        sym.resize(vals.size());
        const double min_d = p.min, step_d = p.step;
        for (size_t i = 0; i < vals.size(); ++i) {
            const long s = std::lround((static_cast<double>(vals[i]) - min_d) / step_d);
            sym[i] = static_cast<uint8_t>(std::clamp(s, 0l, 255l));
        }
    }
    return q;
}

GaussianSet dequantize(const QuantizedSet& q) {
    GaussianSet gs = GaussianSet::empty(q.count, q.sh_degree);
    const int nch = channel_count(q.sh_degree);
    if (static_cast<int>(q.params.size()) != nch || static_cast<int>(q.symbols.size()) != nch)
        throw InputError("dequantize: channel count mismatch");
    std::vector<float> vals;
    for (int ch = 0; ch < nch; ++ch) {
        const double min_d = q.params[ch].min, step_d = q.params[ch].step;
        vals.resize(static_cast<size_t>(q.count));
        for (size_t i = 0; i < vals.size(); ++i)
            vals[i] = static_cast<float>(min_d + static_cast<double>(q.symbols[ch][i]) * step_d);
        scatter_channel(gs, ch, vals);
    }
    return gs;
}

namespace {
constexpr char kMagic[4] = {'N', 'I', 'F', 'I'};
}

std::vector<uint8_t> CodedScene::to_bytes() const {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, version);
    put_u8(out, level);
    put_u32(out, count);
    put_u8(out, sh_degree);
    for (const auto& p : params) {
        put_f32(out, p.min);
        put_f32(out, p.step);
    }
    for (const auto& t : tables)
        for (const uint32_t c : t.counts) put_u32(out, c);
    put_u64(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, crc32(payload));
    return out;
}

CodedScene CodedScene::from_bytes(std::span<const uint8_t> bytes) {
    WireReader r(bytes.data(), bytes.size());
    if (r.bytes(4) != std::string(kMagic, 4)) throw InputError("coded scene: bad magic");
    CodedScene cs;
    cs.version = r.u16();
    if (cs.version != 1)
        throw InputError("coded scene: unsupported version " + std::to_string(cs.version));
    cs.level = r.u8();
    cs.count = r.u32();
    cs.sh_degree = r.u8();
    if (cs.sh_degree > 3) throw InputError("coded scene: sh degree out of range");
    if (cs.count == 0) throw InputError("coded scene: zero primitives");
    const int nch = channel_count(cs.sh_degree);
    cs.params.resize(nch);
    for (auto& p : cs.params) {
        p.min = r.f32();
        p.step = r.f32();
    }
    cs.tables.resize(nch);
    for (auto& t : cs.tables)
        for (auto& c : t.counts) c = r.u32();
    const uint64_t plen = r.u64();
    const uint8_t* praw = r.raw(plen);
    cs.payload.assign(praw, praw + plen);
    const uint32_t stored_crc = r.u32();
    if (stored_crc != crc32(cs.payload))
        throw InputError("coded scene: payload checksum mismatch");
    return cs;
}

void CodedScene::save(const std::string& path) const { write_file_bytes(path, to_bytes()); }

CodedScene CodedScene::load(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return from_bytes(bytes);
    } catch (const std::runtime_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

namespace {

CodedScene encode_quantized(const QuantizedSet& q, int level) {
    CodedScene cs;
    cs.level = static_cast<uint8_t>(level);
    cs.count = static_cast<uint32_t>(q.count);
    cs.sh_degree = static_cast<uint8_t>(q.sh_degree);
    cs.params = q.params;
    const int nch = channel_count(q.sh_degree);
    cs.tables.reserve(nch);
    for (int ch = 0; ch < nch; ++ch) cs.tables.push_back(FreqTable::build(q.symbols[ch]));
    // One continuous range-coded stream across channels; each channel uses
    // its own static model.
    RangeEncoder enc(cs.payload);
    for (int ch = 0; ch < nch; ++ch) {
        const CumTable cum(cs.tables[ch]);
        for (const uint8_t s : q.symbols[ch]) enc.encode(s, cum);
    }
    enc.flush();
    return cs;
}

QuantizedSet decode_quantized(const CodedScene& cs) {
    QuantizedSet q;
    q.count = cs.count;
    q.sh_degree = cs.sh_degree;
    q.params = cs.params;
    const int nch = channel_count(cs.sh_degree);
    q.symbols.assign(nch, {});
    RangeDecoder dec(cs.payload.data(), cs.payload.size());
    for (int ch = 0; ch < nch; ++ch) {
        const CumTable cum(cs.tables[ch]);
        auto& sym = q.symbols[ch];
        sym.resize(static_cast<size_t>(cs.count));
        for (auto& s : sym) s = dec.decode(cum);
    }
    return q;
}

}  // namespace

std::vector<CodedScene> compress_levels(const GaussianSet& gs, const LevelSchedule& sched,
                                        std::span<const Camera> views,
                                        std::span<const Image> targets, const CodecConfig& cfg) {
    gs.validate();
    const int L = sched.levels();
    if (sched.cardinalities.back() > gs.count)
        throw InputError("compress: schedule full count exceeds scene primitive count");
    std::vector<CodedScene> out(static_cast<size_t>(L));

    // Coarse-to-fine: fine-tune and encode each level, then prune by the
    // fine-tuned saliency down to the next level.
    GaussianSet current = gs;
    for (int level = L - 1; level >= 0; --level) {
        const int64_t keep = sched.cardinalities[level];
        if (current.count > keep) {
            const auto scores = primitive_saliency(current, views, targets, cfg.lambda_ssim);
            current = prune(current, scores, keep);
        }
        current = finetune(current, views, targets, cfg.finetune_iters, cfg.lrs,
                           derive_seed(cfg.seed, 0xF7, level), cfg.lambda_ssim)
                      .gs;
        out[level] = encode_quantized(quantize(current), level);
    }
    return out;
}

CodedScene compress(const GaussianSet& gs, const LevelSchedule& sched, int level,
                    std::span<const Camera> views, std::span<const Image> targets,
                    const CodecConfig& cfg) {
    if (level < 0 || level >= sched.levels())
        throw InputError("compress: level " + std::to_string(level) + " out of range [0," +
                         std::to_string(sched.levels() - 1) + "]");
    gs.validate();
    if (sched.cardinalities.back() > gs.count)
        throw InputError("compress: schedule full count exceeds scene primitive count");
    GaussianSet current = gs;
    for (int l = sched.levels() - 1; l >= level; --l) {
        const int64_t keep = sched.cardinalities[l];
        if (current.count > keep) {
            const auto scores = primitive_saliency(current, views, targets, cfg.lambda_ssim);
            current = prune(current, scores, keep);
        }
        current = finetune(current, views, targets, cfg.finetune_iters, cfg.lrs,
                           derive_seed(cfg.seed, 0xF7, l), cfg.lambda_ssim)
                      .gs;
        if (l == level) return encode_quantized(quantize(current), level);
    }
    throw std::logic_error("compress: unreachable");
}

GaussianSet decompress(const CodedScene& scene) { return dequantize(decode_quantized(scene)); }

}  // namespace gsr
