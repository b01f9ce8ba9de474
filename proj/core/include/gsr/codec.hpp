/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <span>
#include <string>
#include <vector>

#include "gsr/gaussian.hpp"
#include "gsr/image.hpp"
#include "gsr/rangecoder.hpp"

namespace gsr {

// Geometric cardinality ladder between c_min and the full primitive count.
struct LevelSchedule {
    int64_t c_min = 4096;
    std::vector<int64_t> cardinalities;  // ascending, [0] == c_min, back() == n_full

    int levels() const { return static_cast<int>(cardinalities.size()); }
};

// cardinality[l] = round(c_min * exp(l * (ln n_full - ln c_min)/(L-1))),
// endpoints exact.
LevelSchedule level_schedule(int64_t n_full, int64_t c_min, int levels);

// Keeps the `keep` highest-score primitives, preserving original order; ties
// keep the lower original index.
GaussianSet prune(const GaussianSet& gs, std::span<const double> scores, int64_t keep);

struct FinetuneLrs {
    // 3DGS-style per-group learning rates scaled down for short adaptation runs.
    float position = 1.6e-5f;
    float rotation = 1.0e-4f;
    float log_scale = 5.0e-4f;
    float opacity = 5.0e-3f;
    float sh_dc = 2.5e-4f;
    float sh_rest = 1.25e-5f;
};

struct FinetuneResult {
    GaussianSet gs;
    std::vector<float> losses;  // per-iteration loss
};

// Adam fine-tuning of all attributes against the rendering loss; one
// uniformly sampled view per iteration, primitive count unchanged.
FinetuneResult finetune(const GaussianSet& gs, std::span<const Camera> views,
                        std::span<const Image> targets, int iters, const FinetuneLrs& lrs,
                        uint64_t seed, float lambda_ssim = 0.2f);

struct QuantParams {
    float min = 0.0f;
    float step = 1.0f;
};

struct QuantizedSet {
    int64_t count = 0;
    int sh_degree = 0;
    std::vector<QuantParams> params;           // one per channel
    std::vector<std::vector<uint8_t>> symbols;  // [channel][primitive]
};

// Per-channel uniform 8-bit quantization: symbol = round((v-min)/step),
// step = (max-min)/255; constant channels store step 1 with all-zero symbols.
QuantizedSet quantize(const GaussianSet& gs);
GaussianSet dequantize(const QuantizedSet& q);

// Channel count for a given SH degree (positions 3, rotations 4, scales 3,
// opacity 1, SH 3*(deg+1)^2).
int channel_count(int sh_degree);

// Bit-exact container; layout documented in docs/FORMATS.md.
struct CodedScene {
    uint16_t version = 1;
    uint8_t level = 0;
    uint32_t count = 0;
    uint8_t sh_degree = 0;
    std::vector<QuantParams> params;
    std::vector<FreqTable> tables;
    std::vector<uint8_t> payload;

    std::vector<uint8_t> to_bytes() const;
    static CodedScene from_bytes(std::span<const uint8_t> bytes);
    void save(const std::string& path) const;
    static CodedScene load(const std::string& path);
    size_t byte_size() const { return to_bytes().size(); }
};

struct CodecConfig {
    int finetune_iters = 200;
    FinetuneLrs lrs;
    float lambda_ssim = 0.2f;
    uint64_t seed = 1;
};

// Coarse-to-fine multi-rate compression: starting from the full set, each
// level fine-tunes, is encoded, and then its saliency drives the prune down
// to the next (smaller) level. Returns one self-contained CodedScene per
// level, index 0 = lowest rate.
std::vector<CodedScene> compress_levels(const GaussianSet& gs, const LevelSchedule& sched,
                                        std::span<const Camera> views,
                                        std::span<const Image> targets, const CodecConfig& cfg);

// Single level; runs the chain down from the full set to `level`.
CodedScene compress(const GaussianSet& gs, const LevelSchedule& sched, int level,
                    std::span<const Camera> views, std::span<const Image> targets,
                    const CodecConfig& cfg);

GaussianSet decompress(const CodedScene& scene);

}  // namespace gsr
