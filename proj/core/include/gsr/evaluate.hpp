/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsr/dataset.hpp"
#include "gsr/diffusion.hpp"
#include "gsr/perceptual.hpp"
#include "gsr/scene.hpp"

namespace gsr {

struct RDCell {
    int scene_id = 0;
    int level = 0;
    uint64_t bytes = 0;
    double psnr_degraded = 0.0, ssim_degraded = 0.0, perc_degraded = 0.0;
    // Present only when a restorer was supplied.
    std::optional<double> psnr_restored, ssim_restored, perc_restored;
};

struct RDLevelAggregate {
    int level = 0;
    double mean_bytes = 0.0;
    double psnr_degraded = 0.0, ssim_degraded = 0.0, perc_degraded = 0.0;
    std::optional<double> psnr_restored, ssim_restored, perc_restored;
};

struct RDReport {
    std::vector<RDCell> cells;
    std::vector<RDLevelAggregate> aggregates;
    bool has_restored = false;

    std::string to_json() const;
    std::string to_table() const;  // aligned text; perceptual column is "perc-proxy"
    std::string to_csv() const;
    static RDReport from_json(const std::string& text);
};

struct EvalOptions {
    float cfg_scale = 1.0f;
    float eps_scale = 1.0f;  // 0 disables the t0 noise injection
    int t0_override = -1;
    uint64_t seed = 1;
};

// Rate-distortion evaluation on held-out test views: decompress each coded
// level, render, optionally restore, and tabulate against the clean test
// renders. `restorer` may be null (degraded columns only).
RDReport rd_evaluate(std::span<const SceneBundle> scenes, const DatasetManifest& manifest,
                     const RestorerState* restorer, const EvalOptions& opts);

}  // namespace gsr
