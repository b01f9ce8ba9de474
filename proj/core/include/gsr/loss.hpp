/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <span>
#include <vector>

#include "gsr/image.hpp"
#include "gsr/raster.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

// Rendering loss used for fine-tuning and the pruning saliency:
//   L = mean|render - target| + lambda_ssim * (1 - SSIM(render, target))
// SSIM uses the standard 11x11 Gaussian window (sigma 1.5) on valid windows.

struct ImageLossResult {
    float total = 0.0f;
    float l1 = 0.0f;
    float ssim = 0.0f;
    Image image_grad;  // dL/d(render)
};

ImageLossResult image_loss(const Image& render, const Image& target, float lambda_ssim = 0.2f);

// Differentiable loss on an existing graph tensor (N,C,H,W vs same-shape
// constant target); used by training code paths that need the graph form.
Tensor image_loss_graph(const Tensor& pred, const Tensor& target, float lambda_ssim);

struct RenderLossResult {
    float loss = 0.0f;
    float l1 = 0.0f;
    float ssim = 0.0f;
    GaussianGrads grads;
};

// render -> loss -> analytic backward to all primitive attributes.
RenderLossResult render_loss_backward(const GaussianSet& gs, const Camera& cam,
                                      const Image& target, float lambda_ssim = 0.2f,
                                      const RenderOptions& opts = {});

// Pruning metric: per-primitive L2 norm of the concatenated attribute
// gradients, summed over views. Nonnegative; zero for primitives outside
// every frustum.
std::vector<double> primitive_saliency(const GaussianSet& gs, std::span<const Camera> views,
                                       std::span<const Image> targets, float lambda_ssim = 0.2f,
                                       const RenderOptions& opts = {});

// HWC image <-> [1,C,H,W] tensor conversion helpers.
Tensor image_to_tensor(const Image& img, bool requires_grad = false);
Image tensor_to_image(const Tensor& t);

}  // namespace gsr
