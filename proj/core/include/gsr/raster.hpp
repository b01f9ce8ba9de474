/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gsr/gaussian.hpp"
#include "gsr/image.hpp"

namespace gsr {

struct RenderOptions {
    Vec3 background{0.0f, 0.0f, 0.0f};
    // Contributions below alpha_min are skipped; compositing stops once the
    // transmittance falls under transmittance_min; alpha is capped so the
    // 1/(1-alpha) terms in the backward pass stay bounded.
    float alpha_min = 1.0f / 255.0f;
    float transmittance_min = 1e-4f;
    float alpha_cap = 0.99f;
    float cov_lowpass = 0.3f;  // px^2 added to the screen covariance diagonal
};

struct RenderOutput {
    Image image;               // H x W x 3, in [0,1]
    std::vector<float> alpha;  // H x W accumulated opacity
};

struct ScreenGaussian {
    float mean_x = 0.0f, mean_y = 0.0f;  // pixel coordinates
    float cov_xx = 0.0f, cov_xy = 0.0f, cov_yy = 0.0f;
    float depth = 0.0f;  // camera-space z
    bool culled = true;
};

// Perspective projection of one primitive with the local-affine Jacobian;
// the screen covariance carries the +cov_lowpass*I floor. Primitives behind
// the near plane (or past far) come back culled rather than erroring.
ScreenGaussian project_gaussian(const GaussianSet& gs, int64_t index, const Camera& cam,
                                float cov_lowpass = 0.3f);

// Depth-sorted front-to-back alpha compositing over all primitives.
// Deterministic: equal depths are broken by original primitive index, and
// parallelism is over read-only pixel work.
RenderOutput render(const GaussianSet& gs, const Camera& cam, const RenderOptions& opts = {});

// Analytic gradients of sum(image_grad * image) with respect to every
// primitive attribute in its stored parameterization (raw quaternions,
// log scales, opacity logits).
GaussianGrads render_backward(const GaussianSet& gs, const Camera& cam, const Image& image_grad,
                              const RenderOptions& opts = {});

}  // namespace gsr
