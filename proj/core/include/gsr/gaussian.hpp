/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gsr/camera.hpp"

namespace gsr {

// Sparse Gaussian scene. Scales are stored in log domain and opacity as a
// logit so downstream optimization is unconstrained; quaternions are stored
// raw and renormalized at point of use.
struct GaussianSet {
    int64_t count = 0;
    int sh_degree = 0;
    std::vector<float> positions;       // N x 3
    std::vector<float> rotations;       // N x 4, (w,x,y,z)
    std::vector<float> log_scales;      // N x 3
    std::vector<float> opacity_logits;  // N
    std::vector<float> sh_coeffs;       // N x 3 x (deg+1)^2, channel-major per primitive

    int sh_dim() const { return (sh_degree + 1) * (sh_degree + 1); }
    int attrib_dim() const { return 3 + 4 + 3 + 1 + 3 * sh_dim(); }

    static GaussianSet empty(int64_t count, int sh_degree);
    void validate() const;

    GaussianSet subset(const std::vector<int64_t>& indices) const;
};

// Per-attribute gradient buffers matching a GaussianSet's layout.
struct GaussianGrads {
    std::vector<float> positions, rotations, log_scales, opacity_logits, sh_coeffs;

    static GaussianGrads zeros(const GaussianSet& gs);
    void add(const GaussianGrads& o);
    // L2 norm of the concatenated gradients of primitive i.
    double primitive_norm(const GaussianSet& gs, int64_t i) const;
};

// 3D covariance R(q) * diag(exp(ls))^2 * R(q)^T as a row-major 3x3.
Mat3 covariance3d(const float* quat, const float* log_scale);

// Unit-quaternion rotation matrix (renormalizes q internally).
Mat3 quat_to_rotmat(const float* quat);

inline float sigmoidf(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}
inline float logitf(float p) { return std::log(p / (1.0f - p)); }

}  // namespace gsr
