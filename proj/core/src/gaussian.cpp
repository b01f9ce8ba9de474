/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/gaussian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gsr {

void Camera::validate() const {
    if (fx <= 0.0f || fy <= 0.0f) throw std::invalid_argument("camera: focal lengths must be > 0");
    if (near_clip >= far_clip) throw std::invalid_argument("camera: near must be < far");
    if (width < 8 || height < 8) throw std::invalid_argument("camera: image must be at least 8x8");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, float focal_px,
                       int64_t width, int64_t height) {
    auto norm = [](const Vec3& v) {
        const float n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        return Vec3{v[0] / n, v[1] / n, v[2] / n};
    };
    auto cross = [](const Vec3& a, const Vec3& b) {
        return Vec3{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    };
    const Vec3 fwd = norm({target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]});
    Vec3 right = cross(fwd, up);
    const float rn = std::sqrt(right[0] * right[0] + right[1] * right[1] + right[2] * right[2]);
    if (rn < 1e-6f) right = cross(fwd, Vec3{0.0f, 1.0f, 0.001f});
    right = norm(right);
    const Vec3 down = cross(fwd, right);  // +y in image points down

    Camera cam;
    cam.rotation = {right[0], right[1], right[2], down[0], down[1], down[2], fwd[0], fwd[1], fwd[2]};
    const Vec3 re = mat3_mul(cam.rotation, eye);
    cam.translation = {-re[0], -re[1], -re[2]};
    cam.fx = cam.fy = focal_px;
    cam.width = width;
    cam.height = height;
    cam.cx = static_cast<float>(width) / 2.0f;
    cam.cy = static_cast<float>(height) / 2.0f;
    return cam;
}

GaussianSet GaussianSet::empty(int64_t count, int sh_degree) {
    GaussianSet gs;
    gs.count = count;
    gs.sh_degree = sh_degree;
    gs.positions.assign(static_cast<size_t>(count * 3), 0.0f);
    gs.rotations.assign(static_cast<size_t>(count * 4), 0.0f);
    for (int64_t i = 0; i < count; ++i) gs.rotations[i * 4] = 1.0f;
    gs.log_scales.assign(static_cast<size_t>(count * 3), 0.0f);
    gs.opacity_logits.assign(static_cast<size_t>(count), 0.0f);
    gs.sh_coeffs.assign(static_cast<size_t>(count * 3 * gs.sh_dim()), 0.0f);
    return gs;
}

void GaussianSet::validate() const {
    if (count < 1) throw std::invalid_argument("gaussian set: needs at least one primitive");
    if (sh_degree < 0 || sh_degree > 3)
        throw std::invalid_argument("gaussian set: sh degree out of range");
    const auto want = [&](size_t got, size_t expect, const char* what) {
        if (got != expect)
            throw std::invalid_argument(std::string("gaussian set: ") + what + " has " +
                                        std::to_string(got) + " values, expected " +
                                        std::to_string(expect));
    };
    want(positions.size(), static_cast<size_t>(count * 3), "positions");
    want(rotations.size(), static_cast<size_t>(count * 4), "rotations");
    want(log_scales.size(), static_cast<size_t>(count * 3), "log_scales");
    want(opacity_logits.size(), static_cast<size_t>(count), "opacity_logits");
    want(sh_coeffs.size(), static_cast<size_t>(count * 3 * sh_dim()), "sh_coeffs");
}

GaussianSet GaussianSet::subset(const std::vector<int64_t>& indices) const {
    GaussianSet out;
    out.count = static_cast<int64_t>(indices.size());
    out.sh_degree = sh_degree;
    const int K = 3 * sh_dim();
    out.positions.reserve(indices.size() * 3);
    out.rotations.reserve(indices.size() * 4);
    out.log_scales.reserve(indices.size() * 3);
    out.opacity_logits.reserve(indices.size());
    out.sh_coeffs.reserve(indices.size() * K);
    for (int64_t i : indices) {
        for (int d = 0; d < 3; ++d) out.positions.push_back(positions[i * 3 + d]);
        for (int d = 0; d < 4; ++d) out.rotations.push_back(rotations[i * 4 + d]);
        for (int d = 0; d < 3; ++d) out.log_scales.push_back(log_scales[i * 3 + d]);
        out.opacity_logits.push_back(opacity_logits[i]);
        for (int d = 0; d < K; ++d) out.sh_coeffs.push_back(sh_coeffs[i * K + d]);
    }
    return out;
}

GaussianGrads GaussianGrads::zeros(const GaussianSet& gs) {
    GaussianGrads g;
    g.positions.assign(gs.positions.size(), 0.0f);
    g.rotations.assign(gs.rotations.size(), 0.0f);
    g.log_scales.assign(gs.log_scales.size(), 0.0f);
    g.opacity_logits.assign(gs.opacity_logits.size(), 0.0f);
    g.sh_coeffs.assign(gs.sh_coeffs.size(), 0.0f);
    return g;
}

void GaussianGrads::add(const GaussianGrads& o) {
    auto acc = [](std::vector<float>& a, const std::vector<float>& b) {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(positions, o.positions);
    acc(rotations, o.rotations);
    acc(log_scales, o.log_scales);
    acc(opacity_logits, o.opacity_logits);
    acc(sh_coeffs, o.sh_coeffs);
}

double GaussianGrads::primitive_norm(const GaussianSet& gs, int64_t i) const {
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) sq += static_cast<double>(positions[i * 3 + d]) * positions[i * 3 + d];
    for (int d = 0; d < 4; ++d) sq += static_cast<double>(rotations[i * 4 + d]) * rotations[i * 4 + d];
    for (int d = 0; d < 3; ++d)
        sq += static_cast<double>(log_scales[i * 3 + d]) * log_scales[i * 3 + d];
    sq += static_cast<double>(opacity_logits[i]) * opacity_logits[i];
    const int K = 3 * gs.sh_dim();
    for (int d = 0; d < K; ++d)
        sq += static_cast<double>(sh_coeffs[i * K + d]) * sh_coeffs[i * K + d];
    return std::sqrt(sq);
}

Mat3 quat_to_rotmat(const float* quat) {
    const float n = std::sqrt(quat[0] * quat[0] + quat[1] * quat[1] + quat[2] * quat[2] +
                              quat[3] * quat[3]);
    const float w = quat[0] / n, x = quat[1] / n, y = quat[2] / n, z = quat[3] / n;
    return {1.0f - 2.0f * (y * y + z * z), 2.0f * (x * y - w * z),       2.0f * (x * z + w * y),
            2.0f * (x * y + w * z),       1.0f - 2.0f * (x * x + z * z), 2.0f * (y * z - w * x),
            2.0f * (x * z - w * y),       2.0f * (y * z + w * x),       1.0f - 2.0f * (x * x + y * y)};
}

Mat3 covariance3d(const float* quat, const float* log_scale) {
    const Mat3 r = quat_to_rotmat(quat);
    const float s0 = std::exp(log_scale[0]), s1 = std::exp(log_scale[1]),
                s2 = std::exp(log_scale[2]);
    // M = R * S; Sigma = M * M^T
    const float m[9] = {r[0] * s0, r[1] * s1, r[2] * s2, r[3] * s0, r[4] * s1,
                        r[5] * s2, r[6] * s0, r[7] * s1, r[8] * s2};
    Mat3 cov;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            cov[i * 3 + j] = m[i * 3] * m[j * 3] + m[i * 3 + 1] * m[j * 3 + 1] +
                             m[i * 3 + 2] * m[j * 3 + 2];
    return cov;
}

}  // namespace gsr
