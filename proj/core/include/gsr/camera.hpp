/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cstdint>

namespace gsr {

using Vec3 = std::array<float, 3>;
using Mat3 = std::array<float, 9>;  // row-major

inline Vec3 mat3_mul(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

inline Vec3 mat3_tmul(const Mat3& m, const Vec3& v) {  // transpose(m) * v
    return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2], m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
            m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
}

// Pinhole camera with a rigid world-to-camera transform: x_cam = R*x + t.
// Camera space looks down +z.
struct Camera {
    Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // world-to-camera
    Vec3 translation{0, 0, 0};
    float fx = 100.0f, fy = 100.0f;
    float cx = 0.0f, cy = 0.0f;  // principal point in pixels
    int64_t width = 64, height = 64;
    float near_clip = 0.05f, far_clip = 100.0f;

    void validate() const;
    Vec3 to_camera(const Vec3& p) const {
        const Vec3 r = mat3_mul(rotation, p);
        return {r[0] + translation[0], r[1] + translation[1], r[2] + translation[2]};
    }
    // Camera center in world coordinates: -R^T t.
    Vec3 center() const {
        const Vec3 r = mat3_tmul(rotation, translation);
        return {-r[0], -r[1], -r[2]};
    }

    // Camera at `eye` looking at `target`, up vector approximately `up`.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, float focal_px,
                          int64_t width, int64_t height);
};

}  // namespace gsr
