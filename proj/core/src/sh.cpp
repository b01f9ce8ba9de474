/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/sh.hpp"

#include <stdexcept>
#include <string>

namespace gsr {

namespace {

constexpr float kC0 = 0.28209479177387814f;
constexpr float kC1 = 0.4886025119029199f;
constexpr float kC2[5] = {1.0925484305920792f, -1.0925484305920792f, 0.31539156525252005f,
                          -1.0925484305920792f, 0.5462742152960396f};
constexpr float kC3[7] = {-0.5900435899266435f, 2.890611442640554f,  -0.4570457994644658f,
                          0.3731763325901154f,  -0.4570457994644658f, 1.445305721320277f,
                          -0.5900435899266435f};

void check_degree(int degree) {
    if (degree < 0 || degree > 3)
        throw std::invalid_argument("sh: degree must be in [0,3], got " + std::to_string(degree));
}

}  // namespace

void sh_basis(int degree, const std::array<float, 3>& dir, float* out) {
    check_degree(degree);
    const float x = dir[0], y = dir[1], z = dir[2];
    out[0] = kC0;
    if (degree < 1) return;
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) return;
    const float xx = x * x, yy = y * y, zz = z * z;
    const float xy = x * y, yz = y * z, xz = x * z;
    out[4] = kC2[0] * xy;
    out[5] = kC2[1] * yz;
    out[6] = kC2[2] * (2.0f * zz - xx - yy);
    out[7] = kC2[3] * xz;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kC3[0] * y * (3.0f * xx - yy);
    out[10] = kC3[1] * xy * z;
    out[11] = kC3[2] * y * (4.0f * zz - xx - yy);
    out[12] = kC3[3] * z * (2.0f * zz - 3.0f * xx - 3.0f * yy);
    out[13] = kC3[4] * x * (4.0f * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3.0f * yy);
}

void sh_basis_grad(int degree, const std::array<float, 3>& dir, float* dx, float* dy, float* dz) {
    check_degree(degree);
    const float x = dir[0], y = dir[1], z = dir[2];
    dx[0] = dy[0] = dz[0] = 0.0f;
    if (degree < 1) return;
    dx[1] = 0.0f;      dy[1] = -kC1;      dz[1] = 0.0f;
    dx[2] = 0.0f;      dy[2] = 0.0f;      dz[2] = kC1;
    dx[3] = -kC1;      dy[3] = 0.0f;      dz[3] = 0.0f;
    if (degree < 2) return;
    dx[4] = kC2[0] * y;          dy[4] = kC2[0] * x;          dz[4] = 0.0f;
    dx[5] = 0.0f;                dy[5] = kC2[1] * z;          dz[5] = kC2[1] * y;
    dx[6] = -2.0f * kC2[2] * x;  dy[6] = -2.0f * kC2[2] * y;  dz[6] = 4.0f * kC2[2] * z;
    dx[7] = kC2[3] * z;          dy[7] = 0.0f;                dz[7] = kC2[3] * x;
    dx[8] = 2.0f * kC2[4] * x;   dy[8] = -2.0f * kC2[4] * y;  dz[8] = 0.0f;
    if (degree < 3) return;
    const float xx = x * x, yy = y * y, zz = z * z;
    dx[9] = kC3[0] * 6.0f * x * y;
    dy[9] = kC3[0] * (3.0f * xx - 3.0f * yy);
    dz[9] = 0.0f;
    dx[10] = kC3[1] * y * z;
    dy[10] = kC3[1] * x * z;
    dz[10] = kC3[1] * x * y;
    dx[11] = kC3[2] * (-2.0f * x * y);
    dy[11] = kC3[2] * (4.0f * zz - xx - 3.0f * yy);
    dz[11] = kC3[2] * 8.0f * y * z;
    dx[12] = kC3[3] * (-6.0f * x * z);
    dy[12] = kC3[3] * (-6.0f * y * z);
    dz[12] = kC3[3] * (6.0f * zz - 3.0f * xx - 3.0f * yy);
    dx[13] = kC3[4] * (4.0f * zz - 3.0f * xx - yy);
    dy[13] = kC3[4] * (-2.0f * x * y);
    dz[13] = kC3[4] * 8.0f * x * z;
    dx[14] = kC3[5] * 2.0f * x * z;
    dy[14] = kC3[5] * (-2.0f * y * z);
    dz[14] = kC3[5] * (xx - yy);
    dx[15] = kC3[6] * (3.0f * xx - 3.0f * yy);
    dy[15] = kC3[6] * (-6.0f * x * y);
    dz[15] = 0.0f;
}

std::array<float, 3> sh_to_color(std::span<const float> coeffs, const std::array<float, 3>& dir,
                                 int degree) {
    check_degree(degree);
    const float norm2 = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
    if (norm2 < 1.0f - 2e-6f || norm2 > 1.0f + 2e-6f)
        throw std::invalid_argument("sh_to_color: direction must be unit length");
    const int k = sh_coeff_count(degree);
    if (static_cast<int>(coeffs.size()) < 3 * k)
        throw std::invalid_argument("sh_to_color: need " + std::to_string(3 * k) +
                                    " coefficients, got " + std::to_string(coeffs.size()));
    float basis[16];
    sh_basis(degree, dir, basis);
    std::array<float, 3> rgb;
    for (int c = 0; c < 3; ++c) {
        float v = 0.5f;
        const float* cc = coeffs.data() + c * k;
        for (int i = 0; i < k; ++i) v += cc[i] * basis[i];
        rgb[c] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return rgb;
}

void sh_to_color_backward(std::span<const float> coeffs, const std::array<float, 3>& dir,
                          int degree, const std::array<float, 3>& dcolor, float* dcoeffs,
                          std::array<float, 3>& ddir) {
    const int k = sh_coeff_count(degree);
    float basis[16], bx[16], by[16], bz[16];
    sh_basis(degree, dir, basis);
    sh_basis_grad(degree, dir, bx, by, bz);
    ddir = {0.0f, 0.0f, 0.0f};
    for (int c = 0; c < 3; ++c) {
        const float* cc = coeffs.data() + c * k;
        float v = 0.5f;
        for (int i = 0; i < k; ++i) v += cc[i] * basis[i];
        if (v <= 0.0f || v >= 1.0f) continue;  // clamped channel
        const float g = dcolor[c];
        if (g == 0.0f) continue;
        float* dc = dcoeffs + c * k;
        for (int i = 0; i < k; ++i) {
            dc[i] += g * basis[i];
            ddir[0] += g * cc[i] * bx[i];
            ddir[1] += g * cc[i] * by[i];
            ddir[2] += g * cc[i] * bz[i];
        }
    }
}

}  // namespace gsr
