/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <span>

namespace gsr {

// Real spherical harmonics in the splatting convention: channel value is
// clamp(0.5 + sum_lm c_lm * Y_lm(dir), 0, 1), DC first, degrees 0..3.

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Basis values Y_lm(dir) for |dir|=1, written into out[(deg+1)^2].
void sh_basis(int degree, const std::array<float, 3>& dir, float* out);

// d(Y_lm)/d(dir) for each basis function; out_d* hold (deg+1)^2 values each.
void sh_basis_grad(int degree, const std::array<float, 3>& dir, float* out_dx, float* out_dy,
                   float* out_dz);

// coeffs: 3 x (deg+1)^2 (channel-major). Returns clamped RGB.
std::array<float, 3> sh_to_color(std::span<const float> coeffs, const std::array<float, 3>& dir,
                                 int degree);

// Backward companion: given dL/dcolor, accumulates dL/dcoeffs (same layout as
// coeffs) and dL/ddir. Clamped channels contribute zero gradient.
void sh_to_color_backward(std::span<const float> coeffs, const std::array<float, 3>& dir,
                          int degree, const std::array<float, 3>& dcolor, float* dcoeffs,
                          std::array<float, 3>& ddir);

}  // namespace gsr
