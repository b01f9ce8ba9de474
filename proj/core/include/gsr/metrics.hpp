/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gsr/image.hpp"

namespace gsr {

// 10*log10(peak^2 / MSE); identical images report the 99 dB cap.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, k1=0.01, k2=0.03,
// valid windows only, averaged over channels. Requires min(H,W) >= 11.
double ssim(const Image& a, const Image& b);

}  // namespace gsr
