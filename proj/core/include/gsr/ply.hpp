/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <string>

#include "gsr/gaussian.hpp"

namespace gsr {

// Binary little-endian PLY in the standard splatting layout: x,y,z, nx,ny,nz
// (written as zeros, ignored on load), f_dc_0..2, f_rest_* (channel-major),
// opacity, scale_0..2, rot_0..3. The SH degree is inferred from the f_rest
// property count on load. Float payloads roundtrip bit-exactly.
void save_ply(const GaussianSet& gs, const std::string& path);
GaussianSet load_ply(const std::string& path);

}  // namespace gsr
