/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsr {

// Row-major H x W x C float image. Rendered values live in [0,1]; training
// tensors may hold any range.
struct Image {
    int64_t height = 0;
    int64_t width = 0;
    int64_t channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int64_t h, int64_t w, int64_t c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<size_t>(h * w * c), fill) {}

    float& at(int64_t y, int64_t x, int64_t c) { return data[(y * width + x) * channels + c]; }
    float at(int64_t y, int64_t x, int64_t c) const { return data[(y * width + x) * channels + c]; }
    int64_t pixel_count() const { return height * width; }
    bool same_dims(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Raw float image container (magic "F32I", u32 H, u32 W, u32 C, little-endian
// float payload). Used for training pairs so the 8-bit PNG quantization never
// touches targets.
void save_f32img(const Image& img, const std::string& path);
Image load_f32img(const std::string& path);

// 8-bit sRGB-ish PNG export; values clamped to [0,1] and rounded half-up.
void save_png(const Image& img, const std::string& path);

}  // namespace gsr
