/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gsr/wire.hpp"

namespace gsr {

namespace {
constexpr char kF32Magic[4] = {'F', '3', '2', 'I'};
}

void save_f32img(const Image& img, const std::string& path) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kF32Magic, kF32Magic + 4);
    put_u32(out, static_cast<uint32_t>(img.height));
    put_u32(out, static_cast<uint32_t>(img.width));
    put_u32(out, static_cast<uint32_t>(img.channels));
    for (float v : img.data) put_f32(out, v);
    write_file_bytes(path, out);
}

Image load_f32img(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    WireReader r(bytes);
    if (r.bytes(4) != std::string(kF32Magic, 4))
        throw std::runtime_error(path + ": not an f32img file");
    Image img;
    img.height = r.u32();
    img.width = r.u32();
    img.channels = r.u32();
    const int64_t n = img.height * img.width * img.channels;
    img.data.resize(static_cast<size_t>(n));
    for (auto& v : img.data) v = r.f32();
    return img;
}

namespace {

void png_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u8(out, static_cast<uint8_t>(payload.size() >> 24));
    put_u8(out, static_cast<uint8_t>(payload.size() >> 16));
    put_u8(out, static_cast<uint8_t>(payload.size() >> 8));
    put_u8(out, static_cast<uint8_t>(payload.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    const uint32_t crc = ::crc32(::crc32(0, nullptr, 0), body.data(), static_cast<uInt>(body.size()));
    put_u8(out, static_cast<uint8_t>(crc >> 24));
    put_u8(out, static_cast<uint8_t>(crc >> 16));
    put_u8(out, static_cast<uint8_t>(crc >> 8));
    put_u8(out, static_cast<uint8_t>(crc));
}

}  // namespace

void save_png(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("save_png: supports 1 or 3 channels, got " +
                                    std::to_string(img.channels));
    const int64_t H = img.height, W = img.width, C = img.channels;
    // Filter byte 0 per scanline, 8-bit samples, rounded half-up.
    std::vector<uint8_t> raw(static_cast<size_t>(H * (1 + W * C)));
    size_t p = 0;
    for (int64_t y = 0; y < H; ++y) {
        raw[p++] = 0;
        for (int64_t x = 0; x < W; ++x)
            for (int64_t c = 0; c < C; ++c) {
                float v = img.at(y, x, c);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                raw[p++] = static_cast<uint8_t>(std::floor(v * 255.0f + 0.5f));
            }
    }
    uLongf zcap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> z(zcap);
    if (compress2(z.data(), &zcap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("save_png: deflate failed");
    z.resize(zcap);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<uint8_t> ihdr;
    for (int i = 3; i >= 0; --i) ihdr.push_back(static_cast<uint8_t>(W >> (8 * i)));
    for (int i = 3; i >= 0; --i) ihdr.push_back(static_cast<uint8_t>(H >> (8 * i)));
    ihdr.push_back(8);                                 // bit depth
    ihdr.push_back(C == 3 ? 2 : 0);                    // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", z);
    png_chunk(out, "IEND", {});
    write_file_bytes(path, out);
}

}  // namespace gsr
