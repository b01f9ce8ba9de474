/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gsr/wire.hpp"

namespace gsr {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.seekg(0, std::ios::end);
    const auto size = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw std::runtime_error("cannot read " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for " + path);
}

namespace {

uint32_t crc_table_entry(uint32_t i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
    return c;
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t n, uint32_t seed) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) t[i] = crc_table_entry(i);
        return t;
    }();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace {
constexpr char kMagic[4] = {'G', 'C', 'K', 'P'};
constexpr uint16_t kVersion = 1;
}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void Checkpoint::save(const std::string& path) const {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<uint32_t>(meta_json.size()));
    out.insert(out.end(), meta_json.begin(), meta_json.end());
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u8(out, static_cast<uint8_t>(t.shape().size()));
        for (int64_t d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
        for (float v : t.data()) put_f32(out, v);
    }
    put_u32(out, crc32(out.data() + 4, out.size() - 4));
    write_file_bytes(path, out);
}

Checkpoint Checkpoint::load(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    WireReader r(bytes);
    if (r.bytes(4) != std::string(kMagic, 4))
        throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
    const uint16_t version = r.u16();
    if (version != kVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    Checkpoint ck;
    const uint32_t meta_len = r.u32();
    ck.meta_json = r.bytes(meta_len);
    const uint32_t n_entries = r.u32();
    for (uint32_t i = 0; i < n_entries; ++i) {
        const uint16_t name_len = r.u16();
        std::string name = r.bytes(name_len);
        const uint8_t ndim = r.u8();
        Shape shape(ndim);
        for (uint8_t d = 0; d < ndim; ++d) shape[d] = r.u32();
        const int64_t count = shape_numel(shape);
        std::vector<float> vals(static_cast<size_t>(count));
        for (auto& v : vals) v = r.f32();
        ck.tensors.emplace_back(std::move(name), Tensor::from_vector(std::move(shape), std::move(vals)));
    }
    const uint32_t stored = r.u32();
    const uint32_t actual = crc32(bytes.data() + 4, bytes.size() - 8);
    if (stored != actual) throw std::runtime_error(path + ": checkpoint checksum mismatch");
    return ck;
}

void Checkpoint::load_into(ParamStore& params) const {
    for (const auto& [name, t] : tensors) {
        Tensor* p = params.find(name);
        if (!p) throw std::runtime_error("checkpoint entry " + name + " has no matching parameter");
        if (p->shape() != t.shape())
            throw std::runtime_error("checkpoint entry " + name + " shape " + shape_str(t.shape()) +
                                     " does not match parameter shape " + shape_str(p->shape()));
        auto dst = p->leaf_data();
        auto src = t.data();
        std::memcpy(dst.data(), src.data(), src.size() * sizeof(float));
    }
}

Checkpoint Checkpoint::from_params(const ParamStore& params, std::string meta_json) {
    Checkpoint ck;
    ck.meta_json = std::move(meta_json);
    for (const auto& [name, t] : params.items()) ck.add(name, t);
    return ck;
}

}  // namespace gsr
