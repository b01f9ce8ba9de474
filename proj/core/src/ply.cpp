/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/ply.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gsr/wire.hpp"

namespace gsr {

namespace {

std::vector<std::string> property_names(int sh_degree) {
    std::vector<std::string> props = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = (sh_degree + 1) * (sh_degree + 1) - 1;
    for (int i = 0; i < 3 * rest; ++i) props.push_back("f_rest_" + std::to_string(i));
    props.push_back("opacity");
    props.push_back("scale_0");
    props.push_back("scale_1");
    props.push_back("scale_2");
    props.push_back("rot_0");
    props.push_back("rot_1");
    props.push_back("rot_2");
    props.push_back("rot_3");
    return props;
}

}  // namespace

void save_ply(const GaussianSet& gs, const std::string& path) {
    gs.validate();
    const auto props = property_names(gs.sh_degree);
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << gs.count << "\n";
    for (const auto& p : props) header << "property float " << p << "\n";
    header << "end_header\n";

    const std::string h = header.str();
    std::vector<uint8_t> out(h.begin(), h.end());
    const int K = gs.sh_dim();
    const int rest = K - 1;
    for (int64_t i = 0; i < gs.count; ++i) {
        for (int d = 0; d < 3; ++d) put_f32(out, gs.positions[i * 3 + d]);
        for (int d = 0; d < 3; ++d) put_f32(out, 0.0f);  // normals
        for (int c = 0; c < 3; ++c) put_f32(out, gs.sh_coeffs[(i * 3 + c) * K]);
        for (int c = 0; c < 3; ++c)
            for (int m = 0; m < rest; ++m) put_f32(out, gs.sh_coeffs[(i * 3 + c) * K + 1 + m]);
        put_f32(out, gs.opacity_logits[i]);
        for (int d = 0; d < 3; ++d) put_f32(out, gs.log_scales[i * 3 + d]);
        for (int d = 0; d < 4; ++d) put_f32(out, gs.rotations[i * 4 + d]);
    }
    write_file_bytes(path, out);
}

GaussianSet load_ply(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    // Parse the ASCII header line by line, tracking byte offsets for errors.
    size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        if (pos >= bytes.size())
            throw std::runtime_error(path + ": malformed header, no newline after byte offset " +
                                     std::to_string(start));
        std::string line(reinterpret_cast<const char*>(bytes.data()) + start, pos - start);
        ++pos;
        return line;
    };

    if (next_line() != "ply")
        throw std::runtime_error(path + ": malformed header at byte offset 0, expected 'ply'");
    {
        const size_t off = pos;
        const std::string fmt = next_line();
        if (fmt != "format binary_little_endian 1.0")
            throw std::runtime_error(path + ": unsupported format at byte offset " +
                                     std::to_string(off) + ": '" + fmt + "'");
    }

    int64_t count = -1;
    std::vector<std::string> props;
    while (true) {
        const size_t off = pos;
        const std::string line = next_line();
        if (line == "end_header") break;
        std::istringstream is(line);
        std::string tok;
        is >> tok;
        if (tok == "comment") continue;
        if (tok == "element") {
            std::string name;
            is >> name >> count;
            if (name != "vertex")
                throw std::runtime_error(path + ": unsupported element '" + name +
                                         "' at byte offset " + std::to_string(off));
        } else if (tok == "property") {
            std::string type, name;
            is >> type >> name;
            if (type != "float")
                throw std::runtime_error(path + ": unsupported property type '" + type +
                                         "' at byte offset " + std::to_string(off));
            props.push_back(name);
        } else {
            throw std::runtime_error(path + ": malformed header at byte offset " +
                                     std::to_string(off) + ": '" + line + "'");
        }
    }
    if (count < 1) throw std::runtime_error(path + ": missing or empty vertex element");

    // Index properties and infer the SH degree from the f_rest count.
    auto index_of = [&](const std::string& name) -> int {
        for (size_t i = 0; i < props.size(); ++i)
            if (props[i] == name) return static_cast<int>(i);
        throw std::runtime_error(path + ": missing property " + name);
    };
    int rest_count = 0;
    for (const auto& p : props)
        if (p.rfind("f_rest_", 0) == 0) ++rest_count;
    int sh_degree = -1;
    for (int d = 0; d <= 3; ++d)
        if (rest_count == 3 * ((d + 1) * (d + 1) - 1)) sh_degree = d;
    if (sh_degree < 0)
        throw std::runtime_error(path + ": f_rest count " + std::to_string(rest_count) +
                                 " does not match any SH degree in [0,3]");

    const int base[] = {index_of("x"),       index_of("y"),       index_of("z"),
                        index_of("f_dc_0"),  index_of("f_dc_1"),  index_of("f_dc_2"),
                        index_of("opacity"), index_of("scale_0"), index_of("scale_1"),
                        index_of("scale_2"), index_of("rot_0"),   index_of("rot_1"),
                        index_of("rot_2"),   index_of("rot_3")};
    std::vector<int> rest_idx(static_cast<size_t>(rest_count));
    for (int i = 0; i < rest_count; ++i) rest_idx[i] = index_of("f_rest_" + std::to_string(i));

    const size_t stride = props.size() * 4;
    if (bytes.size() - pos < static_cast<size_t>(count) * stride)
        throw std::runtime_error(path + ": truncated payload, need " +
                                 std::to_string(static_cast<size_t>(count) * stride) +
                                 " bytes at offset " + std::to_string(pos) + ", have " +
                                 std::to_string(bytes.size() - pos));

    GaussianSet gs = GaussianSet::empty(count, sh_degree);
    const int K = gs.sh_dim();
    const int rest_per_ch = K - 1;
    for (int64_t i = 0; i < count; ++i) {
        const uint8_t* row = bytes.data() + pos + static_cast<size_t>(i) * stride;
        auto f = [&](int pi) {
            float v;
            std::memcpy(&v, row + pi * 4, 4);
            return v;
        };
        for (int d = 0; d < 3; ++d) gs.positions[i * 3 + d] = f(base[d]);
        for (int c = 0; c < 3; ++c) gs.sh_coeffs[(i * 3 + c) * K] = f(base[3 + c]);
        for (int c = 0; c < 3; ++c)
            for (int m = 0; m < rest_per_ch; ++m)
                gs.sh_coeffs[(i * 3 + c) * K + 1 + m] = f(rest_idx[c * rest_per_ch + m]);
        gs.opacity_logits[i] = f(base[6]);
        for (int d = 0; d < 3; ++d) gs.log_scales[i * 3 + d] = f(base[7 + d]);
        for (int d = 0; d < 4; ++d) gs.rotations[i * 4 + d] = f(base[10 + d]);
    }
    return gs;
}

}  // namespace gsr
