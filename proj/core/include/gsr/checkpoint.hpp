/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <string>

#include "gsr/optim.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

// Versioned weight container: a JSON metadata blob plus named float32
// tensors, all little-endian. Exact byte layout in docs/FORMATS.md.
struct Checkpoint {
    std::string meta_json;  // free-form metadata (schedule, architecture, ...)
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    const Tensor* find(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // Copies every entry into same-named parameters; throws on missing name
    // or shape mismatch.
    void load_into(ParamStore& params) const;
    static Checkpoint from_params(const ParamStore& params, std::string meta_json);
};

}  // namespace gsr
