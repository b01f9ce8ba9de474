/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <stdexcept>
#include <string>

namespace gsr {

// Bad files, bad arguments to operations, failed validation. CLI exit code 3.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or gradients, aborted optimizations. CLI exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gsr
