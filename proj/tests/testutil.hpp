/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gsr/tensor.hpp"

namespace gsr::test {

// Central finite differences of a scalar-valued tensor program against the
// autodiff gradients of `params`. The FD deltas are taken in double
// precision; the loss itself is the float32 pipeline value, so agreement is
// judged allclose-style: |analytic - fd| <= rtol*max(|analytic|,|fd|) + atol.
// Returns the worst violation ratio (<= 1 means everything passed).
inline double fd_check_viol(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                            double step = 1e-3, double rtol = 1e-3, double atol = 5e-3) {
    for (auto& p : params) p.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);
    double worst = 0.0;
    for (auto& p : params) {
        std::vector<float> analytic(p.grad().begin(), p.grad().end());
        auto w = p.leaf_data();
        for (size_t j = 0; j < w.size(); ++j) {
            const float keep = w[j];
            w[j] = keep + static_cast<float>(step);
            const double up = loss_fn().item();
            w[j] = keep - static_cast<float>(step);
            const double dn = loss_fn().item();
            w[j] = keep;
            const double fd = (up - dn) / (2.0 * step);
            const double a = analytic.empty() ? 0.0 : analytic[j];
            const double scale = std::max(std::fabs(a), std::fabs(fd));
            worst = std::max(worst, std::fabs(a - fd) / (rtol * scale + atol));
        }
    }
    return worst;
}

// Unique scratch directory under the build tree; removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("gsr_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace gsr::test
