/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include "gsr/image.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

// Perceptual distance proxy: fixed seeded 3-layer conv feature stacks at
// three scales (full, 1/2, 1/4); features are unit-normalized across
// channels and compared by mean squared difference, summed over scales.
// Weights are regenerated deterministically from the seed, never stored.
class PerceptualMetric {
public:
    static constexpr uint64_t kDefaultSeed = 0x9E3779B9;

    explicit PerceptualMetric(uint64_t seed = kDefaultSeed);

    // a, b: [N,3,H,W] in [0,1] domain; H, W divisible by 4. Differentiable
    // (gradients flow into a and b).
    Tensor distance_graph(const Tensor& a, const Tensor& b) const;

    double distance(const Image& a, const Image& b) const;

private:
    std::vector<Tensor> weights_;  // 3 scales x 3 layers
};

}  // namespace gsr
