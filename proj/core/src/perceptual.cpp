/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/perceptual.hpp"

#include <cmath>
#include <stdexcept>

#include "gsr/loss.hpp"
#include "gsr/rng.hpp"

namespace gsr {

namespace {
constexpr int kFeat = 12;
constexpr int kScales = 3;
constexpr int kLayers = 3;
}  // namespace

PerceptualMetric::PerceptualMetric(uint64_t seed) {
    Rng rng(derive_seed(seed, 0x9E4C));
    for (int s = 0; s < kScales; ++s) {
        for (int l = 0; l < kLayers; ++l) {
            const int in = l == 0 ? 3 : kFeat;
            const float std = std::sqrt(2.0f / static_cast<float>(in * 9));
            weights_.push_back(Tensor::randn({kFeat, in, 3, 3}, rng, std));
        }
    }
}

Tensor PerceptualMetric::distance_graph(const Tensor& a, const Tensor& b) const {
    if (a.shape() != b.shape())
        throw std::invalid_argument("perceptual: shapes differ, " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const auto& sh = a.shape();
    if (sh.size() != 4 || sh[1] != 3 || sh[2] % 4 != 0 || sh[3] % 4 != 0)
        throw std::invalid_argument("perceptual: want [N,3,H,W] with H,W divisible by 4");

    auto features = [&](Tensor x, int scale) {
        for (int l = 0; l < kLayers; ++l)
            x = relu(conv2d(x, weights_[scale * kLayers + l], {}, 1, 1));
        // Unit-normalize the channel vector at every spatial position.
        const Tensor norm = sqrt(add_scalar(sum_axis(square(x), 1), 1e-8f));
        return div(x, norm);
    };

    Tensor total;
    Tensor xa = a, xb = b;
    for (int s = 0; s < kScales; ++s) {
        if (s > 0) {
            xa = avgpool2(xa);
            xb = avgpool2(xb);
        }
        const Tensor d = mean_all(square(sub(features(xa, s), features(xb, s))));
        total = total.defined() ? add(total, d) : d;
    }
    return total;
}

double PerceptualMetric::distance(const Image& a, const Image& b) const {
    const Tensor ta = image_to_tensor(a);
    const Tensor tb = image_to_tensor(b);
    return distance_graph(ta, tb).item();
}

}  // namespace gsr
