/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace gsr {

namespace {

constexpr int kWin = 11;
constexpr float kSigma = 1.5f;
constexpr float kC1 = 0.01f * 0.01f;
constexpr float kC2 = 0.03f * 0.03f;

Tensor gaussian_window() {
    std::vector<float> w(kWin * kWin);
    float sum = 0.0f;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const float dy = static_cast<float>(y - kWin / 2);
            const float dx = static_cast<float>(x - kWin / 2);
            const float v = std::exp(-(dx * dx + dy * dy) / (2.0f * kSigma * kSigma));
            w[y * kWin + x] = v;
            sum += v;
        }
    for (auto& v : w) v /= sum;
    return Tensor::from_vector({1, 1, kWin, kWin}, std::move(w));
}

// Mean SSIM of one single-channel pair using valid windows.
Tensor ssim_channel(const Tensor& x, const Tensor& y, const Tensor& win) {
    const Tensor mu_x = conv2d(x, win, {}, 1, 0);
    const Tensor mu_y = conv2d(y, win, {}, 1, 0);
    const Tensor mu_xx = mul(mu_x, mu_x);
    const Tensor mu_yy = mul(mu_y, mu_y);
    const Tensor mu_xy = mul(mu_x, mu_y);
    const Tensor sig_x = sub(conv2d(mul(x, x), win, {}, 1, 0), mu_xx);
    const Tensor sig_y = sub(conv2d(mul(y, y), win, {}, 1, 0), mu_yy);
    const Tensor sig_xy = sub(conv2d(mul(x, y), win, {}, 1, 0), mu_xy);
    const Tensor num = mul(add_scalar(mul_scalar(mu_xy, 2.0f), kC1),
                           add_scalar(mul_scalar(sig_xy, 2.0f), kC2));
    const Tensor den = mul(add_scalar(add(mu_xx, mu_yy), kC1),
                           add_scalar(add(sig_x, sig_y), kC2));
    return mean_all(div(num, den));
}

}  // namespace

Tensor image_to_tensor(const Image& img, bool requires_grad) {
    std::vector<float> v(static_cast<size_t>(img.channels * img.height * img.width));
    for (int64_t c = 0; c < img.channels; ++c)
        for (int64_t y = 0; y < img.height; ++y)
            for (int64_t x = 0; x < img.width; ++x)
                v[(c * img.height + y) * img.width + x] = img.at(y, x, c);
    return Tensor::from_vector({1, img.channels, img.height, img.width}, std::move(v),
                               requires_grad);
}

Image tensor_to_image(const Tensor& t) {
    const auto& sh = t.shape();
    if (sh.size() != 4 || sh[0] != 1)
        throw std::invalid_argument("tensor_to_image: want [1,C,H,W], got " + shape_str(sh));
    Image img(sh[2], sh[3], sh[1]);
    const auto v = t.data();
    for (int64_t c = 0; c < sh[1]; ++c)
        for (int64_t y = 0; y < sh[2]; ++y)
            for (int64_t x = 0; x < sh[3]; ++x)
                img.at(y, x, c) = v[(c * sh[2] + y) * sh[3] + x];
    return img;
}

Tensor image_loss_graph(const Tensor& pred, const Tensor& target, float lambda_ssim) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("image_loss: shapes differ, " + shape_str(pred.shape()) +
                                    " vs " + shape_str(target.shape()));
    Tensor loss = mean_all(abs(sub(pred, target)));
    if (lambda_ssim != 0.0f) {
        const auto& sh = pred.shape();
        if (sh[2] < kWin || sh[3] < kWin)
            throw std::invalid_argument("image_loss: SSIM needs images of at least 11x11");
        const Tensor win = gaussian_window();
        Tensor ssim_sum;
        for (int64_t c = 0; c < sh[1]; ++c) {
            const Tensor xc = slice(pred, 1, c, 1);
            const Tensor yc = slice(target, 1, c, 1);
            const Tensor s = ssim_channel(xc, yc, win);
            ssim_sum = ssim_sum.defined() ? add(ssim_sum, s) : s;
        }
        const Tensor ssim = mul_scalar(ssim_sum, 1.0f / static_cast<float>(sh[1]));
        loss = add(loss, mul_scalar(add_scalar(neg(ssim), 1.0f), lambda_ssim));
    }
    return loss;
}

ImageLossResult image_loss(const Image& render, const Image& target, float lambda_ssim) {
    if (!render.same_dims(target))
        throw std::invalid_argument("image_loss: image dimensions differ");
    Tensor x = image_to_tensor(render, true);
    Tensor y = image_to_tensor(target, false);

    ImageLossResult res;
    Tensor l1 = mean_all(abs(sub(x, y)));
    Tensor total = image_loss_graph(x, y, lambda_ssim);
    res.l1 = l1.item();
    res.total = total.item();
    res.ssim = lambda_ssim != 0.0f ? 1.0f - (res.total - res.l1) / lambda_ssim : 1.0f;

    backward(total);
    Tensor gx = Tensor::from_vector(x.shape(), std::vector<float>(x.grad().begin(), x.grad().end()));
    res.image_grad = tensor_to_image(gx);
    return res;
}

RenderLossResult render_loss_backward(const GaussianSet& gs, const Camera& cam,
                                      const Image& target, float lambda_ssim,
                                      const RenderOptions& opts) {
    const RenderOutput out = render(gs, cam, opts);
    ImageLossResult il = image_loss(out.image, target, lambda_ssim);
    RenderLossResult res;
    res.loss = il.total;
    res.l1 = il.l1;
    res.ssim = il.ssim;
    res.grads = render_backward(gs, cam, il.image_grad, opts);
    return res;
}

std::vector<double> primitive_saliency(const GaussianSet& gs, std::span<const Camera> views,
                                       std::span<const Image> targets, float lambda_ssim,
                                       const RenderOptions& opts) {
    if (views.empty()) throw std::invalid_argument("primitive_saliency: needs at least one view");
    if (views.size() != targets.size())
        throw std::invalid_argument("primitive_saliency: view/target count mismatch");
    std::vector<double> scores(static_cast<size_t>(gs.count), 0.0);
    for (size_t v = 0; v < views.size(); ++v) {
        const RenderLossResult r = render_loss_backward(gs, views[v], targets[v], lambda_ssim, opts);
        for (int64_t i = 0; i < gs.count; ++i) scores[i] += r.grads.primitive_norm(gs, i);
    }
    return scores;
}

}  // namespace gsr
