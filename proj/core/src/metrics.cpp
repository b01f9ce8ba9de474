/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gsr {

double psnr(const Image& a, const Image& b, double peak) {
    if (!a.same_dims(b)) throw std::invalid_argument("psnr: image dimensions differ");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr int kWin = 11;

// Separable Gaussian filter over valid windows (double precision).
std::vector<double> gauss_filter_valid(const std::vector<double>& img, int64_t h, int64_t w,
                                       const double* kernel) {
    const int64_t oh = h - kWin + 1, ow = w - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h * ow));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += kernel[k] * img[y * w + x + k];
            tmp[y * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += kernel[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("ssim: image dimensions differ");
    if (a.height < kWin || a.width < kWin)
        throw std::invalid_argument("ssim: images must be at least 11x11");
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double kernel[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        kernel[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        ksum += kernel[i];
    }
    for (auto& k : kernel) k /= ksum;

    const int64_t h = a.height, w = a.width;
    const int64_t oh = h - kWin + 1, ow = w - kWin + 1;
    double total = 0.0;
    for (int64_t c = 0; c < a.channels; ++c) {
        std::vector<double> x(static_cast<size_t>(h * w)), y(static_cast<size_t>(h * w));
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (int64_t p = 0; p < h * w; ++p) {
            x[p] = a.data[p * a.channels + c];
            y[p] = b.data[p * b.channels + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mu_x = gauss_filter_valid(x, h, w, kernel);
        const auto mu_y = gauss_filter_valid(y, h, w, kernel);
        const auto m_xx = gauss_filter_valid(xx, h, w, kernel);
        const auto m_yy = gauss_filter_valid(yy, h, w, kernel);
        const auto m_xy = gauss_filter_valid(xy, h, w, kernel);
        double acc = 0.0;
        for (int64_t p = 0; p < oh * ow; ++p) {
            const double sx = m_xx[p] - mu_x[p] * mu_x[p];
            const double sy = m_yy[p] - mu_y[p] * mu_y[p];
            const double sxy = m_xy[p] - mu_x[p] * mu_y[p];
            const double num = (2.0 * mu_x[p] * mu_y[p] + c1) * (2.0 * sxy + c2);
            const double den = (mu_x[p] * mu_x[p] + mu_y[p] * mu_y[p] + c1) * (sx + sy + c2);
            acc += num / den;
        }
        total += acc / static_cast<double>(oh * ow);
    }
    return total / static_cast<double>(a.channels);
}

}  // namespace gsr
