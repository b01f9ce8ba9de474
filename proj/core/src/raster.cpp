/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gsr/parallel.hpp"
#include "gsr/sh.hpp"

namespace gsr {

namespace {

constexpr int kTile = 16;

// Per-view projected state of one primitive.
struct Projected {
    ScreenGaussian sg;
    float inv_xx = 0.0f, inv_xy = 0.0f, inv_yy = 0.0f;  // conic (cov2d^-1)
    float opacity = 0.0f;
    std::array<float, 3> color{};
    std::array<float, 3> view_dir{};
    float radius = 0.0f;  // screen-space reach where alpha can still clear alpha_min
    // camera-space position and clamp state, kept for the backward pass
    float tx = 0.0f, ty = 0.0f, tz = 0.0f;
    float txc = 0.0f, tyc = 0.0f;  // frustum-clamped coordinates used in J
    bool clamp_x = false, clamp_y = false;
};

struct ViewContext {
    std::vector<Projected> prims;
    std::vector<int32_t> order;              // front-to-back, culled excluded
    std::vector<std::vector<int32_t>> tiles;  // per tile: indices into `order` domain (prim ids)
    int64_t tiles_x = 0, tiles_y = 0;
};

float max_eigen2x2(float a, float b, float c) {
    const float mid = 0.5f * (a + c);
    const float h = std::sqrt(std::max(0.0f, 0.25f * (a - c) * (a - c) + b * b));
    return mid + h;
}

Projected project_one(const GaussianSet& gs, int64_t i, const Camera& cam,
                      const RenderOptions& opts, const Vec3& cam_center) {
    Projected pr;
    const float* pos = gs.positions.data() + i * 3;
    const Vec3 t = cam.to_camera({pos[0], pos[1], pos[2]});
    pr.tx = t[0];
    pr.ty = t[1];
    pr.tz = t[2];
    pr.sg.culled = true;
    if (t[2] <= cam.near_clip || t[2] > cam.far_clip) return pr;

    pr.opacity = sigmoidf(gs.opacity_logits[i]);
    if (pr.opacity < opts.alpha_min) return pr;

    // Clamp the point used by the covariance Jacobian into the (padded)
    // frustum; the projected mean itself stays unclamped.
    const float tanx = 0.5f * static_cast<float>(cam.width) / cam.fx;
    const float tany = 0.5f * static_cast<float>(cam.height) / cam.fy;
    const float limx_pos = (static_cast<float>(cam.width) - cam.cx) / cam.fx + 0.3f * tanx;
    const float limx_neg = cam.cx / cam.fx + 0.3f * tanx;
    const float limy_pos = (static_cast<float>(cam.height) - cam.cy) / cam.fy + 0.3f * tany;
    const float limy_neg = cam.cy / cam.fy + 0.3f * tany;
    const float xz = t[0] / t[2];
    const float yz = t[1] / t[2];
    pr.clamp_x = xz < -limx_neg || xz > limx_pos;
    pr.clamp_y = yz < -limy_neg || yz > limy_pos;
    pr.txc = std::clamp(xz, -limx_neg, limx_pos) * t[2];
    pr.tyc = std::clamp(yz, -limy_neg, limy_pos) * t[2];

    const Mat3 cov3 = covariance3d(gs.rotations.data() + i * 4, gs.log_scales.data() + i * 3);
    // U = J * W, with J the 2x3 perspective Jacobian at the clamped point.
    const float inv_z = 1.0f / t[2];
    const float inv_z2 = inv_z * inv_z;
    const float j00 = cam.fx * inv_z, j02 = -cam.fx * pr.txc * inv_z2;
    const float j11 = cam.fy * inv_z, j12 = -cam.fy * pr.tyc * inv_z2;
    const Mat3& w = cam.rotation;
    float u0[3], u1[3];
    for (int k = 0; k < 3; ++k) {
        u0[k] = j00 * w[0 + k] + j02 * w[6 + k];
        u1[k] = j11 * w[3 + k] + j12 * w[6 + k];
    }
    auto quad = [&cov3](const float* a, const float* b) {
        float s = 0.0f;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) s += a[r] * cov3[r * 3 + c] * b[c];
        return s;
    };
    pr.sg.cov_xx = quad(u0, u0) + opts.cov_lowpass;
    pr.sg.cov_xy = quad(u0, u1);
    pr.sg.cov_yy = quad(u1, u1) + opts.cov_lowpass;
    pr.sg.mean_x = cam.fx * t[0] * inv_z + cam.cx;
    pr.sg.mean_y = cam.fy * t[1] * inv_z + cam.cy;
    pr.sg.depth = t[2];

    const float det = pr.sg.cov_xx * pr.sg.cov_yy - pr.sg.cov_xy * pr.sg.cov_xy;
    if (det <= 0.0f || !std::isfinite(det)) return pr;
    const float inv_det = 1.0f / det;
    pr.inv_xx = pr.sg.cov_yy * inv_det;
    pr.inv_xy = -pr.sg.cov_xy * inv_det;
    pr.inv_yy = pr.sg.cov_xx * inv_det;

    // Reach where opacity*exp(-r^2/(2*lambda_max)) can still clear alpha_min.
    // Outside it every contribution is skipped by the alpha_min rule anyway,
    // so bbox culling never changes the composited result.
    const float lmax = max_eigen2x2(pr.sg.cov_xx, pr.sg.cov_xy, pr.sg.cov_yy);
    pr.radius = std::sqrt(std::max(0.0f, 2.0f * lmax * std::log(pr.opacity / opts.alpha_min)));

    const float dirv[3] = {pos[0] - cam_center[0], pos[1] - cam_center[1], pos[2] - cam_center[2]};
    const float dn = std::sqrt(dirv[0] * dirv[0] + dirv[1] * dirv[1] + dirv[2] * dirv[2]);
    pr.view_dir = {dirv[0] / dn, dirv[1] / dn, dirv[2] / dn};
    const int K = gs.sh_dim();
    pr.color = sh_to_color({gs.sh_coeffs.data() + i * 3 * K, static_cast<size_t>(3 * K)},
                           pr.view_dir, gs.sh_degree);
    pr.sg.culled = false;
    return pr;
}

ViewContext build_context(const GaussianSet& gs, const Camera& cam, const RenderOptions& opts) {
    gs.validate();
    cam.validate();
    ViewContext ctx;
    const int64_t n = gs.count;
    ctx.prims.resize(static_cast<size_t>(n));
    const Vec3 cam_center = cam.center();
    parallel_for(n, [&](int64_t i) { ctx.prims[i] = project_one(gs, i, cam, opts, cam_center); });

    ctx.order.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        if (!ctx.prims[i].sg.culled) ctx.order.push_back(static_cast<int32_t>(i));
    std::sort(ctx.order.begin(), ctx.order.end(), [&](int32_t a, int32_t b) {
        const float da = ctx.prims[a].sg.depth, db = ctx.prims[b].sg.depth;
        if (da != db) return da < db;
        return a < b;  // deterministic tie-break by original index
    });

    ctx.tiles_x = (cam.width + kTile - 1) / kTile;
    ctx.tiles_y = (cam.height + kTile - 1) / kTile;
    ctx.tiles.assign(static_cast<size_t>(ctx.tiles_x * ctx.tiles_y), {});
    for (const int32_t id : ctx.order) {
        const Projected& pr = ctx.prims[id];
        const int64_t x0 = std::clamp<int64_t>(
            static_cast<int64_t>(std::floor(pr.sg.mean_x - pr.radius)) / kTile, 0, ctx.tiles_x - 1);
        const int64_t x1 = std::clamp<int64_t>(
            static_cast<int64_t>(std::floor(pr.sg.mean_x + pr.radius)) / kTile, 0, ctx.tiles_x - 1);
        const int64_t y0 = std::clamp<int64_t>(
            static_cast<int64_t>(std::floor(pr.sg.mean_y - pr.radius)) / kTile, 0, ctx.tiles_y - 1);
        const int64_t y1 = std::clamp<int64_t>(
            static_cast<int64_t>(std::floor(pr.sg.mean_y + pr.radius)) / kTile, 0, ctx.tiles_y - 1);
        if (pr.sg.mean_x + pr.radius < 0.0f || pr.sg.mean_x - pr.radius > cam.width ||
            pr.sg.mean_y + pr.radius < 0.0f || pr.sg.mean_y - pr.radius > cam.height)
            continue;
        for (int64_t ty = y0; ty <= y1; ++ty)
            for (int64_t tx = x0; tx <= x1; ++tx)
                ctx.tiles[ty * ctx.tiles_x + tx].push_back(id);
    }
    return ctx;
}

}  // namespace

ScreenGaussian project_gaussian(const GaussianSet& gs, int64_t index, const Camera& cam,
                                float cov_lowpass) {
    RenderOptions opts;
    opts.cov_lowpass = cov_lowpass;
    opts.alpha_min = 0.0f;  // pure projection query, no opacity-based culling
    const Vec3 cam_center = cam.center();
    Projected pr = project_one(gs, index, cam, opts, cam_center);
    return pr.sg;
}

RenderOutput render(const GaussianSet& gs, const Camera& cam, const RenderOptions& opts) {
    const ViewContext ctx = build_context(gs, cam, opts);
    RenderOutput out;
    out.image = Image(cam.height, cam.width, 3);
    out.alpha.assign(static_cast<size_t>(cam.height * cam.width), 0.0f);

    parallel_for(ctx.tiles_y * ctx.tiles_x, [&](int64_t tile) {
        const int64_t ty = tile / ctx.tiles_x;
        const int64_t tx = tile % ctx.tiles_x;
        const auto& list = ctx.tiles[tile];
        const int64_t y0 = ty * kTile, y1 = std::min<int64_t>(cam.height, y0 + kTile);
        const int64_t x0 = tx * kTile, x1 = std::min<int64_t>(cam.width, x0 + kTile);
        for (int64_t y = y0; y < y1; ++y) {
            for (int64_t x = x0; x < x1; ++x) {
                const float px = static_cast<float>(x) + 0.5f;
                const float py = static_cast<float>(y) + 0.5f;
                float T = 1.0f;
                float c0 = 0.0f, c1 = 0.0f, c2 = 0.0f;
                for (const int32_t id : list) {
                    const Projected& pr = ctx.prims[id];
                    const float dx = px - pr.sg.mean_x;
                    const float dy = py - pr.sg.mean_y;
                    const float power =
                        -0.5f * (pr.inv_xx * dx * dx + 2.0f * pr.inv_xy * dx * dy +
                                 pr.inv_yy * dy * dy);
                    const float alpha = std::min(opts.alpha_cap, pr.opacity * std::exp(power));
                    if (alpha < opts.alpha_min) continue;
                    const float w = alpha * T;
                    c0 += pr.color[0] * w;
                    c1 += pr.color[1] * w;
                    c2 += pr.color[2] * w;
                    T *= 1.0f - alpha;
                    if (T < opts.transmittance_min) break;
                }
                out.image.at(y, x, 0) = c0 + opts.background[0] * T;
                out.image.at(y, x, 1) = c1 + opts.background[1] * T;
                out.image.at(y, x, 2) = c2 + opts.background[2] * T;
                out.alpha[y * cam.width + x] = 1.0f - T;
            }
        }
    });
    return out;
}

namespace {

// Screen-space gradient accumulators for one primitive.
struct ScreenGrad {
    double mean_x = 0, mean_y = 0;
    double cov_xx = 0, cov_xy = 0, cov_yy = 0;  // full-matrix convention, xy counted once per side
    double opacity = 0;                          // d/d(sigmoid(logit))
    double color[3] = {0, 0, 0};
};

struct Contrib {
    int32_t id;
    float alpha, gval, dx, dy, t_before;
    bool capped;
};

}  // namespace

GaussianGrads render_backward(const GaussianSet& gs, const Camera& cam, const Image& image_grad,
                              const RenderOptions& opts) {
    if (image_grad.height != cam.height || image_grad.width != cam.width ||
        image_grad.channels != 3)
        throw std::invalid_argument("render_backward: image gradient dims do not match camera");
    const ViewContext ctx = build_context(gs, cam, opts);
    const int64_t n = gs.count;

    // Fixed row-band partials keep the accumulation order independent of the
    // thread count.
    const int64_t bands = ctx.tiles_y;
    std::vector<std::vector<ScreenGrad>> partials(static_cast<size_t>(bands));

    parallel_for(bands, [&](int64_t band) {
        auto& acc = partials[band];
        acc.assign(static_cast<size_t>(n), ScreenGrad{});
        std::vector<Contrib> contribs;
        contribs.reserve(256);
        const int64_t y0 = band * kTile, y1 = std::min<int64_t>(cam.height, y0 + kTile);
        for (int64_t tx = 0; tx < ctx.tiles_x; ++tx) {
            const auto& list = ctx.tiles[band * ctx.tiles_x + tx];
            if (list.empty()) continue;
            const int64_t x0 = tx * kTile, x1 = std::min<int64_t>(cam.width, x0 + kTile);
            for (int64_t y = y0; y < y1; ++y) {
                for (int64_t x = x0; x < x1; ++x) {
                    const float px = static_cast<float>(x) + 0.5f;
                    const float py = static_cast<float>(y) + 0.5f;
                    // Re-run the forward compositing, recording contributions.
                    contribs.clear();
                    float T = 1.0f;
                    for (const int32_t id : list) {
                        const Projected& pr = ctx.prims[id];
                        const float dx = px - pr.sg.mean_x;
                        const float dy = py - pr.sg.mean_y;
                        const float power =
                            -0.5f * (pr.inv_xx * dx * dx + 2.0f * pr.inv_xy * dx * dy +
                                     pr.inv_yy * dy * dy);
                        const float gval = std::exp(power);
                        const float raw = pr.opacity * gval;
                        const float alpha = std::min(opts.alpha_cap, raw);
                        if (alpha < opts.alpha_min) continue;
                        contribs.push_back({id, alpha, gval, dx, dy, T, raw > opts.alpha_cap});
                        T *= 1.0f - alpha;
                        if (T < opts.transmittance_min) break;
                    }
                    if (contribs.empty()) continue;
                    const float g[3] = {image_grad.at(y, x, 0), image_grad.at(y, x, 1),
                                        image_grad.at(y, x, 2)};
                    // Suffix color (everything composited behind i, incl. bg).
                    float suffix[3] = {opts.background[0] * T, opts.background[1] * T,
                                       opts.background[2] * T};
                    for (size_t k = contribs.size(); k-- > 0;) {
                        const Contrib& cb = contribs[k];
                        const Projected& pr = ctx.prims[cb.id];
                        ScreenGrad& sgd = acc[cb.id];
                        const float w = cb.alpha * cb.t_before;
                        float dalpha = 0.0f;
                        for (int c = 0; c < 3; ++c) {
                            sgd.color[c] += static_cast<double>(g[c]) * w;
                            dalpha += g[c] * (pr.color[c] * cb.t_before -
                                              suffix[c] / (1.0f - cb.alpha));
                        }
                        if (!cb.capped) {
                            // alpha = opacity * exp(power)
                            sgd.opacity += static_cast<double>(dalpha) * cb.gval;
                            const float dpower = dalpha * cb.alpha;  // * opacity*gval
                            const float ldx = pr.inv_xx * cb.dx + pr.inv_xy * cb.dy;
                            const float ldy = pr.inv_xy * cb.dx + pr.inv_yy * cb.dy;
                            sgd.mean_x += static_cast<double>(dpower) * ldx;
                            sgd.mean_y += static_cast<double>(dpower) * ldy;
                            // d(power)/d(conic elements), full-matrix convention
                            const double dcxx = -0.5 * cb.dx * cb.dx * dpower;
                            const double dcxy = -0.5 * cb.dx * cb.dy * dpower;  // each of the two
                            const double dcyy = -0.5 * cb.dy * cb.dy * dpower;
                            // dL/dSigma = -Conic * dL/dConic * Conic
                            const double ixx = pr.inv_xx, ixy = pr.inv_xy, iyy = pr.inv_yy;
                            const double m00 = dcxx * ixx + dcxy * ixy;
                            const double m01 = dcxx * ixy + dcxy * iyy;
                            const double m10 = dcxy * ixx + dcyy * ixy;
                            const double m11 = dcxy * ixy + dcyy * iyy;
                            sgd.cov_xx -= ixx * m00 + ixy * m10;
                            sgd.cov_xy -= 2.0 * (ixx * m01 + ixy * m11);  // both off-diag slots
                            sgd.cov_yy -= ixy * m01 + iyy * m11;
                        }
                        for (int c = 0; c < 3; ++c) suffix[c] += pr.color[c] * w;
                    }
                }
            }
        }
    });

    // Reduce bands in fixed order.
    std::vector<ScreenGrad> total(static_cast<size_t>(n));
    for (int64_t b = 0; b < bands; ++b)
        for (int64_t i = 0; i < n; ++i) {
            const ScreenGrad& s = partials[b][i];
            ScreenGrad& t = total[i];
            t.mean_x += s.mean_x;
            t.mean_y += s.mean_y;
            t.cov_xx += s.cov_xx;
            t.cov_xy += s.cov_xy;
            t.cov_yy += s.cov_yy;
            t.opacity += s.opacity;
            for (int c = 0; c < 3; ++c) t.color[c] += s.color[c];
        }

    // Chain screen-space gradients back to primitive attributes.
    GaussianGrads grads = GaussianGrads::zeros(gs);
    const Vec3 cam_center = cam.center();
    const int K = gs.sh_dim();
    parallel_for(n, [&](int64_t i) {
        const Projected& pr = ctx.prims[i];
        if (pr.sg.culled) return;
        const ScreenGrad& sg = total[i];

        // ---- color -> SH coefficients and view direction -> position
        std::array<float, 3> dcolor = {static_cast<float>(sg.color[0]),
                                       static_cast<float>(sg.color[1]),
                                       static_cast<float>(sg.color[2])};
        std::array<float, 3> ddir{};
        sh_to_color_backward({gs.sh_coeffs.data() + i * 3 * K, static_cast<size_t>(3 * K)},
                             pr.view_dir, gs.sh_degree, dcolor, grads.sh_coeffs.data() + i * 3 * K,
                             ddir);
        double dpos[3] = {0, 0, 0};
        {
            const float* pos = gs.positions.data() + i * 3;
            const float rx = pos[0] - cam_center[0], ry = pos[1] - cam_center[1],
                        rz = pos[2] - cam_center[2];
            const float r = std::sqrt(rx * rx + ry * ry + rz * rz);
            const float inv_r = 1.0f / r;
            const float dot = ddir[0] * pr.view_dir[0] + ddir[1] * pr.view_dir[1] +
                              ddir[2] * pr.view_dir[2];
            dpos[0] += inv_r * (ddir[0] - dot * pr.view_dir[0]);
            dpos[1] += inv_r * (ddir[1] - dot * pr.view_dir[1]);
            dpos[2] += inv_r * (ddir[2] - dot * pr.view_dir[2]);
        }

        // ---- opacity logit
        const float o = pr.opacity;
        grads.opacity_logits[i] += static_cast<float>(sg.opacity) * o * (1.0f - o);

        // ---- mean2d -> camera-space position
        const float inv_z = 1.0f / pr.tz;
        const float inv_z2 = inv_z * inv_z;
        double dt[3] = {0, 0, 0};
        dt[0] += sg.mean_x * cam.fx * inv_z;
        dt[1] += sg.mean_y * cam.fy * inv_z;
        dt[2] += -sg.mean_x * cam.fx * pr.tx * inv_z2 - sg.mean_y * cam.fy * pr.ty * inv_z2;

        // ---- cov2d -> 3D covariance, J, and camera-space position
        const Mat3 cov3 = covariance3d(gs.rotations.data() + i * 4, gs.log_scales.data() + i * 3);
        const float j00 = cam.fx * inv_z, j02 = -cam.fx * pr.txc * inv_z2;
        const float j11 = cam.fy * inv_z, j12 = -cam.fy * pr.tyc * inv_z2;
        const Mat3& w = cam.rotation;
        float u[2][3];
        for (int k = 0; k < 3; ++k) {
            u[0][k] = j00 * w[0 + k] + j02 * w[6 + k];
            u[1][k] = j11 * w[3 + k] + j12 * w[6 + k];
        }
        // dC2 as a full symmetric 2x2 (xy split between the two slots).
        const double dc2[2][2] = {{sg.cov_xx, 0.5 * sg.cov_xy}, {0.5 * sg.cov_xy, sg.cov_yy}};
        // dSigma3 = U^T dC2 U (symmetric 3x3)
        double dsig[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                dsig[r][c] = u[0][r] * (dc2[0][0] * u[0][c] + dc2[0][1] * u[1][c]) +
                             u[1][r] * (dc2[1][0] * u[0][c] + dc2[1][1] * u[1][c]);
        // dU = 2 * dC2 * U * Sigma3
        double us[2][3];  // U * Sigma3
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c)
                us[r][c] = u[r][0] * cov3[0 + c] + u[r][1] * cov3[3 + c] + u[r][2] * cov3[6 + c];
        double du[2][3];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c)
                du[r][c] = 2.0 * (dc2[r][0] * us[0][c] + dc2[r][1] * us[1][c]);
        // dJ = dU * W^T; J has four live entries (j00, j02, j11, j12)
        double dj00 = 0, dj02 = 0, dj11 = 0, dj12 = 0;
        for (int k = 0; k < 3; ++k) {
            dj00 += du[0][k] * w[0 + k];
            dj02 += du[0][k] * w[6 + k];
            dj11 += du[1][k] * w[3 + k];
            dj12 += du[1][k] * w[6 + k];
        }
        // j00 = fx/tz, j02 = -fx*txc/tz^2, j11 = fy/tz, j12 = -fy*tyc/tz^2
        dt[2] += -dj00 * cam.fx * inv_z2 - dj11 * cam.fy * inv_z2;
        double dtxc = -dj02 * cam.fx * inv_z2;
        double dtyc = -dj12 * cam.fy * inv_z2;
        dt[2] += dj02 * 2.0 * cam.fx * pr.txc * inv_z2 * inv_z +
                 dj12 * 2.0 * cam.fy * pr.tyc * inv_z2 * inv_z;
        if (pr.clamp_x) {
            // txc = +/-lim * tz on the clamped side
            dt[2] += dtxc * (pr.txc * inv_z);
        } else {
            dt[0] += dtxc;
        }
        if (pr.clamp_y) {
            dt[2] += dtyc * (pr.tyc * inv_z);
        } else {
            dt[1] += dtyc;
        }

        // camera-space -> world-space position: p_cam = W p + t
        dpos[0] += w[0] * dt[0] + w[3] * dt[1] + w[6] * dt[2];
        dpos[1] += w[1] * dt[0] + w[4] * dt[1] + w[7] * dt[2];
        dpos[2] += w[2] * dt[0] + w[5] * dt[1] + w[8] * dt[2];
        for (int d = 0; d < 3; ++d) grads.positions[i * 3 + d] += static_cast<float>(dpos[d]);

        // ---- dSigma3 -> rotation and log-scale
        const float* q = gs.rotations.data() + i * 4;
        const Mat3 rot = quat_to_rotmat(q);
        const float s0 = std::exp(gs.log_scales[i * 3 + 0]);
        const float s1 = std::exp(gs.log_scales[i * 3 + 1]);
        const float s2 = std::exp(gs.log_scales[i * 3 + 2]);
        const float sv[3] = {s0, s1, s2};
        // M = R * diag(s); dM = 2 * dSigma3 * M
        double m[3][3], dm[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m[r][c] = rot[r * 3 + c] * sv[c];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                dm[r][c] = 2.0 * (dsig[r][0] * m[0][c] + dsig[r][1] * m[1][c] + dsig[r][2] * m[2][c]);
        // log-scale: dS_k = sum_r R[r,k] dM[r,k]; dls_k = dS_k * s_k
        for (int k = 0; k < 3; ++k) {
            double ds = 0.0;
            for (int r = 0; r < 3; ++r) ds += rot[r * 3 + k] * dm[r][k];
            grads.log_scales[i * 3 + k] += static_cast<float>(ds * sv[k]);
        }
        // rotation matrix: dR[r,c] = dM[r,c] * s_c
        double dr[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) dr[r][c] = dm[r][c] * sv[c];
        // dR -> unit quaternion
        const float qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        const float qw = q[0] / qn, qx = q[1] / qn, qy = q[2] / qn, qz = q[3] / qn;
        double dqhat[4] = {0, 0, 0, 0};
        // dR/dw, dR/dx, dR/dy, dR/dz contracted with dr
        dqhat[0] = 2.0 * (-qz * dr[0][1] + qy * dr[0][2] + qz * dr[1][0] - qx * dr[1][2] -
                          qy * dr[2][0] + qx * dr[2][1]);
        dqhat[1] = 2.0 * (qy * dr[0][1] + qz * dr[0][2] + qy * dr[1][0] - 2.0 * qx * dr[1][1] -
                          qw * dr[1][2] + qz * dr[2][0] + qw * dr[2][1] - 2.0 * qx * dr[2][2]);
        dqhat[2] = 2.0 * (-2.0 * qy * dr[0][0] + qx * dr[0][1] + qw * dr[0][2] + qx * dr[1][0] +
                          qz * dr[1][2] - qw * dr[2][0] + qz * dr[2][1] - 2.0 * qy * dr[2][2]);
        dqhat[3] = 2.0 * (-2.0 * qz * dr[0][0] - qw * dr[0][1] + qx * dr[0][2] + qw * dr[1][0] -
                          2.0 * qz * dr[1][1] + qy * dr[1][2] + qx * dr[2][0] + qy * dr[2][1]);
        // through normalization: dq = (I - qhat qhat^T)/|q| * dqhat
        const double dot = dqhat[0] * qw + dqhat[1] * qx + dqhat[2] * qy + dqhat[3] * qz;
        const double qhat[4] = {qw, qx, qy, qz};
        for (int k = 0; k < 4; ++k)
            grads.rotations[i * 4 + k] += static_cast<float>((dqhat[k] - dot * qhat[k]) / qn);
    });

    return grads;
}

}  // namespace gsr
