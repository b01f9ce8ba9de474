/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "gsr/ply.hpp"
#include "gsr/rng.hpp"
#include "gsr/sh.hpp"

namespace gsr {

using nlohmann::json;

SceneStyle scene_style_from_string(const std::string& s) {
    if (s == "textured-boxes") return SceneStyle::TexturedBoxes;
    if (s == "random-blobs") return SceneStyle::RandomBlobs;
    throw std::invalid_argument("unknown scene style '" + s +
                                "' (want textured-boxes or random-blobs)");
}

std::string to_string(SceneStyle s) {
    return s == SceneStyle::TexturedBoxes ? "textured-boxes" : "random-blobs";
}

namespace {

constexpr float kInvY00 = 1.0f / 0.28209479177387814f;

// DC coefficient producing `value` before clamping.
float dc_for(float value) { return (value - 0.5f) * kInvY00; }

struct Emitter {
    GaussianSet& gs;
    int64_t next = 0;

    void emit(const Vec3& pos, const Vec3& log_scale, const float* quat, float opacity_logit,
              const Vec3& color, Rng& rng, int sh_degree) {
        const int64_t i = next++;
        const int K = gs.sh_dim();
        for (int d = 0; d < 3; ++d) gs.positions[i * 3 + d] = pos[d];
        for (int d = 0; d < 4; ++d) gs.rotations[i * 4 + d] = quat[d];
        for (int d = 0; d < 3; ++d) gs.log_scales[i * 3 + d] = log_scale[d];
        gs.opacity_logits[i] = opacity_logit;
        for (int c = 0; c < 3; ++c) {
            gs.sh_coeffs[(i * 3 + c) * K] = dc_for(color[c]);
            // Mild view dependence in the linear band.
            for (int m = 1; m < K && sh_degree >= 1; ++m)
                gs.sh_coeffs[(i * 3 + c) * K + m] = 0.04f * rng.normal_f();
        }
    }
};

float checker(float u, float v, float cells) {
    const int iu = static_cast<int>(std::floor(u * cells));
    const int iv = static_cast<int>(std::floor(v * cells));
    return static_cast<float>((iu + iv) & 1);
}

void build_textured_boxes(GaussianSet& gs, Rng& rng, int sh_degree) {
    const int64_t total = gs.count;
    Emitter em{gs};
    const int n_boxes = 3 + static_cast<int>(rng.below(3));

    struct Box {
        Vec3 center, half;
        Vec3 color_a, color_b;
        float cells;
    };
    std::vector<Box> boxes;
    for (int b = 0; b < n_boxes; ++b) {
        Box bx;
        bx.center = {static_cast<float>(rng.uniform(-0.55, 0.55)),
                     static_cast<float>(rng.uniform(-0.25, 0.35)),
                     static_cast<float>(rng.uniform(-0.55, 0.55))};
        bx.half = {static_cast<float>(rng.uniform(0.12, 0.4)),
                   static_cast<float>(rng.uniform(0.12, 0.4)),
                   static_cast<float>(rng.uniform(0.12, 0.4))};
        bx.color_a = {rng.uniform_f() * 0.7f + 0.2f, rng.uniform_f() * 0.7f + 0.2f,
                      rng.uniform_f() * 0.7f + 0.2f};
        bx.color_b = {rng.uniform_f() * 0.7f + 0.1f, rng.uniform_f() * 0.7f + 0.1f,
                      rng.uniform_f() * 0.7f + 0.1f};
        bx.cells = static_cast<float>(rng.range(3, 6));
        boxes.push_back(bx);
    }

    // ~30% ground plane, rest split evenly over boxes.
    const int64_t n_ground = std::max<int64_t>(1, total * 3 / 10);
    const int64_t per_box = (total - n_ground) / n_boxes;
    int64_t emitted_target = n_ground + per_box * n_boxes;
    int64_t extra = total - emitted_target;  // remainder goes to the ground

    const float ground_y = -0.55f;
    const float ground_ext = 1.4f;
    const int64_t n_g = n_ground + extra;
    const float g_spacing = 2.0f * ground_ext / std::sqrt(static_cast<float>(n_g));
    const float identity_q[4] = {1, 0, 0, 0};
    for (int64_t i = 0; i < n_g; ++i) {
        const float u = rng.uniform_f(), v = rng.uniform_f();
        const Vec3 pos = {(u * 2.0f - 1.0f) * ground_ext, ground_y, (v * 2.0f - 1.0f) * ground_ext};
        const float t = checker(u, v, 12.0f);
        const Vec3 col = {0.25f + 0.4f * t, 0.3f + 0.35f * t, 0.25f + 0.3f * t};
        const float s = g_spacing * (0.8f + 0.4f * rng.uniform_f());
        const Vec3 ls = {std::log(s), std::log(s * 0.15f), std::log(s)};
        em.emit(pos, ls, identity_q, 2.0f, col, rng, sh_degree);
    }

    for (int b = 0; b < n_boxes; ++b) {
        const Box& bx = boxes[b];
        // Face areas weight which face each primitive lands on.
        const float ax = bx.half[1] * bx.half[2];
        const float ay = bx.half[0] * bx.half[2];
        const float az = bx.half[0] * bx.half[1];
        const float atot = 2.0f * (ax + ay + az);
        const float area = 4.0f * atot;  // both signs, uv in [-1,1]^2
        const float spacing = std::sqrt(area / static_cast<float>(per_box));
        for (int64_t i = 0; i < per_box; ++i) {
            const float pick = rng.uniform_f() * atot;
            int axis;
            if (pick < ax)
                axis = 0;
            else if (pick < ax + ay)
                axis = 1;
            else
                axis = 2;
            const float sign = rng.uniform_f() < 0.5f ? -1.0f : 1.0f;
            const float u = rng.uniform_f(), v = rng.uniform_f();
            Vec3 pos = bx.center;
            pos[axis] += sign * bx.half[axis];
            const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
            pos[t1] += (u * 2.0f - 1.0f) * bx.half[t1];
            pos[t2] += (v * 2.0f - 1.0f) * bx.half[t2];
            const float t = checker(u, v, bx.cells);
            Vec3 col;
            for (int c = 0; c < 3; ++c) col[c] = bx.color_a[c] * t + bx.color_b[c] * (1.0f - t);
            const float s = spacing * (0.8f + 0.4f * rng.uniform_f());
            Vec3 ls;
            ls[axis] = std::log(s * 0.15f);  // thin along the face normal
            ls[t1] = std::log(s);
            ls[t2] = std::log(s);
            em.emit(pos, ls, identity_q, 2.0f, col, rng, sh_degree);
        }
    }
}

void build_random_blobs(GaussianSet& gs, Rng& rng, int sh_degree) {
    Emitter em{gs};
    for (int64_t i = 0; i < gs.count; ++i) {
        const Vec3 pos = {0.55f * rng.normal_f(), 0.4f * rng.normal_f(), 0.55f * rng.normal_f()};
        float q[4];
        for (auto& c : q) c = rng.normal_f();
        const Vec3 ls = {std::log(0.05f) + 0.4f * rng.normal_f(),
                         std::log(0.05f) + 0.4f * rng.normal_f(),
                         std::log(0.05f) + 0.4f * rng.normal_f()};
        const Vec3 col = {0.15f + 0.7f * rng.uniform_f(), 0.15f + 0.7f * rng.uniform_f(),
                          0.15f + 0.7f * rng.uniform_f()};
        const float logit = 0.5f + 1.0f * rng.normal_f();
        em.emit(pos, ls, q, std::clamp(logit, -2.0f, 2.5f), col, rng, sh_degree);
    }
}

}  // namespace

SceneBundle synth_scene(const SynthConfig& cfg) {
    if (cfg.n_primitives < 1) throw std::invalid_argument("synth_scene: n_primitives must be >= 1");
    SceneBundle bundle;
    Rng rng(derive_seed(cfg.seed, 0xA11CE));

    bundle.gaussians = GaussianSet::empty(cfg.n_primitives, cfg.sh_degree);
    if (cfg.style == SceneStyle::TexturedBoxes)
        build_textured_boxes(bundle.gaussians, rng, cfg.sh_degree);
    else
        build_random_blobs(bundle.gaussians, rng, cfg.sh_degree);

    // Ring of cameras around the scene; test azimuths sit half a step off the
    // train azimuths, so the two sets never coincide.
    Rng cam_rng(derive_seed(cfg.seed, 0xCAFE, 1));
    const float radius = 2.3f;
    const float focal = 0.9f * static_cast<float>(cfg.image_size);
    auto ring_camera = [&](float azimuth, float elevation) {
        const Vec3 eye = {radius * std::cos(azimuth) * std::cos(elevation),
                          radius * std::sin(elevation),
                          radius * std::sin(azimuth) * std::cos(elevation)};
        return Camera::look_at(eye, {0.0f, -0.1f, 0.0f}, {0.0f, 1.0f, 0.0f}, focal,
                               cfg.image_size, cfg.image_size);
    };
    const int n_train = std::max(1, cfg.n_train_views);
    for (int v = 0; v < cfg.n_train_views; ++v) {
        const float az = 2.0f * static_cast<float>(M_PI) * v / n_train;
        const float el = 0.35f + 0.25f * cam_rng.uniform_f();
        bundle.train_views.push_back(ring_camera(az, el));
    }
    for (int v = 0; v < cfg.n_test_views; ++v) {
        const float az = 2.0f * static_cast<float>(M_PI) * (v + 0.5f) / n_train;
        const float el = 0.35f + 0.25f * cam_rng.uniform_f();
        bundle.test_views.push_back(ring_camera(az, el));
    }
    return bundle;
}

namespace {

json camera_to_json(const Camera& c) {
    json j;
    j["rotation"] = c.rotation;
    j["translation"] = c.translation;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    j["near"] = c.near_clip;
    j["far"] = c.far_clip;
    return j;
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.rotation = j.at("rotation").get<Mat3>();
    c.translation = j.at("translation").get<Vec3>();
    c.fx = j.at("fx").get<float>();
    c.fy = j.at("fy").get<float>();
    c.cx = j.at("cx").get<float>();
    c.cy = j.at("cy").get<float>();
    c.width = j.at("width").get<int64_t>();
    c.height = j.at("height").get<int64_t>();
    c.near_clip = j.at("near").get<float>();
    c.far_clip = j.at("far").get<float>();
    c.validate();
    return c;
}

}  // namespace

void save_bundle(const SceneBundle& bundle, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_ply(bundle.gaussians, dir + "/scene.ply");
    json j;
    j["ply"] = "scene.ply";
    j["background"] = bundle.background;
    j["train_views"] = json::array();
    for (const auto& c : bundle.train_views) j["train_views"].push_back(camera_to_json(c));
    j["test_views"] = json::array();
    for (const auto& c : bundle.test_views) j["test_views"].push_back(camera_to_json(c));
    std::ofstream f(dir + "/bundle.json");
    if (!f) throw std::runtime_error("cannot write " + dir + "/bundle.json");
    f << j.dump(2) << "\n";
}

SceneBundle load_bundle(const std::string& dir) {
    std::ifstream f(dir + "/bundle.json");
    if (!f) throw std::runtime_error("cannot open " + dir + "/bundle.json");
    json j;
    f >> j;
    SceneBundle bundle;
    bundle.gaussians = load_ply(dir + "/" + j.at("ply").get<std::string>());
    bundle.background = j.at("background").get<Vec3>();
    for (const auto& cj : j.at("train_views")) bundle.train_views.push_back(camera_from_json(cj));
    for (const auto& cj : j.at("test_views")) bundle.test_views.push_back(camera_from_json(cj));
    return bundle;
}

}  // namespace gsr
