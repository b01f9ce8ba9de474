/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsr/gaussian.hpp"

namespace gsr {

enum class SceneStyle { TexturedBoxes, RandomBlobs };

SceneStyle scene_style_from_string(const std::string& s);
std::string to_string(SceneStyle s);

struct SceneBundle {
    GaussianSet gaussians;
    std::vector<Camera> train_views;
    std::vector<Camera> test_views;
    Vec3 background{0.0f, 0.0f, 0.0f};
};

struct SynthConfig {
    uint64_t seed = 1;
    int64_t n_primitives = 4096;
    int n_train_views = 8;
    int n_test_views = 2;
    SceneStyle style = SceneStyle::TexturedBoxes;
    int64_t image_size = 64;
    int sh_degree = 1;
};

// Deterministic procedural scene: textured boxes over a checkered ground
// plane, or a cloud of random anisotropic blobs. Cameras sit on a ring
// around the scene (test azimuths interleaved with train azimuths, so the
// sets are disjoint).
SceneBundle synth_scene(const SynthConfig& cfg);

// Bundle directory: <dir>/scene.ply plus <dir>/bundle.json with cameras,
// background, and the PLY path.
void save_bundle(const SceneBundle& bundle, const std::string& dir);
SceneBundle load_bundle(const std::string& dir);

}  // namespace gsr
