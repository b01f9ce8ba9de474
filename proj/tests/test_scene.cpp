/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gsr/metrics.hpp"
#include "gsr/ply.hpp"
#include "gsr/raster.hpp"
#include "gsr/rng.hpp"
#include "gsr/scene.hpp"
#include "gsr/sh.hpp"
#include "gsr/wire.hpp"
#include "testutil.hpp"

using namespace gsr;

namespace {

GaussianSet random_set(int64_t n, int deg, uint64_t seed) {
    Rng rng(seed);
    GaussianSet gs = GaussianSet::empty(n, deg);
    for (auto& v : gs.positions) v = rng.normal_f();
    for (auto& v : gs.rotations) v = rng.normal_f();
    for (auto& v : gs.log_scales) v = -2.0f + 0.5f * rng.normal_f();
    for (auto& v : gs.opacity_logits) v = rng.normal_f();
    for (auto& v : gs.sh_coeffs) v = 0.3f * rng.normal_f();
    return gs;
}

}  // namespace

TEST_CASE("sh degree 0 is the constant band") {
    const float c = 0.8f;
    std::vector<float> coeffs = {c, 0.0f, 0.0f};  // deg 0: one coeff per channel
    coeffs = {c, -0.2f, 0.4f};
    const auto rgb = sh_to_color(coeffs, {0.0f, 0.0f, 1.0f}, 0);
    CHECK(rgb[0] == doctest::Approx(0.5f + 0.28209479f * c));
    CHECK(rgb[1] == doctest::Approx(0.5f + 0.28209479f * -0.2f));
    const auto rgb2 = sh_to_color(coeffs, {1.0f, 0.0f, 0.0f}, 0);
    CHECK(rgb[0] == rgb2[0]);  // direction-independent at degree 0
}

TEST_CASE("sh zero coefficients give mid gray") {
    std::vector<float> coeffs(3 * 4, 0.0f);
    const auto rgb = sh_to_color(coeffs, {0.0f, 1.0f, 0.0f}, 1);
    CHECK(rgb[0] == 0.5f);
    CHECK(rgb[1] == 0.5f);
    CHECK(rgb[2] == 0.5f);
}

TEST_CASE("sh degree-1 band is odd under direction flip") {
    Rng rng(5);
    std::vector<float> coeffs(3 * 4);
    for (size_t i = 0; i < coeffs.size(); ++i)
        coeffs[i] = (i % 4 == 0) ? 0.0f : 0.2f * rng.normal_f();  // no DC
    const std::array<float, 3> d = {0.48f, 0.6f, 0.64f};
    const std::array<float, 3> dm = {-0.48f, -0.6f, -0.64f};
    float bp[4], bm[4];
    sh_basis(1, d, bp);
    sh_basis(1, dm, bm);
    for (int m = 1; m < 4; ++m) CHECK(bp[m] == doctest::Approx(-bm[m]));
    // linear terms flip sign around the 0.5 offset
    const auto cp = sh_to_color(coeffs, d, 1);
    const auto cm = sh_to_color(coeffs, dm, 1);
    for (int ch = 0; ch < 3; ++ch)
        CHECK(cp[ch] - 0.5f == doctest::Approx(-(cm[ch] - 0.5f)).epsilon(1e-4));
}

TEST_CASE("sh rejects non-unit directions and over-degree queries") {
    std::vector<float> coeffs(3 * 16, 0.0f);
    CHECK_THROWS_AS(sh_to_color(coeffs, {1.0f, 1.0f, 0.0f}, 2), std::invalid_argument);
    std::vector<float> small(3 * 4, 0.0f);
    CHECK_THROWS_AS(sh_to_color(small, {0.0f, 0.0f, 1.0f}, 3), std::invalid_argument);
}

TEST_CASE("sh basis gradients match finite differences") {
    Rng rng(17);
    for (int deg = 1; deg <= 3; ++deg) {
        std::array<float, 3> d = {rng.normal_f(), rng.normal_f(), rng.normal_f()};
        const float n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        for (auto& v : d) v /= n;
        const int k = sh_coeff_count(deg);
        float gx[16], gy[16], gz[16];
        sh_basis_grad(deg, d, gx, gy, gz);
        // central differences on the (unnormalized) polynomial basis
        const float h = 1e-3f;
        for (int axis = 0; axis < 3; ++axis) {
            auto dp = d, dm = d;
            dp[axis] += h;
            dm[axis] -= h;
            float bp[16], bm[16];
            sh_basis(deg, dp, bp);
            sh_basis(deg, dm, bm);
            for (int i = 0; i < k; ++i) {
                const float fd = (bp[i] - bm[i]) / (2.0f * h);
                const float a = axis == 0 ? gx[i] : (axis == 1 ? gy[i] : gz[i]);
                CHECK(a == doctest::Approx(fd).epsilon(1e-2).scale(1.0));
            }
        }
    }
}

TEST_CASE("covariance eigenstructure matches squared scales") {
    Rng rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        float q[4], ls[3];
        for (auto& v : q) v = rng.normal_f();
        for (auto& v : ls) v = -1.5f + 0.6f * rng.normal_f();
        const Mat3 cov = covariance3d(q, ls);
        const Mat3 rot = quat_to_rotmat(q);
        // columns of R are eigenvectors with eigenvalue exp(ls)^2
        for (int k = 0; k < 3; ++k) {
            const float lambda = std::exp(2.0f * ls[k]);
            for (int r = 0; r < 3; ++r) {
                const float got = cov[r * 3 + 0] * rot[0 * 3 + k] + cov[r * 3 + 1] * rot[1 * 3 + k] +
                                  cov[r * 3 + 2] * rot[2 * 3 + k];
                CHECK(got == doctest::Approx(lambda * rot[r * 3 + k]).epsilon(1e-3).scale(1e-4));
            }
        }
        // symmetry
        CHECK(cov[1] == doctest::Approx(cov[3]));
        CHECK(cov[2] == doctest::Approx(cov[6]));
        CHECK(cov[5] == doctest::Approx(cov[7]));
    }
}

TEST_CASE("on-axis projection matches the closed form") {
    GaussianSet gs = GaussianSet::empty(1, 0);
    const float s = 0.05f, d = 3.0f;
    gs.positions = {0.0f, 0.0f, d};
    gs.log_scales = {std::log(s), std::log(s), std::log(s)};
    Camera cam;
    cam.fx = cam.fy = 100.0f;
    cam.cx = 32.0f;
    cam.cy = 32.0f;
    cam.width = cam.height = 64;
    const auto sg = project_gaussian(gs, 0, cam);
    REQUIRE(!sg.culled);
    CHECK(sg.mean_x == doctest::Approx(32.0f));
    CHECK(sg.mean_y == doctest::Approx(32.0f));
    const float want = (100.0f * s / d) * (100.0f * s / d) + 0.3f;
    CHECK(sg.cov_xx == doctest::Approx(want).epsilon(1e-4));
    CHECK(sg.cov_yy == doctest::Approx(want).epsilon(1e-4));
    CHECK(sg.cov_xy == doctest::Approx(0.0f).scale(1.0));
    CHECK(sg.depth == doctest::Approx(d));
}

TEST_CASE("screen covariance shrinks with depth") {
    GaussianSet gs = random_set(1, 0, 31);
    gs.positions = {0.1f, -0.05f, 2.0f};
    Camera cam;
    cam.cx = cam.cy = 32.0f;
    cam.width = cam.height = 64;
    const auto near_sg = project_gaussian(gs, 0, cam);
    gs.positions[2] = 6.0f;
    const auto far_sg = project_gaussian(gs, 0, cam);
    CHECK(far_sg.cov_xx < near_sg.cov_xx);
    CHECK(far_sg.cov_yy < near_sg.cov_yy);
}

TEST_CASE("primitives behind the near plane are culled, not errors") {
    GaussianSet gs = GaussianSet::empty(1, 0);
    gs.positions = {0.0f, 0.0f, -1.0f};
    Camera cam;
    const auto sg = project_gaussian(gs, 0, cam);
    CHECK(sg.culled);
}

TEST_CASE("projected covariance is symmetric positive definite") {
    Rng rng(37);
    GaussianSet gs = random_set(200, 0, 41);
    Camera cam = Camera::look_at({0, 0, -3}, {0, 0, 0}, {0, 1, 0}, 80.0f, 64, 64);
    int checked = 0;
    for (int64_t i = 0; i < gs.count; ++i) {
        const auto sg = project_gaussian(gs, i, cam);
        if (sg.culled) continue;
        ++checked;
        const float det = sg.cov_xx * sg.cov_yy - sg.cov_xy * sg.cov_xy;
        CHECK(det > 0.0f);
        CHECK(sg.cov_xx > 0.0f);
        CHECK(sg.cov_yy > 0.0f);
    }
    CHECK(checked > 50);
}

TEST_CASE("ply roundtrip is bit-exact") {
    test::TempDir tmp("ply");
    for (int rep = 0; rep < 20; ++rep) {
        const int deg = rep % 4;
        GaussianSet gs = random_set(100, deg, 1000 + rep);
        const std::string path = tmp.str() + "/set.ply";
        save_ply(gs, path);
        const GaussianSet back = load_ply(path);
        REQUIRE(back.count == gs.count);
        CHECK(back.sh_degree == gs.sh_degree);
        CHECK(back.positions == gs.positions);
        CHECK(back.rotations == gs.rotations);
        CHECK(back.log_scales == gs.log_scales);
        CHECK(back.opacity_logits == gs.opacity_logits);
        CHECK(back.sh_coeffs == gs.sh_coeffs);
    }
}

TEST_CASE("ply infers sh degree 3 from 45 rest coefficients") {
    test::TempDir tmp("plydeg");
    GaussianSet gs = random_set(5, 3, 7);
    save_ply(gs, tmp.str() + "/d3.ply");
    const GaussianSet back = load_ply(tmp.str() + "/d3.ply");
    CHECK(back.sh_degree == 3);
}

TEST_CASE("ply errors: truncated payload and missing property") {
    test::TempDir tmp("plyerr");
    GaussianSet gs = random_set(10, 1, 9);
    const std::string path = tmp.str() + "/t.ply";
    save_ply(gs, path);
    auto bytes = read_file_bytes(path);
    // truncate
    {
        std::ofstream f(tmp.str() + "/trunc.ply", std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size() - 13));
    }
    CHECK_THROWS_WITH_AS(load_ply(tmp.str() + "/trunc.ply"), doctest::Contains("truncated"),
                         std::runtime_error);
    // missing property: drop opacity from the header
    std::string text(bytes.begin(), bytes.end());
    const auto pos = text.find("property float opacity\n");
    REQUIRE(pos != std::string::npos);
    std::string broken = text.substr(0, pos) + text.substr(pos + 23);
    {
        std::ofstream f(tmp.str() + "/miss.ply", std::ios::binary);
        f.write(broken.data(), static_cast<std::streamsize>(broken.size()));
    }
    CHECK_THROWS_WITH_AS(load_ply(tmp.str() + "/miss.ply"), doctest::Contains("opacity"),
                         std::runtime_error);
}

TEST_CASE("synth scenes are deterministic per seed") {
    SynthConfig cfg;
    cfg.seed = 77;
    cfg.n_primitives = 500;
    cfg.n_train_views = 4;
    cfg.n_test_views = 2;
    const SceneBundle a = synth_scene(cfg);
    const SceneBundle b = synth_scene(cfg);
    CHECK(a.gaussians.positions == b.gaussians.positions);
    CHECK(a.gaussians.sh_coeffs == b.gaussians.sh_coeffs);
    REQUIRE(a.train_views.size() == 4);
    REQUIRE(a.test_views.size() == 2);
    CHECK(a.train_views[0].rotation == b.train_views[0].rotation);
    cfg.seed = 78;
    const SceneBundle c = synth_scene(cfg);
    CHECK(a.gaussians.positions != c.gaussians.positions);
}

TEST_CASE("empty test set is a valid bundle") {
    SynthConfig cfg;
    cfg.n_primitives = 50;
    cfg.n_test_views = 0;
    const SceneBundle b = synth_scene(cfg);
    CHECK(b.test_views.empty());
    CHECK(b.train_views.size() == 8);
}

TEST_CASE("textured-boxes renders are non-constant") {
    SynthConfig cfg;
    cfg.seed = 3;
    cfg.n_primitives = 2000;
    const SceneBundle b = synth_scene(cfg);
    REQUIRE(b.gaussians.count == 2000);
    RenderOptions opts;
    opts.background = b.background;
    const RenderOutput out = render(b.gaussians, b.train_views[0], opts);
    double mean = 0.0;
    for (const float v : out.image.data) mean += v;
    mean /= static_cast<double>(out.image.data.size());
    double var = 0.0;
    for (const float v : out.image.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.image.data.size());
    CHECK(std::sqrt(var) > 0.01);
}

TEST_CASE("bundle save/load roundtrip") {
    test::TempDir tmp("bundle");
    SynthConfig cfg;
    cfg.n_primitives = 100;
    const SceneBundle b = synth_scene(cfg);
    save_bundle(b, tmp.str() + "/scene");
    const SceneBundle back = load_bundle(tmp.str() + "/scene");
    CHECK(back.gaussians.positions == b.gaussians.positions);
    CHECK(back.train_views.size() == b.train_views.size());
    CHECK(back.test_views.size() == b.test_views.size());
    CHECK(back.train_views[2].rotation == b.train_views[2].rotation);
    CHECK(back.train_views[2].fx == b.train_views[2].fx);
}
