/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/evaluate.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/metrics.hpp"
#include "gsr/raster.hpp"

namespace gsr {

using nlohmann::json;

namespace {

json cell_json(const RDCell& c) {
    json j;
    j["scene"] = c.scene_id;
    j["level"] = c.level;
    j["bytes"] = c.bytes;
    j["psnr_degraded"] = c.psnr_degraded;
    j["ssim_degraded"] = c.ssim_degraded;
    j["perc_degraded"] = c.perc_degraded;
    if (c.psnr_restored) {
        j["psnr_restored"] = *c.psnr_restored;
        j["ssim_restored"] = *c.ssim_restored;
        j["perc_restored"] = *c.perc_restored;
    }
    return j;
}

}  // namespace

std::string RDReport::to_json() const {
    json j;
    j["has_restored"] = has_restored;
    j["cells"] = json::array();
    for (const auto& c : cells) j["cells"].push_back(cell_json(c));
    j["aggregates"] = json::array();
    for (const auto& a : aggregates) {
        json aj;
        aj["level"] = a.level;
        aj["mean_bytes"] = a.mean_bytes;
        aj["psnr_degraded"] = a.psnr_degraded;
        aj["ssim_degraded"] = a.ssim_degraded;
        aj["perc_degraded"] = a.perc_degraded;
        if (a.psnr_restored) {
            aj["psnr_restored"] = *a.psnr_restored;
            aj["ssim_restored"] = *a.ssim_restored;
            aj["perc_restored"] = *a.perc_restored;
        }
        j["aggregates"].push_back(aj);
    }
    return j.dump(2);
}

RDReport RDReport::from_json(const std::string& text) {
    const json j = json::parse(text);
    RDReport r;
    r.has_restored = j.at("has_restored").get<bool>();
    for (const auto& cj : j.at("cells")) {
        RDCell c;
        c.scene_id = cj.at("scene").get<int>();
        c.level = cj.at("level").get<int>();
        c.bytes = cj.at("bytes").get<uint64_t>();
        c.psnr_degraded = cj.at("psnr_degraded").get<double>();
        c.ssim_degraded = cj.at("ssim_degraded").get<double>();
        c.perc_degraded = cj.at("perc_degraded").get<double>();
        if (cj.contains("psnr_restored")) {
            c.psnr_restored = cj.at("psnr_restored").get<double>();
            c.ssim_restored = cj.at("ssim_restored").get<double>();
            c.perc_restored = cj.at("perc_restored").get<double>();
        }
        r.cells.push_back(c);
    }
    for (const auto& aj : j.at("aggregates")) {
        RDLevelAggregate a;
        a.level = aj.at("level").get<int>();
        a.mean_bytes = aj.at("mean_bytes").get<double>();
        a.psnr_degraded = aj.at("psnr_degraded").get<double>();
        a.ssim_degraded = aj.at("ssim_degraded").get<double>();
        a.perc_degraded = aj.at("perc_degraded").get<double>();
        if (aj.contains("psnr_restored")) {
            a.psnr_restored = aj.at("psnr_restored").get<double>();
            a.ssim_restored = aj.at("ssim_restored").get<double>();
            a.perc_restored = aj.at("perc_restored").get<double>();
        }
        r.aggregates.push_back(a);
    }
    return r;
}

std::string RDReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(7) << "level" << std::right << std::setw(12) << "mean-bytes"
       << std::setw(12) << "psnr-deg" << std::setw(12) << "ssim-deg" << std::setw(12)
       << "perc-proxy";
    if (has_restored)
        os << std::setw(12) << "psnr-rest" << std::setw(12) << "ssim-rest" << std::setw(14)
           << "perc-proxy-r";
    os << "\n";
    for (const auto& a : aggregates) {
        os << std::left << std::setw(7) << a.level << std::right << std::fixed
           << std::setprecision(1) << std::setw(12) << a.mean_bytes << std::setprecision(3)
           << std::setw(12) << a.psnr_degraded << std::setw(12) << a.ssim_degraded
           << std::setprecision(5) << std::setw(12) << a.perc_degraded;
        if (a.psnr_restored)
            os << std::setprecision(3) << std::setw(12) << *a.psnr_restored << std::setw(12)
               << *a.ssim_restored << std::setprecision(5) << std::setw(14) << *a.perc_restored;
        os << "\n";
    }
    return os.str();
}

std::string RDReport::to_csv() const {
    std::ostringstream os;
    os << "scene,level,bytes,psnr_degraded,ssim_degraded,perc_degraded";
    if (has_restored) os << ",psnr_restored,ssim_restored,perc_restored";
    os << "\n";
    for (const auto& c : cells) {
        os << c.scene_id << "," << c.level << "," << c.bytes << "," << c.psnr_degraded << ","
           << c.ssim_degraded << "," << c.perc_degraded;
        if (has_restored)
            os << "," << (c.psnr_restored ? *c.psnr_restored : 0.0) << ","
               << (c.ssim_restored ? *c.ssim_restored : 0.0) << ","
               << (c.perc_restored ? *c.perc_restored : 0.0);
        os << "\n";
    }
    return os.str();
}

RDReport rd_evaluate(std::span<const SceneBundle> scenes, const DatasetManifest& manifest,
                     const RestorerState* restorer, const EvalOptions& opts) {
    if (static_cast<int>(scenes.size()) != manifest.n_scenes)
        throw InputError("rd_evaluate: scene count does not match the manifest");
    for (const auto& s : scenes)
        if (s.test_views.empty()) throw InputError("rd_evaluate: scene without test views");

    const PerceptualMetric perc;
    RDReport report;
    report.has_restored = restorer != nullptr;

    for (int si = 0; si < manifest.n_scenes; ++si) {
        const SceneBundle& scene = scenes[static_cast<size_t>(si)];
        RenderOptions ropts;
        ropts.background = scene.background;
        std::vector<Image> clean;
        for (const auto& cam : scene.test_views)
            clean.push_back(render(scene.gaussians, cam, ropts).image);

        for (int level = 0; level < manifest.n_levels; ++level) {
            const auto coded = CodedScene::load(
                manifest.root + "/" + manifest.coded_paths[static_cast<size_t>(si)][level]);
            const GaussianSet decoded = decompress(coded);
            RDCell cell;
            cell.scene_id = si;
            cell.level = level;
            cell.bytes = manifest.coded_bytes[static_cast<size_t>(si)][level];

            double pd = 0, sd = 0, dd = 0, pr = 0, sr = 0, dr = 0;
            for (size_t v = 0; v < scene.test_views.size(); ++v) {
                const Image degraded = render(decoded, scene.test_views[v], ropts).image;
                pd += psnr(degraded, clean[v]);
                sd += ssim(degraded, clean[v]);
                dd += perc.distance(degraded, clean[v]);
                if (restorer) {
                    Rng rng(derive_seed(opts.seed, 0xE7A1, static_cast<uint64_t>(si),
                                        static_cast<uint64_t>(level * 1000 + v)));
                    const Image restored =
                        restorer->restore_image(degraded, manifest.condition_for(si),
                                                opts.cfg_scale, rng, opts.eps_scale,
                                                opts.t0_override);
                    pr += psnr(restored, clean[v]);
                    sr += ssim(restored, clean[v]);
                    dr += perc.distance(restored, clean[v]);
                }
            }
            const double nv = static_cast<double>(scene.test_views.size());
            cell.psnr_degraded = pd / nv;
            cell.ssim_degraded = sd / nv;
            cell.perc_degraded = dd / nv;
            if (restorer) {
                cell.psnr_restored = pr / nv;
                cell.ssim_restored = sr / nv;
                cell.perc_restored = dr / nv;
            }
            report.cells.push_back(cell);
        }
    }

    for (int level = 0; level < manifest.n_levels; ++level) {
        RDLevelAggregate agg;
        agg.level = level;
        double n = 0, b = 0, pd = 0, sd = 0, dd = 0, pr = 0, sr = 0, dr = 0;
        for (const auto& c : report.cells) {
            if (c.level != level) continue;
            n += 1.0;
            b += static_cast<double>(c.bytes);
            pd += c.psnr_degraded;
            sd += c.ssim_degraded;
            dd += c.perc_degraded;
            if (c.psnr_restored) {
                pr += *c.psnr_restored;
                sr += *c.ssim_restored;
                dr += *c.perc_restored;
            }
        }
        agg.mean_bytes = b / n;
        agg.psnr_degraded = pd / n;
        agg.ssim_degraded = sd / n;
        agg.perc_degraded = dd / n;
        if (report.has_restored) {
            agg.psnr_restored = pr / n;
            agg.ssim_restored = sr / n;
            agg.perc_restored = dr / n;
        }
        report.aggregates.push_back(agg);
    }
    return report;
}

}  // namespace gsr
