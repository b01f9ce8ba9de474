/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gsr/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/raster.hpp"
#include "gsr/wire.hpp"

namespace gsr {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetManifest::save(const std::string& path) const {
    json j;
    j["seed"] = seed;
    j["condition_vocab"] = condition_vocab;
    j["n_scenes"] = n_scenes;
    j["n_views"] = n_views;
    j["n_levels"] = n_levels;
    j["params"] = json::parse(params_json);
    j["scene_sources"] = scene_sources;
    j["coded_paths"] = coded_paths;
    j["coded_bytes"] = coded_bytes;
    j["pairs"] = json::array();
    for (const auto& p : pairs) {
        j["pairs"].push_back({{"scene", p.scene_id},
                              {"view", p.view_id},
                              {"level", p.level},
                              {"clean", p.clean_path},
                              {"degraded", p.degraded_path},
                              {"clean_crc", p.clean_crc},
                              {"degraded_crc", p.degraded_crc}});
    }
    std::ofstream f(path);
    if (!f) throw InputError("cannot write manifest " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path, bool verify) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open manifest " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw InputError(path + ": invalid manifest JSON: " + e.what());
    }
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    m.seed = j.at("seed").get<uint64_t>();
    m.condition_vocab = j.at("condition_vocab").get<int>();
    m.n_scenes = j.at("n_scenes").get<int>();
    m.n_views = j.at("n_views").get<int>();
    m.n_levels = j.at("n_levels").get<int>();
    m.params_json = j.at("params").dump();
    m.scene_sources = j.at("scene_sources").get<std::vector<std::string>>();
    m.coded_paths = j.at("coded_paths").get<std::vector<std::vector<std::string>>>();
    m.coded_bytes = j.at("coded_bytes").get<std::vector<std::vector<uint64_t>>>();
    for (const auto& pj : j.at("pairs")) {
        PairFiles p;
        p.scene_id = pj.at("scene").get<int>();
        p.view_id = pj.at("view").get<int>();
        p.level = pj.at("level").get<int>();
        p.clean_path = pj.at("clean").get<std::string>();
        p.degraded_path = pj.at("degraded").get<std::string>();
        p.clean_crc = pj.at("clean_crc").get<uint32_t>();
        p.degraded_crc = pj.at("degraded_crc").get<uint32_t>();
        m.pairs.push_back(std::move(p));
    }
    if (verify) {
        auto check = [&](const std::string& rel, uint32_t want) {
            const std::string full = m.root + "/" + rel;
            if (!fs::exists(full)) throw InputError("manifest entry missing on disk: " + full);
            const auto bytes = read_file_bytes(full);
            if (crc32(bytes) != want)
                throw InputError("manifest checksum mismatch for " + full);
        };
        for (const auto& p : m.pairs) {
            check(p.clean_path, p.clean_crc);
            check(p.degraded_path, p.degraded_crc);
        }
        for (const auto& level_paths : m.coded_paths)
            for (const auto& cp : level_paths)
                if (!fs::exists(m.root + "/" + cp))
                    throw InputError("manifest coded scene missing on disk: " + m.root + "/" + cp);
    }
    return m;
}

DatasetManifest synthesize_dataset(std::span<const SceneBundle> scenes,
                                   std::span<const std::string> scene_sources,
                                   const DatasetConfig& cfg, const std::string& out_dir) {
    if (scenes.empty()) throw InputError("synthesize_dataset: no scenes");
    for (const auto& s : scenes)
        if (s.train_views.empty()) throw InputError("synthesize_dataset: scene without train views");

    DatasetManifest m;
    m.root = out_dir;
    m.seed = cfg.seed;
    m.condition_vocab = cfg.condition_vocab;
    m.n_scenes = static_cast<int>(scenes.size());
    m.n_views = static_cast<int>(scenes[0].train_views.size());
    m.n_levels = cfg.levels;
    m.params_json = cfg.params_json;
    m.scene_sources.assign(scene_sources.begin(), scene_sources.end());

    std::vector<std::string> written;
    auto persist = [&](const std::string& rel, const std::function<void(const std::string&)>& w) {
        const std::string full = out_dir + "/" + rel;
        fs::create_directories(fs::path(full).parent_path());
        w(full);
        written.push_back(full);
        return rel;
    };

    try {
        for (size_t si = 0; si < scenes.size(); ++si) {
            const SceneBundle& scene = scenes[si];
            RenderOptions ropts;
            ropts.background = scene.background;

            // Clean renders of every train view (shared across levels).
            std::vector<Image> clean;
            clean.reserve(scene.train_views.size());
            for (const auto& cam : scene.train_views)
                clean.push_back(render(scene.gaussians, cam, ropts).image);

            const LevelSchedule sched =
                level_schedule(scene.gaussians.count, cfg.c_min, cfg.levels);
            CodecConfig ccfg = cfg.codec;
            ccfg.seed = derive_seed(cfg.seed, 0xDA7A, si);
            const auto coded =
                compress_levels(scene.gaussians, sched, scene.train_views, clean, ccfg);

            m.coded_paths.emplace_back();
            m.coded_bytes.emplace_back();
            for (int level = 0; level < cfg.levels; ++level) {
                const std::string rel = "scene_" + std::to_string(si) + "/level_" +
                                        std::to_string(level) + "/coded.nifi";
                persist(rel, [&](const std::string& p) { coded[level].save(p); });
                m.coded_paths.back().push_back(rel);
                m.coded_bytes.back().push_back(coded[level].byte_size());

                const GaussianSet decoded = decompress(coded[level]);
                for (size_t v = 0; v < scene.train_views.size(); ++v) {
                    const Image degraded = render(decoded, scene.train_views[v], ropts).image;
                    PairFiles pf;
                    pf.scene_id = static_cast<int>(si);
                    pf.view_id = static_cast<int>(v);
                    pf.level = level;
                    const std::string base = "scene_" + std::to_string(si) + "/level_" +
                                             std::to_string(level) + "/view_" + std::to_string(v);
                    pf.clean_path =
                        persist(base + ".clean.f32img",
                                [&](const std::string& p) { save_f32img(clean[v], p); });
                    pf.degraded_path =
                        persist(base + ".degraded.f32img",
                                [&](const std::string& p) { save_f32img(degraded, p); });
                    pf.clean_crc = crc32(read_file_bytes(out_dir + "/" + pf.clean_path));
                    pf.degraded_crc = crc32(read_file_bytes(out_dir + "/" + pf.degraded_path));
                    m.pairs.push_back(std::move(pf));
                }
            }
        }
        m.save(out_dir + "/manifest.json");
    } catch (...) {
        // Remove partial outputs before propagating.
        for (const auto& f : written) {
            std::error_code ec;
            fs::remove(f, ec);
        }
        throw;
    }
    return m;
}

LoadedDataset::LoadedDataset(const DatasetManifest& manifest) : manifest_(manifest) {
    by_scene_.resize(static_cast<size_t>(manifest.n_scenes));
    for (const auto& pf : manifest_.pairs) {
        TrainingPair tp;
        tp.scene_id = pf.scene_id;
        tp.view_id = pf.view_id;
        tp.level = pf.level;
        tp.condition = manifest_.condition_for(pf.scene_id);
        tp.clean = load_f32img(manifest_.root + "/" + pf.clean_path);
        tp.degraded = load_f32img(manifest_.root + "/" + pf.degraded_path);
        by_scene_[static_cast<size_t>(pf.scene_id)].push_back(pairs_.size());
        pairs_.push_back(std::move(tp));
    }
}

std::vector<TrainingPair> LoadedDataset::sample_batch(int batch_size, Rng& rng) const {
    const int n_scenes = manifest_.n_scenes;
    if (batch_size > n_scenes)
        throw InputError("sample_batch: batch size " + std::to_string(batch_size) +
                         " exceeds scene count " + std::to_string(n_scenes));
    // Partial Fisher-Yates for distinct scenes.
    std::vector<int> ids(static_cast<size_t>(n_scenes));
    for (int i = 0; i < n_scenes; ++i) ids[static_cast<size_t>(i)] = i;
    std::vector<TrainingPair> batch;
    for (int b = 0; b < batch_size; ++b) {
        const int j = b + static_cast<int>(rng.below(static_cast<uint64_t>(n_scenes - b)));
        std::swap(ids[b], ids[j]);
        const auto& pool = by_scene_[static_cast<size_t>(ids[b])];
        batch.push_back(pairs_[pool[rng.below(pool.size())]]);
    }
    return batch;
}

std::vector<const TrainingPair*> LoadedDataset::pairs_of_scene(int scene_id) const {
    std::vector<const TrainingPair*> out;
    for (const size_t idx : by_scene_.at(static_cast<size_t>(scene_id))) out.push_back(&pairs_[idx]);
    return out;
}

}  // namespace gsr
