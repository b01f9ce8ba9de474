/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsr/codec.hpp"
#include "gsr/image.hpp"
#include "gsr/rng.hpp"
#include "gsr/scene.hpp"

namespace gsr {

struct TrainingPair {
    Image degraded;  // render of the decompressed scene
    Image clean;     // render of the original scene, same camera
    int scene_id = 0;
    int view_id = 0;
    int level = 0;
    int condition = 0;  // scene class tag for classifier-free guidance
};

struct PairFiles {
    int scene_id, view_id, level;
    std::string clean_path, degraded_path;  // relative to the dataset root
    uint32_t clean_crc, degraded_crc;
};

struct DatasetManifest {
    std::string root;
    uint64_t seed = 0;
    int condition_vocab = 16;
    int n_scenes = 0, n_views = 0, n_levels = 0;
    std::string params_json;  // generation parameter snapshot
    std::vector<PairFiles> pairs;
    // Per scene: coded scene files and their byte sizes, one per level.
    std::vector<std::vector<std::string>> coded_paths;
    std::vector<std::vector<uint64_t>> coded_bytes;
    std::vector<std::string> scene_sources;  // bundle dirs

    void save(const std::string& path) const;
    // verify=true re-checks that every indexed file exists and its payload
    // CRC matches the manifest.
    static DatasetManifest load(const std::string& path, bool verify = true);

    int condition_for(int scene_id) const {
        return static_cast<int>(derive_seed(0x5CEBE, static_cast<uint64_t>(scene_id)) %
                                static_cast<uint64_t>(condition_vocab));
    }
};

struct DatasetConfig {
    int64_t c_min = 4096;
    int levels = 3;
    CodecConfig codec;
    uint64_t seed = 1;
    int condition_vocab = 16;
    std::string params_json = "{}";
};

// Compresses every scene at every level, renders degraded/clean training
// pairs for all train views, and persists everything under out_dir. On any
// failure the partially written files are removed before rethrowing.
DatasetManifest synthesize_dataset(std::span<const SceneBundle> scenes,
                                   std::span<const std::string> scene_sources,
                                   const DatasetConfig& cfg, const std::string& out_dir);

// In-memory view of a dataset for training loops.
class LoadedDataset {
public:
    explicit LoadedDataset(const DatasetManifest& manifest);

    // batch_size distinct scenes drawn without replacement, then one uniform
    // (view, level) pair per chosen scene.
    std::vector<TrainingPair> sample_batch(int batch_size, Rng& rng) const;

    const DatasetManifest& manifest() const { return manifest_; }
    const TrainingPair& pair_at(size_t idx) const { return pairs_[idx]; }
    size_t size() const { return pairs_.size(); }
    std::vector<const TrainingPair*> pairs_of_scene(int scene_id) const;

private:
    DatasetManifest manifest_;
    std::vector<TrainingPair> pairs_;
    std::vector<std::vector<size_t>> by_scene_;
};

}  // namespace gsr
