#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "refhist/point_cloud.hpp"

namespace refhist {

// Synthetic radar-scene generator: a seeded, desk-scale stand-in for a
// recorded corpus. Samples come in tracks that share a latent object
// state (position, velocity, base RCS) with small per-cycle jitter, so
// track-exclusive splitting actually matters.
struct ClassProfile {
    std::array<double, 3> extent{1.0, 1.0, 1.0};  // x,y,z half-widths (m)
    double z_offset = 0.0;                        // m; large for underridables
    double doppler_spread = 1.0;                  // m/s, across tracks
    double rcs_mean = 0.0;                        // dBsm
    double rcs_spread = 1.0;
    int points_min = 1;
    int points_max = 1;
    std::array<double, kNumFeatures> missing_prob{};
    int track_min = 1;
    int track_max = 1;

    void validate() const;
};

struct SceneConfig {
    int version = 1;
    std::uint64_t seed = 0;
    std::array<std::size_t, kNumClasses> budgets{};  // samples per class
    std::array<ClassProfile, kNumClasses> profiles{};

    void validate() const;
};

SceneConfig scene_config_from_json(const std::string& text);
std::string scene_config_to_json(const SceneConfig& cfg);
SceneConfig load_scene_config(const std::filesystem::path& path);

// The versioned profile set shipped in core/configs/default_profiles.json
// (embedded at build time).
SceneConfig default_scene_config();

// Deterministic given cfg.seed: same config yields byte-identical JSONL.
// Radial distance is derived from the simulated geometry (sensor at the
// origin), so features are correlated the way real reflections are.
Dataset generate(const SceneConfig& cfg);

}  // namespace refhist
