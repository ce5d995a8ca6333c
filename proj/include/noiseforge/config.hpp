// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/core.hpp"
#include "noiseforge/scorer.hpp"
#include "noiseforge/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace noiseforge {

inline constexpr const char* kConfigEnvVar = "NOISE_FORGE_CONFIG";

struct BackendConfig {
    std::string kind = "synthetic"; // synthetic | import
    int d = kDefaultEmbeddingDim;
    std::uint64_t seed = 0;
    friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

/// Pipeline knobs. Defaults are the reference setting: 100 images,
/// t_obj 0.5, t_bg 0.1.
struct PipelineConfig {
    std::size_t n_images = 100;
    int channels = kDefaultChannels;
    double t_obj = 0.5;
    double t_bg = 0.1;
    std::uint64_t seed = 0;
    BackendConfig backend;
    double canvas = kDefaultCanvas;

    SelectionConfig selection() const { return {t_obj, t_bg}; }
    /// Throws ConfigError naming the first out-of-range key.
    void validate() const;
    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Overlays the keys of `doc` onto `cfg`. Unknown keys and wrongly typed
/// values throw ConfigError naming the key (dotted for backend.*).
void apply_config(PipelineConfig& cfg, const nlohmann::json& doc);

/// Defaults, then `file` (if any), then `flags`; validated.
PipelineConfig parse_config(const nlohmann::json* file, const nlohmann::json& flags);

/// Like parse_config, reading the file from `path`, or from $NOISE_FORGE_CONFIG
/// when `path` is empty.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path, const nlohmann::json& flags);

nlohmann::json config_to_json(const PipelineConfig& cfg);

} // namespace noiseforge
