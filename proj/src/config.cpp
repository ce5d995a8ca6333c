// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/config.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace noiseforge {

namespace {

using nlohmann::json;

template <class T>
T typed(const json& value, const std::string& key) {
    if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError(key, "expected a string, got " + value.dump());
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!value.is_number()) throw ConfigError(key, "expected a number, got " + value.dump());
    } else {
        if (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0))
            throw ConfigError(key, "expected a non-negative integer, got " + value.dump());
    }
    return value.get<T>();
}

void apply_backend(BackendConfig& b, const json& doc) {
    if (!doc.is_object()) throw ConfigError("backend", "expected an object, got " + doc.dump());
    for (const auto& [key, value] : doc.items()) {
        const std::string name = "backend." + key;
        if (key == "kind")
            b.kind = typed<std::string>(value, name);
        else if (key == "d")
            b.d = typed<int>(value, name);
        else if (key == "seed")
            b.seed = typed<std::uint64_t>(value, name);
        else
            throw ConfigError(name, "unknown configuration key");
    }
}

} // namespace

void PipelineConfig::validate() const {
    auto threshold = [](double v, const char* key) {
        if (!(v >= 0.0 && v <= 1.0)) {
            std::ostringstream msg;
            msg << "value " << v << " is outside [0, 1]";
            throw ConfigError(key, msg.str());
        }
    };
    threshold(t_obj, "t_obj");
    threshold(t_bg, "t_bg");
    if (n_images < 1) throw ConfigError("n_images", "must be at least 1");
    if (channels < 1) throw ConfigError("channels", "must be at least 1");
    if (!(canvas > 0) || !std::isfinite(canvas)) throw ConfigError("canvas", "must be positive");
    if (backend.kind != "synthetic" && backend.kind != "import")
        throw ConfigError("backend.kind", "must be 'synthetic' or 'import', got '" + backend.kind + "'");
    if (backend.d < 1) throw ConfigError("backend.d", "must be at least 1");
}

void apply_config(PipelineConfig& cfg, const json& doc) {
    if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "n_images")
            cfg.n_images = typed<std::size_t>(value, key);
        else if (key == "channels")
            cfg.channels = typed<int>(value, key);
        else if (key == "t_obj")
            cfg.t_obj = typed<double>(value, key);
        else if (key == "t_bg")
            cfg.t_bg = typed<double>(value, key);
        else if (key == "seed")
            cfg.seed = typed<std::uint64_t>(value, key);
        else if (key == "canvas")
            cfg.canvas = typed<double>(value, key);
        else if (key == "backend")
            apply_backend(cfg.backend, value);
        else
            throw ConfigError(key, "unknown configuration key");
    }
}

PipelineConfig parse_config(const json* file, const json& flags) {
    PipelineConfig cfg;
    if (file) apply_config(cfg, *file);
    if (!flags.is_null()) apply_config(cfg, flags);
    cfg.validate();
    return cfg;
}

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& path, const json& flags) {
    std::optional<std::filesystem::path> source = path;
    if (!source)
        if (const char* env = std::getenv(kConfigEnvVar); env && *env) source = env;
    if (!source) return parse_config(nullptr, flags);
    json doc;
    try {
        doc = io::read_json(*source);
    } catch (const FormatError& e) {
        throw ConfigError("", "cannot read config " + source->string() + ": " + e.detail());
    }
    return parse_config(&doc, flags);
}

json config_to_json(const PipelineConfig& cfg) {
    return {{"n_images", cfg.n_images},
            {"channels", cfg.channels},
            {"t_obj", cfg.t_obj},
            {"t_bg", cfg.t_bg},
            {"seed", cfg.seed},
            {"canvas", cfg.canvas},
            {"backend", {{"kind", cfg.backend.kind}, {"d", cfg.backend.d}, {"seed", cfg.backend.seed}}}};
}

} // namespace noiseforge
