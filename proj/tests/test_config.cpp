// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/config.hpp"
#include "noiseforge/error.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

using namespace noiseforge;
using nlohmann::json;

namespace {

std::string key_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const auto cfg = parse_config(nullptr, json::object());
    CHECK(cfg.n_images == 100);
    CHECK(cfg.channels == 4);
    CHECK(cfg.t_obj == 0.5);
    CHECK(cfg.t_bg == 0.1);
    CHECK(cfg.backend.kind == "synthetic");
    CHECK(cfg.canvas == 512);
}

TEST_CASE("flags override the file") {
    const json file{{"t_obj", 0.3}, {"n_images", 10}};
    const auto cfg = parse_config(&file, json{{"t_obj", 0.7}});
    CHECK(cfg.t_obj == 0.7);
    CHECK(cfg.n_images == 10);
    const json nested{{"backend", {{"d", 32}, {"seed", 4}}}};
    const auto b = parse_config(&nested, json{{"backend", {{"seed", 9}}}});
    CHECK(b.backend.d == 32);
    CHECK(b.backend.seed == 9);
}

TEST_CASE("errors name the key") {
    CHECK(key_of([] { parse_config(nullptr, json{{"t_bg", -0.1}}); }) == "t_bg");
    CHECK(key_of([] { parse_config(nullptr, json{{"t_obj", 1.5}}); }) == "t_obj");
    CHECK(key_of([] { parse_config(nullptr, json{{"n_images", "ten"}}); }) == "n_images");
    CHECK(key_of([] { parse_config(nullptr, json{{"n_images", -3}}); }) == "n_images");
    CHECK(key_of([] { parse_config(nullptr, json{{"t_objj", 0.5}}); }) == "t_objj");
    CHECK(key_of([] { parse_config(nullptr, json{{"backend", {{"kind", "sdxl"}}}}); }) == "backend.kind");
    CHECK(key_of([] { parse_config(nullptr, json{{"backend", {{"dim", 3}}}}); }) == "backend.dim");
    CHECK(key_of([] { parse_config(nullptr, json{{"n_images", 0}}); }) == "n_images");
}

TEST_CASE("file path and environment variable") {
    nftest::TempDir dir("cfg");
    std::ofstream(dir / "a.json") << R"({"t_obj": 0.3, "seed": 5})";
    std::ofstream(dir / "b.json") << R"({"t_obj": 0.4})";
    ::setenv(kConfigEnvVar, (dir / "b.json").c_str(), 1);
    CHECK(resolve_config(std::nullopt, json::object()).t_obj == 0.4);
    CHECK(resolve_config(dir / "a.json", json::object()).t_obj == 0.3);
    CHECK(resolve_config(dir / "a.json", json::object()).seed == 5);
    ::unsetenv(kConfigEnvVar);
    CHECK(resolve_config(std::nullopt, json::object()).t_obj == 0.5);
    CHECK_THROWS_AS(resolve_config(dir / "missing.json", json::object()), ConfigError);
}

TEST_CASE("json round trip") {
    PipelineConfig cfg;
    cfg.t_obj = 0.8;
    cfg.backend.seed = 3;
    const auto j = config_to_json(cfg);
    CHECK(parse_config(&j, json::object()) == cfg);
}

}
