// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"
#include "dense_oracle.hpp"
#include "noiseforge/blockdb.hpp"
#include "noiseforge/error.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>

using namespace noiseforge;
namespace fs = std::filesystem;
using nftest::TempDir;

namespace {

FormatErrorKind load_error(const fs::path& dir) {
    try {
        load_database(dir);
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("load_database accepted a damaged directory");
    return FormatErrorKind::Io;
}

void edit_manifest(const fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
    auto doc = io::read_json(dir / "manifest.json");
    edit(doc);
    io::write_json(dir / "manifest.json", doc);
}

} // namespace

TEST_SUITE("blockdb") {

TEST_CASE("prompts and entry layout") {
    CHECK(pair_prompt("dog", "cat") == "a dog and a cat");
    CHECK(single_prompt("dog") == "a dog");
    const auto keys = entry_layout(3);
    REQUIRE(keys.size() == 6);
    CHECK(keys[0] == EntryKey{0, 1});
    CHECK(keys[1] == EntryKey{0, 2});
    CHECK(keys[2] == EntryKey{1, 0});
    CHECK(keys[5] == EntryKey{2, 1});
    CHECK(entry_layout(1).empty());
}

TEST_CASE("category list rules") {
    CHECK_THROWS_AS(CategoryList(std::vector<std::string>{}), InvalidArgument);
    CHECK_THROWS_AS(CategoryList({"dog", "dog"}), InvalidArgument);
    CHECK_THROWS_AS(CategoryList({"dog", "  "}), InvalidArgument);
    const CategoryList list({"dog", "cat"});
    CHECK(list.index_of("cat") == 1);
    CHECK_THROWS_AS(list.index_of("car"), LookupError);
}

TEST_CASE("normalize_entry") {
    std::vector<double> v{2, 4, 3};
    normalize_entry(v);
    CHECK(v == std::vector<double>{0, 1, 0.5});
    std::vector<double> c{0.3, 0.3};
    normalize_entry(c);
    CHECK(c == std::vector<double>{0.3, 0.3});
    std::vector<double> big{1.7, 1.7};
    normalize_entry(big);
    CHECK(big == std::vector<double>{1.0, 1.0});
}

TEST_CASE("combinatorics: 10 images, 5 categories") {
    const auto images = sample_noise(1, 10);
    const SyntheticBackend synth(1);
    nftest::CountingBackend counting(synth);
    const auto db = build_database(counting, images, CategoryList({"dog", "cat", "car", "kite", "fire hydrant"}));
    CHECK(counting.calls() == 100);
    CHECK(db.entries.size() == 20);
    CHECK(db.scores.size() == 20u * 2560);
    CHECK(db.averages.size() == 5u * 2560);
    CHECK_NOTHROW(db.validate());
    for (std::size_t e = 0; e < db.entries.size(); ++e) {
        const auto s = db.entry_scores(e);
        CHECK(*std::min_element(s.begin(), s.end()) == 0.0f);
        CHECK(*std::max_element(s.begin(), s.end()) == 1.0f);
    }
}

TEST_CASE("full database equals a brute-force oracle") {
    const std::vector<std::string> cats{"dog", "cat", "fire hydrant"};
    const auto images = sample_noise(7, 2);
    const SyntheticBackend backend(7);
    const auto db = build_database(backend, images, CategoryList(cats));
    const auto raw = nftest::brute_force_raw(backend, images, cats);
    double worst = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            const auto s = db.entry_scores(*db.entry_index(i, j));
            for (std::size_t b = 0; b < s.size(); ++b) worst = std::max(worst, std::abs(s[b] - raw[i][j][b]));
        }
    CHECK(worst < 1e-6);
    // Blocks are the images' blocks.
    for (std::size_t flat : {0u, 255u, 300u, 511u}) {
        const auto ref = BlockRef::from_flat(flat);
        const auto blocks = extract_blocks(images[static_cast<std::size_t>(ref.image_id)]);
        CHECK(db.block(ref).data == blocks[static_cast<std::size_t>(ref.grid_index)].data);
    }
    const auto serial = build_database(backend, images, CategoryList(cats), Exec::Serial);
    CHECK(serial == db);
}

TEST_CASE("average_score follows the mean over contrasts") {
    const auto db = nftest::synthetic_db({"dog", "cat", "car", "kite"}, 2, 4);
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const std::size_t i = rng() % 4;
        const auto ref = BlockRef::from_flat(rng() % db.block_count());
        double sum = 0;
        for (std::size_t j = 0; j < 4; ++j)
            if (j != i) sum += db.entry_scores(*db.entry_index(i, j))[ref.flat()];
        CHECK(std::abs(average_score(db, db.categories()[i], ref) - sum / 3) < 1e-9);
    }
    CHECK_THROWS_AS(average_score(db, "zebra", {0, 0}), LookupError);
}

TEST_CASE("average_score hand example") {
    auto db = nftest::random_score_db({"dog", "cat", "car"}, 1, 3);
    db.scores[*db.entry_index(0, 1) * db.block_count() + 5] = 0.6f;
    db.scores[*db.entry_index(0, 2) * db.block_count() + 5] = 0.8f;
    recompute_averages(db);
    CHECK(average_score(db, "dog", {0, 5}) == doctest::Approx(0.7).epsilon(1e-7));
}

TEST_CASE("single category database") {
    const auto images = sample_noise(2, 1);
    const SyntheticBackend synth(2);
    nftest::CountingBackend counting(synth);
    const auto db = build_database(counting, images, CategoryList({"dog"}));
    CHECK(counting.calls() == 1);
    CHECK(db.entries.empty());
    CHECK(db.scores.empty());
    REQUIRE(db.averages.size() == 256);
    // Prompt "a dog": min-max scaled dog map.
    const auto maps = synth.attention_maps(images[0], tokenize("a dog"));
    std::vector<double> want(maps.map(1).begin(), maps.map(1).end());
    normalize_entry(want);
    for (int c = 0; c < 256; ++c) CHECK(std::abs(db.averages[c] - want[c]) < 1e-6);
    CHECK(average_score(db, "dog", {0, 3}) == db.averages[3]);
}

TEST_CASE("backend failures carry image and pair context") {
    ImportedBackend empty;
    const auto images = sample_noise(2, 2);
    try {
        build_database(empty, images, CategoryList({"dog", "cat"}));
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("image 0") != std::string::npos);
        CHECK(what.find("dog/cat") != std::string::npos);
    }
}

TEST_CASE("subsample renormalizes") {
    const auto db = nftest::synthetic_db({"dog", "cat"}, 4, 9);
    const auto sub = subsample_database(db, 2);
    CHECK(sub.manifest.n_images == 2);
    CHECK_NOTHROW(sub.validate());
    for (std::size_t e = 0; e < sub.entries.size(); ++e) {
        const auto s = sub.entry_scores(e);
        CHECK(*std::max_element(s.begin(), s.end()) == 1.0f);
    }
    CHECK_THROWS_AS(subsample_database(db, 5), InvalidArgument);
}

TEST_CASE("save/load round trip is bit-identical") {
    TempDir dir("db");
    const auto db = nftest::synthetic_db({"dog", "cat", "fire hydrant"}, 2, 7);
    save_database(db, dir.path());
    const auto back = load_database(dir.path());
    CHECK(back == db);

    TempDir one("db1");
    const auto single = nftest::synthetic_db({"dog"}, 1, 7);
    save_database(single, one.path());
    CHECK(load_database(one.path()) == single);
}

TEST_CASE("damaged directories are rejected by kind") {
    const auto db = nftest::synthetic_db({"dog", "cat"}, 2, 7);

    SUBCASE("version 99") {
        TempDir dir("v99");
        save_database(db, dir.path());
        edit_manifest(dir.path(), [](auto& j) { j["format_version"] = 99; });
        CHECK(load_error(dir.path()) == FormatErrorKind::VersionMismatch);
    }
    SUBCASE("corrupt header") {
        TempDir dir("hdr");
        save_database(db, dir.path());
        std::ofstream(dir / "manifest.json") << "{ not json";
        CHECK(load_error(dir.path()) == FormatErrorKind::CorruptHeader);
    }
    SUBCASE("blocks truncated by one byte") {
        TempDir dir("trunc");
        save_database(db, dir.path());
        fs::resize_file(dir / "blocks.bin", fs::file_size(dir / "blocks.bin") - 1);
        CHECK(load_error(dir.path()) == FormatErrorKind::Truncated);
    }
    SUBCASE("scores too long") {
        TempDir dir("long");
        save_database(db, dir.path());
        std::ofstream(dir / "scores.bin", std::ios::app | std::ios::binary) << "abcd";
        CHECK(load_error(dir.path()) == FormatErrorKind::SizeMismatch);
    }
    SUBCASE("flipped byte fails the checksum") {
        TempDir dir("crc");
        save_database(db, dir.path());
        auto bytes = io::read_bytes(dir / "scores.bin");
        bytes[17] ^= 0x01;
        io::write_bytes(dir / "scores.bin", bytes);
        CHECK(load_error(dir.path()) == FormatErrorKind::ChecksumMismatch);
    }
    SUBCASE("averages that disagree with the entries") {
        TempDir dir("avg");
        save_database(db, dir.path());
        edit_manifest(dir.path(), [](auto& j) { j.erase("checksums"); });
        auto avg = io::decode_f32(io::read_bytes(dir / "averages.bin"));
        avg[3] = avg[3] > 0.5f ? 0.0f : 1.0f;
        io::write_bytes(dir / "averages.bin", io::encode_f32(avg));
        CHECK(load_error(dir.path()) == FormatErrorKind::Inconsistent);
    }
    SUBCASE("missing file") {
        TempDir dir("missing");
        save_database(db, dir.path());
        fs::remove(dir / "entries.json");
        CHECK_THROWS_AS(load_database(dir.path()), FormatError);
    }
}

TEST_CASE("foreign manifest keys survive and checksums are optional") {
    TempDir dir("extra");
    const auto db = nftest::synthetic_db({"dog", "cat"}, 1, 7);
    save_database(db, dir.path());
    edit_manifest(dir.path(), [](auto& j) {
        j.erase("checksums");
        j["head_averaging"] = "mean over heads";
    });
    const auto back = load_database(dir.path());
    CHECK(nlohmann::json::parse(back.manifest.extra_json)["head_averaging"] == "mean over heads");
    CHECK(back.scores == db.scores);
}

}
