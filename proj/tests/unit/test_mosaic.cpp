#include <cstdlib>
#include <map>
#include <set>

#include "countforge/errors.hpp"
#include "countforge/io.hpp"
#include "countforge/mosaic.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "synth.hpp"

using namespace countforge;

namespace {

AnnotatedImage blank(const std::string& id, const std::string& cls, int size = 400) {
    return {id, size, size, cls, {}, {}};
}

}  // namespace

TEST_CASE("crop keeps points strictly inside and translates them") {
    AnnotatedImage img = blank("a", "c", 400);
    img.points.points = {{10, 10}, {200, 10}, {50, 60}, {192, 100}, {40, 40}};
    img.boxes = {{5, 5, 15, 15}, {185, 5, 195, 15}, {0, 0, 192, 192}};

    const auto [pts, boxes] = crop_with_annotations(img, {"a", 0, 0, 192, 192});
    REQUIRE(pts.size() == 3);  // (10,10), (50,60), (40,40); 192 is on the edge
    CHECK(pts.points[0] == Point{10, 10});
    CHECK(boxes.size() == 2);  // the box touching the border is fully inside

    const auto [moved, _] = crop_with_annotations(img, {"a", 40, 40, 192, 192});
    bool found = false;
    for (const auto& p : moved.points) found = found || p == Point{10, 20};
    CHECK(found);
    // (40, 40) lies on the crop's edge and is dropped
    for (const auto& p : moved.points) CHECK_FALSE(p == Point{0, 0});

    CHECK_THROWS_AS(crop_with_annotations(img, {"a", 300, 0, 192, 192}), InvalidInput);
}

TEST_CASE("collage geometry") {
    const auto imgs = synth::images(4, 4, 1);
    Rng rng(5);
    const auto eval = build_mosaic(imgs, MosaicConfig::evaluation(), rng);
    CHECK(eval.width == 768);
    CHECK(eval.height == 768);
    const auto train = build_mosaic(imgs, MosaicConfig::training(), rng);
    CHECK(train.width == 384);
    CHECK(train.height == 384);

    for (std::size_t k = 0; k < 4; ++k) {
        const double ox = (k % 2) * 384.0, oy = (k / 2) * 384.0;
        for (const auto& p : eval.tile_points[k]) {
            CHECK(p.x > ox);
            CHECK(p.x < ox + 384);
            CHECK(p.y > oy);
            CHECK(p.y < oy + 384);
        }
        for (const auto& b : eval.tile_boxes[k]) {
            CHECK(b.x1 >= ox);
            CHECK(b.x2 <= ox + 384);
            CHECK(b.y1 >= oy);
            CHECK(b.y2 <= oy + 384);
        }
    }
    CHECK(eval.target_class == eval.tile_classes[0]);
}

TEST_CASE("collage input checks") {
    auto imgs = synth::images(4, 4, 2);
    Rng rng(1);
    CHECK_THROWS_AS(build_mosaic(std::span(imgs).first(3), MosaicConfig::evaluation(), rng), InvalidInput);
    imgs[1].class_label = imgs[0].class_label;
    CHECK_THROWS_AS(build_mosaic(imgs, MosaicConfig::evaluation(), rng), InvalidInput);
    MosaicConfig relaxed = MosaicConfig::evaluation();
    relaxed.distinct_classes_required = false;
    CHECK_NOTHROW(build_mosaic(imgs, relaxed, rng));
    imgs[2].width = 100;
    CHECK_THROWS_AS(build_mosaic(imgs, relaxed, rng), InvalidInput);
    MosaicConfig three = relaxed;
    three.tiles_per_side = 3;
    CHECK_THROWS_AS(three.validate(), InvalidInput);
}

TEST_CASE("images without points give empty counts") {
    const std::vector<AnnotatedImage> imgs{blank("a", "w"), blank("b", "x"), blank("c", "y"), blank("d", "z")};
    Rng rng(3);
    const auto m = build_mosaic(imgs, MosaicConfig::evaluation(), rng);
    for (const auto& [cls, pts] : m.per_class_points) CHECK(pts.empty());
    CHECK(m.target_count == 0);
    CHECK_FALSE(m.has_exemplars);
}

TEST_CASE("target selection") {
    const auto imgs = synth::images(4, 4, 9);
    Rng build(7);
    const auto base = build_mosaic(imgs, MosaicConfig::evaluation(), build);

    Rng r1(42), r2(42);
    CHECK(select_target(base, r1).target_class == select_target(base, r2).target_class);

    std::map<std::string, int> freq;
    Rng rng(123);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++freq[select_target(base, rng).target_class];
    REQUIRE(freq.size() == 4);
    for (const auto& [cls, n] : freq) CHECK(std::fabs(n / double(draws) - 0.25) <= 0.02);

    auto m = base;
    CHECK_THROWS_AS(set_target(m, "absent"), InvalidInput);
    set_target(m, m.tile_classes[2]);
    CHECK(m.target_count == m.tile_points[2].size());
}

TEST_CASE("dataset generation") {
    const auto imgs = synth::images(40, 10, 3);

    SUBCASE("one query gives four pairs sharing a collage") {
        const auto m = generate_fsc_mosaic(imgs, 1, 9);
        REQUIRE(m.pairs.size() == 4);
        std::set<std::string> classes;
        for (const auto& p : m.pairs) {
            CHECK(p.mosaic_id == m.pairs[0].mosaic_id);
            CHECK(p.tiles == m.pairs[0].tiles);
            classes.insert(p.target_class);
        }
        CHECK(classes.size() == 4);
    }

    SUBCASE("counts agree with an independent recount") {
        const auto m = generate_mosaic_dataset(imgs, 50, MosaicMode::Eval, MosaicConfig::evaluation(), 77);
        REQUIRE(m.pairs.size() == 200);
        std::map<std::string, std::size_t> per_mosaic_total, per_mosaic_pairs;
        for (const auto& p : m.pairs) {
            std::size_t recount = 0;
            for (const auto& crop : p.tiles) {
                const auto& src = io::find_image(imgs, crop.source_id);
                if (src.class_label == p.target_class) recount += oracle::points_in_crop(src, crop);
            }
            REQUIRE(p.gt_count == recount);
            REQUIRE(p.points.size() == p.gt_count);
            REQUIRE_FALSE(p.boxes.empty());
            for (const auto& pt : p.points) {
                REQUIRE(pt.x >= 0);
                REQUIRE(pt.x < 768);
                REQUIRE(pt.y >= 0);
                REQUIRE(pt.y < 768);
            }
            per_mosaic_total[p.mosaic_id] += p.gt_count;
        }
        // Mass conservation: the four targets of a collage together hold every retained point.
        for (std::size_t q = 0; q < 50; ++q) {
            const auto& p = m.pairs[q * 4];
            std::size_t retained = 0;
            for (const auto& crop : p.tiles) retained += oracle::points_in_crop(io::find_image(imgs, crop.source_id), crop);
            REQUIRE(per_mosaic_total[p.mosaic_id] == retained);
        }
    }

    SUBCASE("training mode: one pair with exemplars per collage") {
        const auto m = generate_mosaic_dataset(imgs, 30, MosaicMode::Train, MosaicConfig::training(), 5);
        REQUIRE(m.pairs.size() == 30);
        for (const auto& p : m.pairs) CHECK_FALSE(p.boxes.empty());
    }

    SUBCASE("deterministic for a seed, independent of thread count") {
        setenv("COUNTFORGE_THREADS", "1", 1);
        const auto a = io::mosaic_manifest_to_json(generate_fsc_mosaic(imgs, 20, 11));
        setenv("COUNTFORGE_THREADS", "4", 1);
        const auto b = io::mosaic_manifest_to_json(generate_fsc_mosaic(imgs, 20, 11));
        unsetenv("COUNTFORGE_THREADS");
        const auto c = io::mosaic_manifest_to_json(generate_fsc_mosaic(imgs, 20, 12));
        CHECK(a == b);
        CHECK(a != c);
    }

    SUBCASE("too few classes") {
        const auto few = synth::images(12, 3, 1);
        CHECK_THROWS_AS(generate_fsc_mosaic(few, 2, 1), InvalidInput);
    }
}
