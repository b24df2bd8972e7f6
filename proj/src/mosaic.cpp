#include "countforge/mosaic.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "countforge/errors.hpp"
#include "countforge/parallel.hpp"

namespace countforge {

namespace {

constexpr int kMaxCropAttempts = 100;

std::string numbered(const char* prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, index);
    return buf;
}

// Draws four images: distinct classes chosen uniformly (partial Fisher-Yates
// over the sorted class list), then one image uniformly within each class.
// Without the distinctness requirement, four images uniformly with
// replacement.
std::array<const AnnotatedImage*, 4> draw_images(
    const std::map<std::string, std::vector<const AnnotatedImage*>>& by_class,
    const std::vector<const AnnotatedImage*>& eligible, bool distinct, Rng& rng) {
    std::array<const AnnotatedImage*, 4> picked{};
    if (!distinct) {
        for (auto& p : picked) {
            p = eligible[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1))];
        }
        return picked;
    }
    std::vector<const std::vector<const AnnotatedImage*>*> classes;
    classes.reserve(by_class.size());
    for (const auto& [label, imgs] : by_class) classes.push_back(&imgs);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(k), static_cast<std::int64_t>(classes.size()) - 1));
        std::swap(classes[k], classes[j]);
        const auto& imgs = *classes[k];
        picked[k] = imgs[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(imgs.size()) - 1))];
    }
    return picked;
}

}  // namespace

void MosaicConfig::validate() const {
    if (tile_size < 1) throw InvalidInput("tile size must be >= 1");
    if (tiles_per_side != 2) throw InvalidInput("mosaics are 2 x 2: tiles_per_side must be 2");
}

std::pair<PointSet, std::vector<BoundingBox>> crop_with_annotations(const AnnotatedImage& image,
                                                                    const CropRect& rect) {
    if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > image.width ||
        rect.y + rect.h > image.height) {
        throw InvalidInput("crop (" + std::to_string(rect.x) + ", " + std::to_string(rect.y) +
                           ", " + std::to_string(rect.w) + "x" + std::to_string(rect.h) +
                           ") is outside image '" + image.id + "'");
    }
    const double x0 = rect.x, y0 = rect.y;
    const double x1 = rect.x + rect.w, y1 = rect.y + rect.h;

    PointSet points;
    points.class_label = image.class_label;
    for (const auto& p : image.points.points) {
        if (p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1) {
            points.points.push_back({p.x - x0, p.y - y0});
        }
    }
    std::vector<BoundingBox> boxes;
    for (const auto& b : image.boxes) {
        if (b.x1 >= x0 && b.y1 >= y0 && b.x2 <= x1 && b.y2 <= y1) {
            boxes.push_back({b.x1 - x0, b.y1 - y0, b.x2 - x0, b.y2 - y0});
        }
    }
    return {std::move(points), std::move(boxes)};
}

MosaicSample build_mosaic(std::span<const AnnotatedImage> images, const MosaicConfig& config,
                          Rng& rng) {
    config.validate();
    if (images.size() != 4) throw InvalidInput("a mosaic needs exactly 4 images");
    const int tile = config.tile_size;
    for (const auto& img : images) {
        if (img.width < tile || img.height < tile) {
            throw InvalidInput("image '" + img.id + "' (" + std::to_string(img.width) + "x" +
                               std::to_string(img.height) + ") is smaller than the " +
                               std::to_string(tile) + " px tile");
        }
    }
    if (config.distinct_classes_required) {
        std::set<std::string> labels;
        for (const auto& img : images) labels.insert(img.class_label);
        if (labels.size() != 4) {
            throw InvalidInput("mosaic images must have 4 distinct classes");
        }
    }

    MosaicSample out;
    out.width = 2 * tile;
    out.height = 2 * tile;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& img = images[k];
        CropRect rect{img.id,
                      static_cast<int>(rng.uniform_int(0, img.width - tile)),
                      static_cast<int>(rng.uniform_int(0, img.height - tile)), tile, tile};
        auto [points, boxes] = crop_with_annotations(img, rect);

        const double ox = static_cast<double>(k % 2) * tile;
        const double oy = static_cast<double>(k / 2) * tile;
        auto& merged = out.per_class_points[img.class_label];
        merged.class_label = img.class_label;
        for (const auto& p : points.points) {
            const Point q{p.x + ox, p.y + oy};
            out.tile_points[k].push_back(q);
            merged.points.push_back(q);
        }
        for (const auto& b : boxes) {
            out.tile_boxes[k].push_back({b.x1 + ox, b.y1 + oy, b.x2 + ox, b.y2 + oy});
        }
        out.tiles[k] = std::move(rect);
        out.tile_classes[k] = img.class_label;
    }
    set_target(out, out.tile_classes[0]);
    return out;
}

void set_target(MosaicSample& mosaic, const std::string& target_class) {
    const auto it = mosaic.per_class_points.find(target_class);
    if (it == mosaic.per_class_points.end()) {
        throw InvalidInput("class '" + target_class + "' does not appear in the mosaic");
    }
    mosaic.target_class = target_class;
    mosaic.target_count = it->second.size();
    mosaic.reference_boxes.clear();
    for (std::size_t k = 0; k < 4; ++k) {
        if (mosaic.tile_classes[k] == target_class) {
            mosaic.reference_boxes.insert(mosaic.reference_boxes.end(),
                                          mosaic.tile_boxes[k].begin(),
                                          mosaic.tile_boxes[k].end());
        }
    }
    mosaic.has_exemplars = !mosaic.reference_boxes.empty();
}

MosaicSample select_target(MosaicSample mosaic, Rng& rng) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, 3));
    const std::string label = mosaic.tile_classes[k];
    set_target(mosaic, label);
    return mosaic;
}

MosaicManifest generate_mosaic_dataset(const std::vector<AnnotatedImage>& images,
                                       std::size_t n_queries, MosaicMode mode,
                                       const MosaicConfig& config, std::uint64_t seed) {
    config.validate();
    for (const auto& img : images) validate(img);

    std::vector<const AnnotatedImage*> eligible;
    std::map<std::string, std::vector<const AnnotatedImage*>> by_class;
    for (const auto& img : images) {
        if (img.width >= config.tile_size && img.height >= config.tile_size) {
            eligible.push_back(&img);
            by_class[img.class_label].push_back(&img);
        }
    }
    if (config.distinct_classes_required && by_class.size() < 4) {
        throw InvalidInput("need images of at least 4 distinct classes at least " +
                           std::to_string(config.tile_size) + " px on each side; found " +
                           std::to_string(by_class.size()));
    }
    if (eligible.empty()) {
        throw InvalidInput("no image is large enough for a " + std::to_string(config.tile_size) +
                           " px tile");
    }

    const std::size_t pairs_per_query = mode == MosaicMode::Eval ? 4 : 1;
    MosaicManifest out;
    out.seed = seed;
    out.mode = mode;
    out.config = config;
    out.n_queries = n_queries;
    out.pairs.resize(n_queries * pairs_per_query);

    parallel_for(n_queries, [&](std::size_t q) {
        Rng rng(child_seed(seed, q));
        const auto picked = draw_images(by_class, eligible, config.distinct_classes_required, rng);
        const std::array<AnnotatedImage, 4> chosen{*picked[0], *picked[1], *picked[2], *picked[3]};

        MosaicSample mosaic;
        bool usable = false;
        for (int attempt = 0; attempt < kMaxCropAttempts && !usable; ++attempt) {
            mosaic = build_mosaic(chosen, config, rng);
            if (mode == MosaicMode::Eval) {
                usable = std::all_of(mosaic.tile_boxes.begin(), mosaic.tile_boxes.end(),
                                     [](const auto& b) { return !b.empty(); });
            } else {
                mosaic = select_target(std::move(mosaic), rng);
                usable = mosaic.has_exemplars;
            }
        }
        if (!usable) {
            throw InvalidInput("no crop of images '" + chosen[0].id + "', '" + chosen[1].id +
                               "', '" + chosen[2].id + "', '" + chosen[3].id +
                               "' keeps a reference box for every target after " +
                               std::to_string(kMaxCropAttempts) + " attempts");
        }

        const std::string mosaic_id = numbered("q", q);
        for (std::size_t k = 0; k < pairs_per_query; ++k) {
            if (mode == MosaicMode::Eval) set_target(mosaic, mosaic.tile_classes[k]);
            MosaicPair& pair = out.pairs[q * pairs_per_query + k];
            pair.pair_id = mosaic_id + "_p" + std::to_string(k);
            pair.mosaic_id = mosaic_id;
            pair.tiles = mosaic.tiles;
            pair.target_class = mosaic.target_class;
            pair.boxes = mosaic.reference_boxes;
            pair.gt_count = mosaic.target_count;
            pair.points = mosaic.per_class_points.at(mosaic.target_class).points;
        }
    });
    return out;
}

MosaicManifest generate_fsc_mosaic(const std::vector<AnnotatedImage>& images,
                                   std::size_t n_queries, std::uint64_t seed,
                                   const MosaicConfig& config) {
    return generate_mosaic_dataset(images, n_queries, MosaicMode::Eval, config, seed);
}

}  // namespace countforge
