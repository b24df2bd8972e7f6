#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "countforge/core.hpp"
#include "countforge/random.hpp"

namespace countforge {

/// Crop of a source image, in source pixels.
struct CropRect {
    std::string source_id;
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    friend bool operator==(const CropRect&, const CropRect&) = default;
};

enum class MosaicMode { Train, Eval };

struct MosaicConfig {
    int tile_size = 384;
    int tiles_per_side = 2;
    bool distinct_classes_required = true;

    /// 192 px tiles, so the 2x2 collage has the same 384 px size as an
    /// ordinary training crop.
    static MosaicConfig training() { return {192, 2, true}; }
    /// 384 px tiles assembled into 768 x 768 collages.
    static MosaicConfig evaluation() { return {384, 2, true}; }
    static MosaicConfig for_mode(MosaicMode mode) {
        return mode == MosaicMode::Train ? training() : evaluation();
    }

    void validate() const;
};

/// 2 x 2 collage. Tiles are ordered TL, TR, BL, BR and placed at offsets
/// (0,0), (W,0), (0,H), (W,H) where W = H = tile size.
struct MosaicSample {
    int width = 0;
    int height = 0;
    std::array<CropRect, 4> tiles;
    std::array<std::string, 4> tile_classes;
    /// Points retained by each tile, in mosaic coordinates.
    std::array<std::vector<Point>, 4> tile_points;
    /// Reference boxes retained by each tile, in mosaic coordinates.
    std::array<std::vector<BoundingBox>, 4> tile_boxes;
    std::map<std::string, PointSet> per_class_points;

    std::string target_class;
    std::size_t target_count = 0;
    std::vector<BoundingBox> reference_boxes;
    /// False when the target class kept no reference box; such a sample has
    /// no exemplar and must not be used for training.
    bool has_exemplars = false;
};

/// Keeps points strictly inside the rect and boxes fully inside it, both
/// translated to rect-local coordinates.
std::pair<PointSet, std::vector<BoundingBox>> crop_with_annotations(const AnnotatedImage& image,
                                                                    const CropRect& rect);

/// Crops each of the four images at a uniformly drawn origin and assembles the
/// collage. The target is initialized to the top-left tile's class.
MosaicSample build_mosaic(std::span<const AnnotatedImage> images, const MosaicConfig& config,
                          Rng& rng);

/// Picks one of the four tiles uniformly and makes its class the target.
MosaicSample select_target(MosaicSample mosaic, Rng& rng);

/// Sets the target class and recomputes the dependent fields.
void set_target(MosaicSample& mosaic, const std::string& target_class);

/// One query/reference pair of a generated mosaic dataset.
struct MosaicPair {
    std::string pair_id;
    std::string mosaic_id;
    std::array<CropRect, 4> tiles;
    std::string target_class;
    std::vector<BoundingBox> boxes;
    std::size_t gt_count = 0;
    std::vector<Point> points;
};

struct MosaicManifest {
    std::uint64_t seed = 0;
    MosaicMode mode = MosaicMode::Eval;
    MosaicConfig config;
    std::size_t n_queries = 0;
    std::vector<MosaicPair> pairs;
};

/// Mosaic dataset generation. In evaluation mode each collage is expanded
/// into four pairs, one per tile class as the reference; in training mode each
/// collage yields one pair with a randomly selected target. Collages whose
/// required targets keep no reference box are re-cropped up to a bounded
/// number of attempts. Collage q draws from child_seed(seed, q), so the output
/// depends only on (images, n_queries, mode, config, seed).
MosaicManifest generate_mosaic_dataset(const std::vector<AnnotatedImage>& images,
                                       std::size_t n_queries, MosaicMode mode,
                                       const MosaicConfig& config, std::uint64_t seed);

/// Evaluation-mode generation: four distinct classes per collage, 384 px
/// tiles by default.
MosaicManifest generate_fsc_mosaic(const std::vector<AnnotatedImage>& images,
                                   std::size_t n_queries, std::uint64_t seed,
                                   const MosaicConfig& config = MosaicConfig::evaluation());

}  // namespace countforge
