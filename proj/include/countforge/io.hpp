#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "countforge/core.hpp"
#include "countforge/metrics.hpp"
#include "countforge/mosaic.hpp"
#include "countforge/ttn.hpp"

namespace countforge::io {

// All readers throw InvalidInput with the offending file/record named.

/// {"height", "width", "stride", "values": [row-major]}
DensityGrid density_from_json(const std::string& text);
std::string density_to_json(const DensityGrid& grid);
DensityGrid read_density(const std::filesystem::path& path);

/// {"images": [{"id", "width", "height", "class", "points": [[x,y]...],
///              "boxes": [[x1,y1,x2,y2]...]}]}
std::vector<AnnotatedImage> manifest_from_json(const std::string& text);
std::string manifest_to_json(const std::vector<AnnotatedImage>& images);
std::vector<AnnotatedImage> read_manifest(const std::filesystem::path& path);
const AnnotatedImage& find_image(const std::vector<AnnotatedImage>& images, const std::string& id);

/// {"seed", "config": {...}, "pairs": [{"pair_id", "mosaic_id", "tiles": [...],
///   "target_class", "boxes", "gt_count", "points"}]}
std::string mosaic_manifest_to_json(const MosaicManifest& manifest);
MosaicManifest mosaic_manifest_from_json(const std::string& text);
/// Companion join table: pair_id,target_class,gt_count
std::string mosaic_manifest_to_csv(const MosaicManifest& manifest);

std::string report_to_json(const MetricReport& report, int indent = -1);
std::string plan_to_json(const TtnPlan& plan);

/// Simple comma-separated table with a header row. Fields may not contain
/// commas or quotes.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index for `name`, or -1.
    int column(const std::string& name) const;
};
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

/// Records from a CSV with header id,gt,pred (extra columns ignored).
std::vector<CountRecord> records_from_csv(const CsvTable& table);

std::string read_text(const std::filesystem::path& path);
/// Writes to a temporary sibling file and renames it into place, so readers
/// never observe a partially written file.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace countforge::io
