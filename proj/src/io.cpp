#include "countforge/io.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

#include "countforge/errors.hpp"
#include "json.hpp"

namespace countforge::io {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(what + ": malformed JSON: " + e.what());
    }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw InvalidInput(where + ": missing field '" + key + "'");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidInput(where + ": field '" + key + "' has the wrong type");
    }
}

double finite_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw InvalidInput(where + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidInput(where + ": non-finite number");
    return d;
}

std::vector<double> number_array(const json& v, std::size_t expected, const std::string& where) {
    if (!v.is_array() || v.size() != expected) {
        throw InvalidInput(where + ": expected an array of " + std::to_string(expected) +
                           " numbers");
    }
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& x : v) out.push_back(finite_number(x, where));
    return out;
}

json point_json(const Point& p) { return json::array({p.x, p.y}); }
json box_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json crop_json(const CropRect& r) {
    return {{"source_id", r.source_id}, {"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}};
}

const char* mode_name(MosaicMode mode) { return mode == MosaicMode::Train ? "train" : "eval"; }

}  // namespace

DensityGrid density_from_json(const std::string& text) {
    const json j = parse_json(text, "density grid");
    const std::string where = "density grid";
    const int h = get_field<int>(j, "height", where);
    const int w = get_field<int>(j, "width", where);
    const int stride = j.contains("stride") ? get_field<int>(j, "stride", where) : kDefaultStride;
    const json& vals = j.contains("values") ? j.at("values") : json();
    if (!vals.is_array()) throw InvalidInput(where + ": 'values' must be an array");
    std::vector<double> values;
    values.reserve(vals.size());
    for (const auto& v : vals) values.push_back(finite_number(v, where + " values"));
    return DensityGrid(h, w, stride, std::move(values));
}

std::string density_to_json(const DensityGrid& grid) {
    json j = {{"height", grid.height()},
              {"width", grid.width()},
              {"stride", grid.stride()},
              {"values", std::vector<double>(grid.values().begin(), grid.values().end())}};
    return j.dump();
}

DensityGrid read_density(const std::filesystem::path& path) {
    try {
        return density_from_json(read_text(path));
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

std::vector<AnnotatedImage> manifest_from_json(const std::string& text) {
    const json j = parse_json(text, "manifest");
    if (!j.is_object() || !j.contains("images") || !j.at("images").is_array()) {
        throw InvalidInput("manifest: expected an object with an 'images' array");
    }
    std::vector<AnnotatedImage> images;
    std::size_t index = 0;
    for (const auto& rec : j.at("images")) {
        std::string where = "manifest image #" + std::to_string(index++);
        AnnotatedImage img;
        img.id = get_field<std::string>(rec, "id", where);
        where = "manifest image '" + img.id + "'";
        img.width = get_field<int>(rec, "width", where);
        img.height = get_field<int>(rec, "height", where);
        img.class_label = get_field<std::string>(rec, "class", where);
        img.points.class_label = img.class_label;
        if (rec.contains("points")) {
            if (!rec.at("points").is_array()) throw InvalidInput(where + ": 'points' must be an array");
            for (const auto& p : rec.at("points")) {
                const auto xy = number_array(p, 2, where + " point");
                img.points.points.push_back({xy[0], xy[1]});
            }
        }
        if (rec.contains("boxes")) {
            if (!rec.at("boxes").is_array()) throw InvalidInput(where + ": 'boxes' must be an array");
            for (const auto& b : rec.at("boxes")) {
                const auto v = number_array(b, 4, where + " box");
                img.boxes.push_back({v[0], v[1], v[2], v[3]});
            }
        }
        validate(img);
        images.push_back(std::move(img));
    }
    return images;
}

std::string manifest_to_json(const std::vector<AnnotatedImage>& images) {
    json arr = json::array();
    for (const auto& img : images) {
        json points = json::array();
        for (const auto& p : img.points.points) points.push_back(point_json(p));
        json boxes = json::array();
        for (const auto& b : img.boxes) boxes.push_back(box_json(b));
        arr.push_back({{"id", img.id},
                       {"width", img.width},
                       {"height", img.height},
                       {"class", img.class_label},
                       {"points", points},
                       {"boxes", boxes}});
    }
    return json{{"images", arr}}.dump();
}

std::vector<AnnotatedImage> read_manifest(const std::filesystem::path& path) {
    try {
        return manifest_from_json(read_text(path));
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

const AnnotatedImage& find_image(const std::vector<AnnotatedImage>& images, const std::string& id) {
    for (const auto& img : images) {
        if (img.id == id) return img;
    }
    throw InvalidInput("image '" + id + "' not found in manifest");
}

std::string mosaic_manifest_to_json(const MosaicManifest& manifest) {
    json pairs = json::array();
    for (const auto& p : manifest.pairs) {
        json tiles = json::array();
        for (const auto& t : p.tiles) tiles.push_back(crop_json(t));
        json boxes = json::array();
        for (const auto& b : p.boxes) boxes.push_back(box_json(b));
        json points = json::array();
        for (const auto& pt : p.points) points.push_back(point_json(pt));
        pairs.push_back({{"pair_id", p.pair_id},
                         {"mosaic_id", p.mosaic_id},
                         {"tiles", tiles},
                         {"target_class", p.target_class},
                         {"boxes", boxes},
                         {"gt_count", p.gt_count},
                         {"points", points}});
    }
    json config = {{"mode", mode_name(manifest.mode)},
                   {"tile_size", manifest.config.tile_size},
                   {"tiles_per_side", manifest.config.tiles_per_side},
                   {"distinct_classes_required", manifest.config.distinct_classes_required},
                   {"n_queries", manifest.n_queries},
                   {"width", 2 * manifest.config.tile_size},
                   {"height", 2 * manifest.config.tile_size}};
    json j = {{"seed", manifest.seed}, {"config", config}, {"pairs", pairs}};
    return j.dump(1);
}

MosaicManifest mosaic_manifest_from_json(const std::string& text) {
    const json j = parse_json(text, "mosaic manifest");
    const std::string where = "mosaic manifest";
    MosaicManifest m;
    m.seed = get_field<std::uint64_t>(j, "seed", where);
    const json cfg = get_field<json>(j, "config", where);
    m.mode = get_field<std::string>(cfg, "mode", where + " config") == "train" ? MosaicMode::Train
                                                                               : MosaicMode::Eval;
    m.config.tile_size = get_field<int>(cfg, "tile_size", where + " config");
    m.config.tiles_per_side = get_field<int>(cfg, "tiles_per_side", where + " config");
    m.config.distinct_classes_required =
        get_field<bool>(cfg, "distinct_classes_required", where + " config");
    m.n_queries = get_field<std::size_t>(cfg, "n_queries", where + " config");
    for (const auto& pj : get_field<json>(j, "pairs", where)) {
        MosaicPair p;
        p.pair_id = get_field<std::string>(pj, "pair_id", where);
        const std::string pw = where + " pair '" + p.pair_id + "'";
        p.mosaic_id = get_field<std::string>(pj, "mosaic_id", pw);
        const json tiles = get_field<json>(pj, "tiles", pw);
        if (!tiles.is_array() || tiles.size() != 4) throw InvalidInput(pw + ": expected 4 tiles");
        for (std::size_t k = 0; k < 4; ++k) {
            const json& t = tiles[k];
            p.tiles[k] = {get_field<std::string>(t, "source_id", pw), get_field<int>(t, "x", pw),
                          get_field<int>(t, "y", pw), get_field<int>(t, "w", pw),
                          get_field<int>(t, "h", pw)};
        }
        p.target_class = get_field<std::string>(pj, "target_class", pw);
        for (const auto& b : get_field<json>(pj, "boxes", pw)) {
            const auto v = number_array(b, 4, pw + " box");
            p.boxes.push_back({v[0], v[1], v[2], v[3]});
        }
        p.gt_count = get_field<std::size_t>(pj, "gt_count", pw);
        for (const auto& pt : get_field<json>(pj, "points", pw)) {
            const auto v = number_array(pt, 2, pw + " point");
            p.points.push_back({v[0], v[1]});
        }
        m.pairs.push_back(std::move(p));
    }
    return m;
}

std::string mosaic_manifest_to_csv(const MosaicManifest& manifest) {
    std::ostringstream out;
    out << "pair_id,target_class,gt_count\n";
    for (const auto& p : manifest.pairs) {
        out << p.pair_id << ',' << p.target_class << ',' << p.gt_count << '\n';
    }
    return out.str();
}

std::string report_to_json(const MetricReport& report, int indent) {
    json j = {{"L", report.count},
              {"mae", report.mae},
              {"rmse", report.rmse},
              {"nae", report.nae},
              {"sre", report.sre}};
    return j.dump(indent);
}

std::string plan_to_json(const TtnPlan& plan) {
    json tiles = json::array();
    json scales = json::array();
    for (const auto& t : plan.tiles) {
        tiles.push_back(json::array({t.x, t.y, t.w, t.h}));
        scales.push_back(json::array({t.scale_x, t.scale_y}));
    }
    return json{{"normalize", plan.normalize}, {"tiles", tiles}, {"scales", scales}}.dump();
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) return static_cast<int>(k);
    }
    return -1;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            std::string field = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                              : comma - start);
            const auto b = field.find_first_not_of(" \t");
            const auto e = field.find_last_not_of(" \t");
            fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size()) {
                throw InvalidInput("csv line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(table.header.size()) + " fields, got " +
                                   std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) throw InvalidInput("csv: missing header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_text(path));
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

static double parse_number(const std::string& field, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || !std::isfinite(v)) {
        throw InvalidInput(where + ": '" + field + "' is not a finite number");
    }
    return v;
}

std::vector<CountRecord> records_from_csv(const CsvTable& table) {
    const int id = table.column("id");
    const int gt = table.column("gt");
    const int pred = table.column("pred");
    if (id < 0 || gt < 0 || pred < 0) {
        throw InvalidInput("csv: header must contain id, gt and pred");
    }
    std::vector<CountRecord> records;
    records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const std::string& rid = row[static_cast<std::size_t>(id)];
        records.push_back({rid, parse_number(row[static_cast<std::size_t>(gt)], "record '" + rid + "' gt"),
                           parse_number(row[static_cast<std::size_t>(pred)], "record '" + rid + "' pred")});
    }
    return records;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << contents;
        out.flush();
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot move output into place at '" + path.string() + "'");
    }
}

}  // namespace countforge::io
