#include "countforge/cli.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "countforge/demo.hpp"
#include "countforge/errors.hpp"
#include "countforge/gl.hpp"
#include "countforge/io.hpp"
#include "countforge/metrics.hpp"
#include "countforge/mosaic.hpp"
#include "countforge/transport.hpp"
#include "countforge/ttn.hpp"
#include "json.hpp"

namespace countforge::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

double parse_field(const std::string& text, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
        throw InvalidInput(where + ": '" + text + "' is not a finite number");
    }
    return v;
}

// id -> value from a CSV with an `id` column and a `value_column` column.
std::map<std::string, double> id_column(const fs::path& path, const std::string& value_column) {
    const auto table = io::read_csv(path);
    const int id = table.column("id");
    const int val = table.column(value_column);
    if (id < 0 || val < 0) {
        throw InvalidInput(path.string() + ": needs columns 'id' and '" + value_column + "'");
    }
    std::map<std::string, double> out;
    for (const auto& row : table.rows) {
        const std::string& key = row[static_cast<std::size_t>(id)];
        const double v = parse_field(row[static_cast<std::size_t>(val)],
                                     path.string() + " record '" + key + "' " + value_column);
        if (!out.emplace(key, v).second) {
            throw InvalidInput(path.string() + ": duplicate id '" + key + "'");
        }
    }
    return out;
}

json report_json(const MetricReport& r) { return json::parse(io::report_to_json(r)); }

std::string with_newline(std::string s) {
    s.push_back('\n');
    return s;
}

// ---- gen-mosaic ----

struct GenMosaicArgs {
    std::string manifest;
    std::size_t n_queries = 0;
    std::string mode = "eval";
    std::uint64_t seed = 0;
    std::optional<int> tile_size;
    std::string out;
    std::string csv_out;
};

int gen_mosaic(const GenMosaicArgs& a, std::ostream& out) {
    const MosaicMode mode = a.mode == "train" ? MosaicMode::Train : MosaicMode::Eval;
    MosaicConfig config = MosaicConfig::for_mode(mode);
    if (a.tile_size) config.tile_size = *a.tile_size;
    config.validate();
    const auto images = io::read_manifest(a.manifest);
    const auto manifest = generate_mosaic_dataset(images, a.n_queries, mode, config, a.seed);

    io::write_atomic(a.out, with_newline(io::mosaic_manifest_to_json(manifest)));
    if (!a.csv_out.empty()) io::write_atomic(a.csv_out, io::mosaic_manifest_to_csv(manifest));

    std::set<std::string> classes;
    std::map<std::size_t, std::size_t> histogram;
    for (const auto& p : manifest.pairs) {
        classes.insert(p.target_class);
        ++histogram[p.gt_count];
    }
    out << "pairs: " << manifest.pairs.size() << "\n"
        << "mosaics: " << manifest.n_queries << "\n"
        << "target classes: " << classes.size() << "\n"
        << "count histogram (gt_count: pairs):\n";
    for (const auto& [count, n] : histogram) out << "  " << count << ": " << n << "\n";
    return kExitOk;
}

// ---- eval-metrics ----

struct EvalMetricsArgs {
    std::string pred;
    std::string gt;
    std::string manifest;
    std::string mosaic;
    std::optional<std::size_t> exclude_top;
    std::optional<std::size_t> bins;
    std::string out;
    std::string hist_out;
};

std::map<std::string, double> ground_truth(const EvalMetricsArgs& a) {
    std::map<std::string, double> gt;
    if (!a.gt.empty()) return id_column(a.gt, "gt");
    if (!a.manifest.empty()) {
        for (const auto& img : io::read_manifest(a.manifest)) {
            gt[img.id] = static_cast<double>(img.gt_count());
        }
        return gt;
    }
    const auto m = io::mosaic_manifest_from_json(io::read_text(a.mosaic));
    for (const auto& p : m.pairs) gt[p.pair_id] = static_cast<double>(p.gt_count);
    return gt;
}

int eval_metrics(const EvalMetricsArgs& a, std::ostream& out) {
    const int sources = !a.gt.empty() + !a.manifest.empty() + !a.mosaic.empty();
    if (sources != 1) {
        throw InvalidInput("give exactly one ground-truth source: --gt, --manifest or --mosaic");
    }
    const auto preds = id_column(a.pred, "pred");
    const auto gts = ground_truth(a);

    std::vector<CountRecord> records;
    records.reserve(preds.size());
    for (const auto& [id, pred] : preds) {
        const auto it = gts.find(id);
        if (it == gts.end()) throw InvalidInput("prediction '" + id + "' has no ground truth");
        records.push_back({id, it->second, pred});
    }
    for (const auto& [id, g] : gts) {
        if (!preds.count(id)) throw InvalidInput("ground truth '" + id + "' has no prediction");
    }

    json report;
    report["report"] = report_json(compute_metrics(records));
    if (a.exclude_top) {
        const auto ex = exclusion_report(records, *a.exclude_top);
        const auto rel = [](double before, double after) {
            return before == 0.0 ? 0.0 : std::fabs(after - before) / before;
        };
        report["exclusion"] = {{"k", *a.exclude_top},
                               {"full", report_json(ex.full)},
                               {"excluded", report_json(ex.excluded)},
                               {"dropped_ids", ex.dropped_ids},
                               {"rmse_relative_change", rel(ex.full.rmse, ex.excluded.rmse)},
                               {"nae_relative_change", rel(ex.full.nae, ex.excluded.nae)}};
    }
    std::string hist_csv;
    if (a.bins) {
        json bins = json::array();
        std::ostringstream csv;
        csv.precision(17);
        csv << "low,high,count\n";
        for (const auto& b : bin_distribution(records, *a.bins)) {
            bins.push_back({{"low", b.low}, {"high", b.high}, {"count", b.count}});
            csv << b.low << ',' << b.high << ',' << b.count << '\n';
        }
        report["distribution"] = bins;
        hist_csv = csv.str();
    }

    const std::string text = report.dump(2) + "\n";
    if (!a.out.empty()) {
        io::write_atomic(a.out, text);
    } else {
        out << text;
    }
    if (!a.hist_out.empty()) {
        if (!a.bins) throw InvalidInput("--hist-out needs --bins");
        io::write_atomic(a.hist_out, hist_csv);
    }
    return kExitOk;
}

// ---- gl-loss ----

struct GlLossArgs {
    std::string density;
    std::string manifest;
    std::string image;
    std::optional<int> stride;
    GlConfig gl;
    std::string out;
};

int gl_loss_cmd(const GlLossArgs& a, std::ostream& out) {
    a.gl.validate();
    const auto density = io::read_density(a.density);
    const auto images = io::read_manifest(a.manifest);
    const auto& img = io::find_image(images, a.image);
    const int stride = density.stride();
    if (a.stride && *a.stride != stride) {
        throw InvalidInput("density '" + a.density + "' has stride " + std::to_string(stride) +
                           ", --stride says " + std::to_string(*a.stride));
    }
    const int expect_h = (img.height + stride - 1) / stride;
    const int expect_w = (img.width + stride - 1) / stride;
    if (density.height() != expect_h || density.width() != expect_w) {
        throw InvalidInput("density is " + std::to_string(density.height()) + "x" +
                           std::to_string(density.width()) + " but image '" + img.id + "' (" +
                           std::to_string(img.width) + "x" + std::to_string(img.height) +
                           ") at stride " + std::to_string(stride) + " needs " +
                           std::to_string(expect_h) + "x" + std::to_string(expect_w));
    }

    const auto grid_points = points_to_grid_frame(img.points, stride);
    const auto cost = grid_cost_matrix(density.height(), density.width(), grid_points, a.gl.eta);
    const auto res = gl_loss(density, cost, grid_points.size(), a.gl);

    double grad_sq = 0.0;
    for (double g : res.grad_a) grad_sq += g * g;
    const json report = {{"loss", res.loss},
                         {"count", total_count(density)},
                         {"grad_norm", std::sqrt(grad_sq)},
                         {"iterations", res.iterations},
                         {"converged", res.converged},
                         {"duality_gap", res.duality_gap}};
    const std::string text = report.dump(2) + "\n";
    if (!a.out.empty()) {
        io::write_atomic(a.out, text);
    } else {
        out << text;
    }
    return res.converged ? kExitOk : kExitNumerical;
}

// ---- ttn-plan ----

struct TtnArgs {
    std::string manifest;
    std::string image;
    TtnConfig ttn;
    std::string out;
};

int ttn_plan_cmd(const TtnArgs& a, std::ostream& out) {
    a.ttn.validate();
    const auto images = io::read_manifest(a.manifest);
    const auto& img = io::find_image(images, a.image);
    const auto plan = make_plan(img.boxes, img.width, img.height, a.ttn);
    const std::string text = io::plan_to_json(plan) + "\n";
    if (!a.out.empty()) {
        io::write_atomic(a.out, text);
    } else {
        out << text;
    }
    return kExitOk;
}

// ---- render-density ----

struct RenderArgs {
    std::string manifest;
    std::string image;
    int stride = kDefaultStride;
    double sigma = kDefaultSigma;
    std::string out;
};

int render_density_cmd(const RenderArgs& a) {
    const auto images = io::read_manifest(a.manifest);
    const auto& img = io::find_image(images, a.image);
    if (a.stride < 1) throw InvalidInput("--stride must be >= 1");
    const int h = (img.height + a.stride - 1) / a.stride;
    const int w = (img.width + a.stride - 1) / a.stride;
    const auto grid = render_gaussian_density(img.points, h, w, a.stride, a.sigma);
    io::write_atomic(a.out, with_newline(io::density_to_json(grid)));
    return kExitOk;
}

// ---- demo-recipe ----

struct DemoArgs {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::optional<int> epochs;
    std::string out;
    std::string trace_out;
};

int demo_recipe(const DemoArgs& a, std::ostream& out) {
    auto config = demo::demo_config_from_json(io::read_text(a.config));
    if (!a.seeds.empty()) config.seeds = a.seeds;
    if (a.epochs) {
        if (*a.epochs < 0) throw InvalidInput("--epochs must be >= 0");
        config.train.epochs = *a.epochs;
    }
    const auto summary = demo::run_ablation(config);

    fs::path trace = a.trace_out;
    if (trace.empty()) {
        trace = fs::path(a.out);
        trace.replace_filename(trace.stem().string() + "_trace.csv");
    }
    io::write_atomic(a.out, demo::ablation_csv(summary));
    io::write_atomic(trace, demo::trace_csv(summary));

    out << "setting  nae        mean_pred  mean_gt\n";
    for (std::size_t s = 0; s < 4; ++s) {
        const auto& m = summary.mean[s];
        out << demo::kAblationSettings[s].name() << "       " << m.report.nae << "  " << m.mean_pred
            << "  " << m.mean_gt << "\n";
    }
    if (!summary.ordering_asserted) {
        out << "warning: epochs = 0, ordering not asserted\n";
        return kExitOk;
    }
    out << (summary.s4_best ? "S4 has the lowest mean NAE\n" : "S4 does NOT have the lowest mean NAE\n");
    return summary.s4_best ? kExitOk : kExitFailed;
}

void add_gl_options(CLI::App* sub, GlConfig& gl) {
    sub->add_option("--epsilon", gl.epsilon, "entropic regularization weight")->capture_default_str();
    sub->add_option("--tau", gl.tau, "marginal penalty weight")->capture_default_str();
    sub->add_option("--eta", gl.eta, "cost bandwidth, C = exp(d / eta)")->capture_default_str();
    sub->add_option("--max-iters", gl.max_iters, "solver iteration cap")->capture_default_str();
    sub->add_option("--tol", gl.tol, "solver tolerance")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"countforge: class-agnostic counting toolkit"};
    app.require_subcommand(1);
    std::function<int()> action;

    GenMosaicArgs gm;
    auto* gen = app.add_subcommand("gen-mosaic", "build a 2x2 mosaic query manifest");
    gen->add_option("--manifest", gm.manifest, "annotated image manifest (JSON)")->required();
    gen->add_option("--n-queries", gm.n_queries, "number of mosaics")->required();
    gen->add_option("--mode", gm.mode, "train (1 pair per mosaic, 192 px tiles) or eval (4 pairs, 384 px tiles)")
        ->check(CLI::IsMember({"train", "eval"}))
        ->capture_default_str();
    gen->add_option("--seed", gm.seed, "random seed")->required();
    gen->add_option("--tile-size", gm.tile_size, "override the tile side in pixels");
    gen->add_option("--out", gm.out, "output manifest (JSON)")->required();
    gen->add_option("--csv-out", gm.csv_out, "optional pair_id,target_class,gt_count table");
    gen->callback([&] { action = [&] { return gen_mosaic(gm, out); }; });

    EvalMetricsArgs em;
    auto* ev = app.add_subcommand("eval-metrics", "MAE / RMSE / NAE / SRE over count predictions");
    ev->add_option("--pred", em.pred, "predictions CSV with columns id,pred")->required();
    ev->add_option("--gt", em.gt, "ground-truth CSV with columns id,gt");
    ev->add_option("--manifest", em.manifest, "annotated image manifest; gt = number of points");
    ev->add_option("--mosaic", em.mosaic, "mosaic manifest; gt = gt_count per pair_id");
    ev->add_option("--exclude-top", em.exclude_top, "also report metrics without the k largest-gt records");
    ev->add_option("--bins", em.bins, "equal-width ground-truth histogram bins");
    ev->add_option("--out", em.out, "report JSON (stdout when omitted)");
    ev->add_option("--hist-out", em.hist_out, "histogram CSV (needs --bins)");
    ev->callback([&] { action = [&] { return eval_metrics(em, out); }; });

    GlLossArgs gl;
    auto* glc = app.add_subcommand("gl-loss", "generalized loss of a density map against an image's points");
    glc->add_option("--density", gl.density, "density grid JSON")->required();
    glc->add_option("--manifest", gl.manifest, "annotated image manifest")->required();
    glc->add_option("--image", gl.image, "image id")->required();
    glc->add_option("--stride", gl.stride, "expected density stride (default 4); must match the density file");
    add_gl_options(glc, gl.gl);
    glc->add_option("--out", gl.out, "report JSON (stdout when omitted)");
    glc->callback([&] { action = [&] { return gl_loss_cmd(gl, out); }; });

    TtnArgs tt;
    auto* ttn = app.add_subcommand("ttn-plan", "test-time normalization tiling plan for one image");
    ttn->add_option("--manifest", tt.manifest, "annotated image manifest")->required();
    ttn->add_option("--image", tt.image, "image id")->required();
    ttn->add_option("--tiles-M", tt.ttn.tiles_per_side, "tiles per side M")->capture_default_str();
    ttn->add_option("--threshold-T", tt.ttn.area_threshold, "box-area ratio threshold T")
        ->capture_default_str();
    ttn->add_option("--out", tt.out, "plan JSON (stdout when omitted)");
    ttn->callback([&] { action = [&] { return ttn_plan_cmd(tt, out); }; });

    RenderArgs ra;
    auto* render = app.add_subcommand("render-density", "Gaussian ground-truth density for one image");
    render->add_option("--manifest", ra.manifest, "annotated image manifest")->required();
    render->add_option("--image", ra.image, "image id")->required();
    render->add_option("--stride", ra.stride, "pixels per density cell")->capture_default_str();
    render->add_option("--sigma", ra.sigma, "kernel width in cells")->capture_default_str();
    render->add_option("--out", ra.out, "density JSON")->required();
    render->callback([&] { action = [&] { return render_density_cmd(ra); }; });

    DemoArgs da;
    auto* demo_cmd = app.add_subcommand("demo-recipe", "toy ablation of mosaic training and the generalized loss");
    demo_cmd->add_option("--config", da.config, "demo config JSON")->required();
    demo_cmd->add_option("--seed", da.seeds, "seeds (comma separated); overrides the config")
        ->delimiter(',');
    demo_cmd->add_option("--epochs", da.epochs, "override training epochs");
    demo_cmd->add_option("--out", da.out, "ablation CSV")->required();
    demo_cmd->add_option("--trace-out", da.trace_out, "loss-trace CSV (default <out stem>_trace.csv)");
    demo_cmd->callback([&] { action = [&] { return demo_recipe(da, out); }; });

    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(std::move(rest));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        return action();
    } catch (const ZeroCountError& e) {
        err << "error: " << e.what() << "\n";
        return kExitZeroCount;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailed;
    }
}

}  // namespace countforge::cli
