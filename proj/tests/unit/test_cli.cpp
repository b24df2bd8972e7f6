#include <filesystem>
#include <fstream>
#include <sstream>

#include "countforge/cli.hpp"
#include "countforge/core.hpp"
#include "countforge/io.hpp"
#include "doctest.h"
#include "json.hpp"
#include "synth.hpp"

using namespace countforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "countforge");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("countforge_cli_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& contents) const {
        std::ofstream(path / name) << contents;
        return (path / name).string();
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string fixture_manifest() {
    std::vector<AnnotatedImage> imgs;
    imgs.push_back({"dots", 64, 48, "dot", {{{10, 10}, {40, 30}, {55, 20}}}, {{5, 5, 15, 15}}});
    imgs.push_back({"empty", 64, 48, "dot", {}, {{5, 5, 15, 15}}});
    imgs.push_back({"small", 768, 768, "a", {{{10, 10}}},
                    {{0, 0, 10, 10}, {100, 100, 110, 110}, {200, 200, 210, 210}}});
    imgs.push_back({"large", 768, 768, "a", {{{10, 10}}}, {{0, 0, 100, 100}}});
    return io::manifest_to_json(imgs);
}

}  // namespace

TEST_CASE("help documents the defaults") {
    const auto gl = run({"gl-loss", "--help"});
    CHECK(gl.code == 0);
    for (const char* s : {"--epsilon FLOAT [0.01]", "--tau FLOAT [0.5]", "--eta FLOAT [0.6]", "default 4"}) {
        CHECK_MESSAGE(gl.out.find(s) != std::string::npos, s);
    }
    const auto ttn = run({"ttn-plan", "--help"});
    CHECK(ttn.out.find("[8]") != std::string::npos);
    CHECK(ttn.out.find("[0.0002]") != std::string::npos);
    const auto render = run({"render-density", "--help"});
    CHECK(render.out.find("--stride INT [4]") != std::string::npos);
    CHECK(render.out.find("--sigma FLOAT [1]") != std::string::npos);
    for (const char* sub : {"gen-mosaic", "eval-metrics", "demo-recipe"}) CHECK(run({sub, "--help"}).code == 0);

    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"gl-loss"}).code == 2);
}

TEST_CASE("gen-mosaic") {
    TempDir dir;
    const auto manifest = dir.file("m.json", io::manifest_to_json(synth::images(24, 6, 2)));
    const auto r = run({"gen-mosaic", "--manifest", manifest, "--n-queries", "10", "--mode", "eval", "--seed", "4",
                        "--out", dir / "a.json", "--csv-out", dir / "a.csv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("pairs: 40") != std::string::npos);
    CHECK(io::mosaic_manifest_from_json(io::read_text(dir / "a.json")).pairs.size() == 40);
    CHECK(io::read_csv(dir / "a.csv").rows.size() == 40);

    run({"gen-mosaic", "--manifest", manifest, "--n-queries", "10", "--seed", "4", "--out", dir / "b.json"});
    CHECK(io::read_text(dir / "a.json") == io::read_text(dir / "b.json"));

    const auto train = run({"gen-mosaic", "--manifest", manifest, "--n-queries", "5", "--mode", "train", "--seed", "4",
                            "--out", dir / "t.json"});
    CHECK(train.code == 0);
    CHECK(train.out.find("pairs: 5") != std::string::npos);

    const auto bad = dir.file("bad.json", "{\"images\": [");
    const auto e = run({"gen-mosaic", "--manifest", bad, "--n-queries", "3", "--seed", "1", "--out", dir / "c.json"});
    CHECK(e.code == 2);
    CHECK_FALSE(fs::exists(dir / "c.json"));

    CHECK(run({"gen-mosaic", "--manifest", manifest, "--n-queries", "3", "--out", dir / "d.json"}).code == 2);
    CHECK(run({"gen-mosaic", "--manifest", manifest, "--n-queries", "3", "--seed", "1", "--mode", "test", "--out",
               dir / "d.json"}).code == 2);
}

TEST_CASE("eval-metrics") {
    TempDir dir;
    const auto pred = dir.file("pred.csv", "id,pred\na,12\nb,24\n");
    const auto gt = dir.file("gt.csv", "id,gt\na,10\nb,20\n");
    const auto r = run({"eval-metrics", "--pred", pred, "--gt", gt, "--out", dir / "r.json"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(io::read_text(dir / "r.json"));
    CHECK(j["report"]["mae"].get<double>() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(j["report"]["L"].get<int>() == 2);

    const auto skew_pred = dir.file("sp.csv", "id,pred\nbig,1500\ns1,12\ns2,9\n");
    const auto skew_gt = dir.file("sg.csv", "id,gt\nbig,1000\ns1,10\ns2,10\n");
    const auto ex = run({"eval-metrics", "--pred", skew_pred, "--gt", skew_gt, "--exclude-top", "2", "--bins", "3",
                         "--hist-out", dir / "h.csv"});
    REQUIRE(ex.code == 0);
    const auto je = json::parse(ex.out);
    CHECK(je.contains("report"));
    CHECK(je["exclusion"].contains("full"));
    CHECK(je["exclusion"].contains("excluded"));
    CHECK(je["exclusion"]["dropped_ids"].size() == 2);
    CHECK(je["distribution"].size() == 3);
    CHECK(io::read_csv(dir / "h.csv").rows.size() == 3);

    const auto missing = dir.file("missing.csv", "id,pred\na,12\n");
    CHECK(run({"eval-metrics", "--pred", missing, "--gt", gt}).code == 2);
    const auto extra = dir.file("extra.csv", "id,pred\na,12\nb,3\nc,4\n");
    CHECK(run({"eval-metrics", "--pred", extra, "--gt", gt}).code == 2);

    const auto zero_gt = dir.file("zero.csv", "id,gt\na,0\nb,20\n");
    const auto z = run({"eval-metrics", "--pred", pred, "--gt", zero_gt, "--out", dir / "z.json"});
    CHECK(z.code == 3);
    CHECK(z.err.find("'a'") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "z.json"));

    CHECK(run({"eval-metrics", "--pred", pred}).code == 2);

    // ground truth from an annotation manifest
    const auto manifest = dir.file("m.json", fixture_manifest());
    const auto mp = dir.file("mp.csv", "id,pred\ndots,3\nsmall,1\nlarge,2\n");
    const auto mz = run({"eval-metrics", "--pred", mp, "--manifest", manifest});
    CHECK(mz.code == 2);  // "empty" has no prediction
}

TEST_CASE("gl-loss") {
    TempDir dir;
    const auto manifest = dir.file("m.json", fixture_manifest());
    REQUIRE(run({"render-density", "--manifest", manifest, "--image", "dots", "--out", dir / "own.json"}).code == 0);
    const auto own = io::read_density(dir / "own.json");
    CHECK(own.height() == 12);
    CHECK(own.width() == 16);
    CHECK(total_count(own) == doctest::Approx(3.0).epsilon(1e-9));

    const DensityGrid uniform(12, 16, 4, std::vector<double>(192, 3.0 / 192));
    const auto uni = dir.file("uniform.json", io::density_to_json(uniform));

    // With tau = 0.5 and C >= 1 no mass is ever transported and the loss
    // reduces to tau |a|^2 + tau m, which favours spread-out mass; the
    // localization ordering needs a larger tau.
    const auto a = run({"gl-loss", "--density", dir / "own.json", "--manifest", manifest, "--image", "dots"});
    REQUIRE(a.code == 0);
    const auto ja = json::parse(a.out);
    const auto own2 = run({"gl-loss", "--density", dir / "own.json", "--manifest", manifest, "--image", "dots", "--tau", "2"});
    const auto uni2 = run({"gl-loss", "--density", uni, "--manifest", manifest, "--image", "dots", "--tau", "2"});
    REQUIRE(own2.code == 0);
    REQUIRE(uni2.code == 0);
    CHECK(json::parse(own2.out)["loss"].get<double>() < json::parse(uni2.out)["loss"].get<double>());
    CHECK(ja["count"].get<double>() == doctest::Approx(3.0));
    CHECK(ja["converged"].get<bool>());
    for (const char* key : {"loss", "count", "grad_norm", "iterations", "converged"}) CHECK(ja.contains(key));

    const auto explicit_defaults = run({"gl-loss", "--density", dir / "own.json", "--manifest", manifest, "--image",
                                        "dots", "--epsilon", "0.01", "--tau", "0.5", "--eta", "0.6"});
    CHECK(explicit_defaults.out == a.out);

    const auto zero = dir.file("zero.json", io::density_to_json(DensityGrid(12, 16, 4)));
    const auto e = run({"gl-loss", "--density", zero, "--manifest", manifest, "--image", "empty"});
    REQUIRE(e.code == 0);
    CHECK(json::parse(e.out)["loss"].get<double>() == 0.0);

    const auto wrong = dir.file("wrong.json", io::density_to_json(DensityGrid(10, 16, 4)));
    CHECK(run({"gl-loss", "--density", wrong, "--manifest", manifest, "--image", "dots"}).code == 2);
    CHECK(run({"gl-loss", "--density", zero, "--manifest", manifest, "--image", "dots", "--stride", "8"}).code == 2);
    CHECK(run({"gl-loss", "--density", zero, "--manifest", manifest, "--image", "nope"}).code == 2);
    CHECK(run({"gl-loss", "--density", zero, "--manifest", manifest, "--image", "dots", "--tau", "-1"}).code == 2);

    const auto capped = run({"gl-loss", "--density", uni, "--tau", "2", "--manifest", manifest, "--image", "dots", "--max-iters", "1",
                             "--tol", "1e-14", "--out", dir / "capped.json"});
    CHECK(capped.code == 4);
    CHECK_FALSE(json::parse(io::read_text(dir / "capped.json"))["converged"].get<bool>());
}

TEST_CASE("ttn-plan") {
    TempDir dir;
    const auto manifest = dir.file("m.json", fixture_manifest());
    const auto s = run({"ttn-plan", "--manifest", manifest, "--image", "small"});
    REQUIRE(s.code == 0);
    const auto js = json::parse(s.out);
    CHECK(js["normalize"].get<bool>());
    CHECK(js["tiles"].size() == 64);

    const auto l = json::parse(run({"ttn-plan", "--manifest", manifest, "--image", "large"}).out);
    CHECK_FALSE(l["normalize"].get<bool>());
    CHECK(l["tiles"].size() == 1);

    const auto one = json::parse(run({"ttn-plan", "--manifest", manifest, "--image", "small", "--tiles-M", "1"}).out);
    CHECK_FALSE(one["normalize"].get<bool>());
    CHECK(one["tiles"].size() == 1);

    CHECK(run({"ttn-plan", "--manifest", manifest, "--image", "small", "--threshold-T", "0"}).code == 2);
    CHECK(run({"ttn-plan", "--manifest", manifest, "--image", "small", "--tiles-M", "0"}).code == 2);
}

TEST_CASE("demo-recipe shapes") {
    TempDir dir;
    const auto cfg = dir.file("demo.json", R"({"train_scenes": 2, "eval_scenes": 3, "train": {"epochs": 0}})");
    const auto r = run({"demo-recipe", "--config", cfg, "--seed", "5", "--out", dir / "ab.csv"});
    CHECK(r.code == 0);
    const auto table = io::read_csv(dir / "ab.csv");
    CHECK(table.rows.size() == 5);
    CHECK(table.rows.back()[0] == "aggregate");
    CHECK(table.rows.back().back() == "warning_not_asserted");
    CHECK(fs::exists(dir / "ab_trace.csv"));

    const auto two = run({"demo-recipe", "--config", cfg, "--seed", "1,2", "--out", dir / "two.csv"});
    CHECK(two.code == 0);
    CHECK(io::read_csv(dir / "two.csv").rows.size() == 9);

    CHECK(run({"demo-recipe", "--config", dir / "none.json", "--out", dir / "x.csv"}).code == 2);
    CHECK_FALSE(fs::exists(dir / "x.csv"));
}
