#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cli.hpp"
#include "commands.hpp"
#include "csvio.hpp"

using namespace matmuon;
using namespace matmuon::cli;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_doc() {
    return nlohmann::json{
        {"problem",
         {{"kind", "matrix_regression"}, {"m", 4}, {"n", 3}, {"noise_sigma", 0.2},
          {"gt_seed", 42}}},
        {"data", {{"n_samples", 20}, {"data_seed", 7}}},
        {"optimizer", {{"name", "mimuon"}}},
        {"run", {{"steps", 12}, {"index_seed", 8}, {"seeds", {0, 1}}}},
        {"experiment", {{"type", "train"}}}};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "matmuon_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("format_double produces shortest round-trip text") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5e-7) == "-2.5e-07");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("config parsing fills defaults and rejects unknown keys") {
    const ExperimentConfig cfg = parse_config(minimal_doc());
    CHECK(cfg.hp.eta == doctest::Approx(0.02));
    CHECK(cfg.hp.beta == doctest::Approx(1.0 / 1.95));
    CHECK(cfg.hp.tau == doctest::Approx(0.01));
    CHECK(cfg.hp.ns_steps == 5);
    CHECK(cfg.hp.musgd_w_mu == doctest::Approx(0.7));
    CHECK(cfg.hp.musgd_w_sgd == doctest::Approx(0.4));
    CHECK(cfg.gt_scale == doctest::Approx(1.0));
    CHECK_FALSE(cfg.w0.random);

    auto doc = minimal_doc();
    doc["problem"]["typo"] = 1;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["frobnicate"] = true;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc.erase("data");
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["optimizer"]["name"] = "adamw";
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["run"]["seeds"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_config(doc), ConfigError);

    doc = minimal_doc();
    doc["data"]["data_seed"] = -4;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("per-type required fields") {
    auto doc = minimal_doc();
    doc["experiment"] = {{"type", "stability"}};
    CHECK_THROWS_AS(parse_config(doc), ConfigError); // replace_index missing

    doc["experiment"] = {{"type", "stability"}, {"replace_index", 25},
                         {"replacement_seed", 1}};
    CHECK_THROWS_AS(parse_config(doc), ConfigError); // out of [0, n_samples)

    doc["experiment"] = {{"type", "probe"}, {"n_pairs", 10}, {"m", 1}, {"n", 4},
                         {"probe_seed", 1}};
    CHECK_THROWS_AS(parse_config(doc), ConfigError); // probe dims >= 2

    doc["experiment"] = {{"type", "convergence"}, {"t_values", {100, 1000}}, {"eta_c", 0.0}};
    CHECK_THROWS_AS(parse_config(doc), ConfigError); // eta_c > 0
}

TEST_CASE("resolved config round-trips through the parser") {
    auto doc = minimal_doc();
    doc["run"]["w0"] = {{"kind", "random"}, {"seed", 3}, {"scale", 0.25}};
    doc["experiment"] = {{"type", "sweep"}, {"taus", {0.002, 0.005, 0.01, 0.02}},
                         {"replace_index", 2}, {"replacement_seed", 9}};
    const ExperimentConfig cfg = parse_config(doc);
    const auto resolved = cfg.resolved_json();
    const ExperimentConfig cfg2 = parse_config(resolved);
    CHECK(cfg2.resolved_json() == resolved);
    CHECK(cfg2.w0.random);
    CHECK(cfg2.w0.scale == doctest::Approx(0.25));
    CHECK(cfg2.taus == std::vector<double>{0.002, 0.005, 0.01, 0.02});
}

TEST_CASE("summary embeds a replayable config that reproduces traces bitwise") {
    const fs::path dir_a = fresh_dir("replay_a");
    const ExperimentConfig cfg = parse_config(minimal_doc());
    REQUIRE(run_command(CommandContext{cfg, dir_a, 1}) == 0);

    const auto summary = nlohmann::json::parse(read_file(dir_a / "summary.json"));
    const ExperimentConfig replay = parse_config(summary.at("resolved_config"));

    const fs::path dir_b = fresh_dir("replay_b");
    REQUIRE(run_command(CommandContext{replay, dir_b, 1}) == 0);

    for (const std::string seed : {"seed_0", "seed_1"})
        CHECK(read_file(dir_a / seed / "trace.csv") == read_file(dir_b / seed / "trace.csv"));
}

TEST_CASE("train command writes the documented trace schema") {
    const fs::path dir = fresh_dir("schema");
    auto doc = minimal_doc();
    doc["run"]["steps"] = 0;
    doc["run"]["seeds"] = {5};
    REQUIRE(run_command(CommandContext{parse_config(doc), dir, 1}) == 0);
    const std::string text = read_file(dir / "seed_5" / "trace.csv");
    CHECK(text.rfind("t,loss,grad_norm,mom_norm,kappa,branch\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2); // header + t=0 row
}

TEST_CASE("dump_dataset emits the audit csv") {
    const fs::path dir = fresh_dir("dump");
    auto doc = minimal_doc();
    doc["run"]["seeds"] = {0};
    doc["experiment"]["dump_dataset"] = true;
    REQUIRE(run_command(CommandContext{parse_config(doc), dir, 1}) == 0);
    const std::string text = read_file(dir / "seed_0" / "dataset.csv");
    CHECK(text.rfind("id,x0,x1,x2,y0,y1,y2,y3\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 21); // header + 20 samples
}

TEST_CASE("every optimizer name runs through the command layer") {
    for (const std::string name : {"sgdm", "muon", "mimuon", "musgd"}) {
        auto doc = minimal_doc();
        doc["optimizer"]["name"] = name;
        doc["run"]["seeds"] = {0};
        const fs::path dir = fresh_dir("opt_" + name);
        CHECK(run_command(CommandContext{parse_config(doc), dir, 1}) == 0);
    }
}

TEST_CASE("divergence maps to exit code 3") {
    auto doc = minimal_doc();
    doc["optimizer"] = {{"name", "sgdm"}, {"eta", 1e3}, {"beta", 1.0}};
    doc["run"]["steps"] = 500;
    const fs::path dir = fresh_dir("diverge");
    CHECK(run_command(CommandContext{parse_config(doc), dir, 1}) == 3);
}

TEST_CASE("threaded and serial campaigns produce identical bytes") {
    auto doc = minimal_doc();
    doc["run"]["seeds"] = {0, 1, 2, 3};
    const ExperimentConfig cfg = parse_config(doc);
    const fs::path serial = fresh_dir("serial");
    const fs::path threaded = fresh_dir("threaded");
    REQUIRE(run_command(CommandContext{cfg, serial, 1}) == 0);
    REQUIRE(run_command(CommandContext{cfg, threaded, 4}) == 0);
    for (int s = 0; s < 4; ++s) {
        const std::string rel = "seed_" + std::to_string(s);
        CHECK(read_file(serial / rel / "trace.csv") == read_file(threaded / rel / "trace.csv"));
    }
    CHECK(read_file(serial / "summary.json") == read_file(threaded / "summary.json"));
}

TEST_CASE("run_cli parses flags and runs end to end") {
    const fs::path dir = fresh_dir("cli");
    const fs::path cfg_path = dir / "cfg.json";
    {
        std::ofstream out(cfg_path);
        out << minimal_doc().dump(2);
    }
    CHECK(run_cli({"train", "--config", cfg_path.string(), "--out",
                   (dir / "out").string(), "--threads", "1"}) == 0);
    CHECK(fs::exists(dir / "out" / "summary.json"));

    CHECK(run_cli({"train", "--out", (dir / "out2").string()}) == 2); // missing --config
    CHECK(run_cli({"stability", "--config", cfg_path.string(), "--out",
                   (dir / "out3").string()}) == 2); // type mismatch
}
