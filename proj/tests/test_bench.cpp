#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vikin/bench.hpp"
#include "vikin/errors.hpp"

using namespace vikin;
using namespace vikin::bench;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing names the offending field") {
    CHECK_THROWS_WITH_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"bogus", 1}}), doctest::Contains("bogus"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"batch", "many"}}), doctest::Contains("batch"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"sim", {{"n_pee", 4}}}}),
                         doctest::Contains("sim.n_pee"), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"precision", "f8"}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"g", 5}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_json({{"synth", "kan:4,4"}, {"mask", "11"}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_json(json::object()), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_json({{"recipe", "fig9"}}), ConfigError);
}

TEST_CASE("explicit fields override the recipe") {
    const auto s = RunSpec::from_json({{"recipe", "fig8"}, {"batch", 8}, {"sweep", {{"values", {2, 4}}}}});
    CHECK(s.batch == 8);
    CHECK(s.sweep_values == std::vector<double>{2, 4});
    CHECK(*s.sweep_param == sim::SweepParam::GridSize);
    CHECK(s.synth->sizes == std::vector<std::size_t>{72, 32, 96});
}

TEST_CASE("echoed config reproduces the same spec") {
    const auto a = RunSpec::from_json({{"synth", "kan:8,4"}, {"g", 8}, {"mask", "1010"}, {"precision", "f16-emu"}});
    const auto b = RunSpec::from_json(a.to_json());
    CHECK(a.to_json() == b.to_json());
    CHECK(b.sim.policy.enabled);
    CHECK(b.synth->grid_size == 8);
}

TEST_CASE("run rejects a network that does not fit the mode") {
    const auto s = RunSpec::from_json({{"synth", "kan:8,4"}, {"mode", "mlp-parallel"}});
    CHECK_THROWS_AS(cmd_run(s), ModeError);
}

TEST_CASE("run rejects a mask list of the wrong length") {
    const auto s = RunSpec::from_json({{"synth", "kan:8,4,2"}, {"mask", "1010,1000,1110"}});
    CHECK_THROWS_AS(cmd_run(s), ConfigError);
}

TEST_CASE("sweep needs values, a parameter, and a synthetic model") {
    CHECK_THROWS_WITH_AS(cmd_sweep(RunSpec::from_json({{"recipe", "fig7"}, {"sweep", {{"values", json::array()}}}})),
                         "empty sweep values", ConfigError);
    CHECK_THROWS_AS(cmd_sweep(RunSpec::from_json({{"synth", "kan:8,4"}})), ConfigError);
}

TEST_CASE("run reports are deterministic and conserve MACs") {
    const auto s = RunSpec::from_json({{"synth", "mlp:16,32,8"}, {"mode", "mlp-parallel"}, {"zero_fraction", 0.3}});
    const auto a = cmd_run(s);
    const auto b = cmd_run(s);
    CHECK(a.csv() == b.csv());
    CHECK(a.metadata() == b.metadata());
    CHECK(a.verdicts["functional_equivalence"] == true);
    CHECK(a.verdicts["mac_conservation"] == true);
    CHECK(a.rows.front().speedup_zero_skip_only > 0.0);
}

TEST_CASE("report files land next to each other and echo the config") {
    const auto dir = std::filesystem::temp_directory_path() / "vikin_bench_test";
    std::filesystem::create_directories(dir);
    const auto prefix = (dir / "fig7").string();
    const auto s = RunSpec::from_json({{"recipe", "fig7"}, {"batch", 4}});
    const auto rf = cmd_sweep(s);
    rf.write(prefix);
    const auto meta = json::parse(slurp(prefix + ".json"));
    CHECK(meta["config"]["recipe"] == "fig7");
    CHECK(meta["rows"] == 4);
    CHECK(meta["headline"]["speedup_curve"].size() == 4);
    const auto csv = slurp(prefix + ".csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(RunSpec::from_json(meta["config"]).to_json() == s.to_json());
    std::filesystem::remove_all(dir);
}

TEST_CASE("runs from a model file") {
    const auto path = std::filesystem::temp_directory_path() / "vikin_bench_model.vikn";
    model::save_model(model::synth_model(model::SynthSpec::parse("kan:6,6")), path);
    const auto rf = cmd_run(RunSpec::from_json({{"model", path.string()}, {"mask", "1110"}}));
    std::filesystem::remove(path);
    CHECK(rf.rows.size() == 1);
    CHECK(rf.rows.front().report.speedup_vs_baseline > 0.0);
}

TEST_CASE("verify is green and catches an injected basis fault") {
    CHECK(cmd_verify().all_passed());
    const auto bad = cmd_verify({true, 2024});
    CHECK_FALSE(bad.all_passed());
    bool caught_pou = false;
    for (const auto& p : bad.properties) caught_pou = caught_pou || (p.name == "partition_of_unity" && !p.passed);
    CHECK(caught_pou);
}
