#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vikin/bench.hpp"
#include "vikin/errors.hpp"

namespace {

using nlohmann::json;

struct Flags {
    std::string config, model, synth, mask, mode, precision, recipe, sweep_param, values, out;
    int g = 0, k = 0;
    double zero_fraction = -1, weight_zero_fraction = -1;
    std::uint64_t seed = 0, batch = 0;
    CLI::App* app = nullptr;

    bool given(const char* name) const { return app->count(name) > 0; }
};

void add_run_flags(CLI::App* sub, Flags& f) {
    f.app = sub;
    sub->add_option("--config", f.config, "JSON run config (flags override it)");
    sub->add_option("--model", f.model, "model file");
    sub->add_option("--synth", f.synth, "synthetic model, e.g. kan:72,32,96");
    sub->add_option("--g", f.g, "grid size for --synth");
    sub->add_option("--k", f.k, "spline order for --synth");
    sub->add_option("--mask", f.mask, "pattern mask, e.g. 1010, or one per layer separated by commas");
    sub->add_option("--mode", f.mode, "kan-pipeline | mlp-parallel | baseline");
    sub->add_option("--zero-fraction", f.zero_fraction, "activation zero fraction");
    sub->add_option("--weight-zero-fraction", f.weight_zero_fraction, "weight zero fraction for --synth");
    sub->add_option("--seed", f.seed, "seed for synthetic weights and inputs");
    sub->add_option("--batch", f.batch, "input batch size");
    sub->add_option("--precision", f.precision, "f64 | f16-emu");
    sub->add_option("--recipe", f.recipe, "fig6 | fig7 | fig8");
    sub->add_option("--sweep-param", f.sweep_param, "G | pattern_rate | zero_fraction");
    sub->add_option("--values", f.values, "comma-separated sweep values");
    sub->add_option("--out", f.out, "output prefix for .csv and .json");
}

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw vikin::ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw vikin::ParseError(path + ": " + e.what());
    }
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw vikin::ConfigError("bad sweep value \"" + tok + "\"");
        }
    }
    return out;
}

vikin::bench::RunSpec resolve(const Flags& f) {
    json j = f.config.empty() ? json::object() : read_config_file(f.config);
    json flags = json::object();
    if (f.given("--model")) flags["model"] = f.model;
    if (f.given("--synth")) flags["synth"] = f.synth;
    if (f.given("--g")) flags["g"] = f.g;
    if (f.given("--k")) flags["k"] = f.k;
    if (f.given("--mask")) flags["mask"] = f.mask;
    if (f.given("--mode")) flags["mode"] = f.mode;
    if (f.given("--zero-fraction")) flags["zero_fraction"] = f.zero_fraction;
    if (f.given("--weight-zero-fraction")) flags["weight_zero_fraction"] = f.weight_zero_fraction;
    if (f.given("--seed")) flags["seed"] = f.seed;
    if (f.given("--batch")) flags["batch"] = f.batch;
    if (f.given("--precision")) flags["precision"] = f.precision;
    if (f.given("--recipe")) flags["recipe"] = f.recipe;
    if (f.given("--sweep-param")) flags["sweep"]["param"] = f.sweep_param;
    if (f.given("--values")) flags["sweep"]["values"] = parse_values(f.values);
    if (f.given("--out")) flags["out"] = f.out;
    j.merge_patch(flags);
    return vikin::bench::RunSpec::from_json(j);
}

void emit(const vikin::bench::ReportFile& rf, const vikin::bench::RunSpec& spec) {
    if (spec.out) {
        rf.write(*spec.out);
        std::cerr << "wrote " << *spec.out << ".csv and " << *spec.out << ".json\n";
    }
    std::cout << rf.csv();
    std::cout << json{{"verdicts", rf.verdicts}, {"headline", rf.headline}}.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vikin: sparse KAN/MLP accelerator simulator"};
    app.require_subcommand(1);

    Flags run_flags, sweep_flags;
    auto* run = app.add_subcommand("run", "simulate one configuration");
    add_run_flags(run, run_flags);
    auto* sweep = app.add_subcommand("sweep", "simulate a parameter sweep");
    add_run_flags(sweep, sweep_flags);

    auto* verify = app.add_subcommand("verify", "run the property checks");
    std::uint64_t verify_seed = 2024;
    bool inject_fault = false;
    verify->add_option("--seed", verify_seed, "RNG seed for the property checks");
    verify->add_flag("--inject-fault", inject_fault)->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto spec = resolve(run_flags);
            emit(vikin::bench::cmd_run(spec), spec);
        } else if (sweep->parsed()) {
            const auto spec = resolve(sweep_flags);
            emit(vikin::bench::cmd_sweep(spec), spec);
        } else {
            const auto summary = vikin::bench::cmd_verify({inject_fault, verify_seed});
            for (const auto& p : summary.properties) {
                std::cout << (p.passed ? "PASS " : "FAIL ") << p.name;
                if (!p.passed) std::cout << ": " << p.detail;
                std::cout << '\n';
            }
            return summary.all_passed() ? 0 : 1;
        }
    } catch (const vikin::ModeError& e) {
        std::cerr << "mode error: " << e.what() << '\n';
        return 3;
    } catch (const vikin::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const vikin::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const vikin::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
