// One PASS/FAIL line per acceptance criterion; exit status is non-zero if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "vikin/bench.hpp"
#include "vikin/sim.hpp"
#include "vikin/spline.hpp"

using namespace vikin;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = o.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %d (%s): %s; %.3f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", id, title,
                o.detail.c_str(), secs, budget_s, in_time ? "" : " OVER BUDGET");
}

std::string num(double v, int prec = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

double dense_ops(int g) {
    auto spec = model::SynthSpec::parse("kan:72,32,96");
    spec.grid_size = g;
    spec.order = 3;
    return static_cast<double>(sim::count_operations(model::synth_model(spec), sim::Counting::Dense).total());
}

}  // namespace

int main() {
    criterion(1, "ops ratio G=16 vs G=2", 1.0, [] {
        const double r = dense_ops(16) / dense_ops(2);
        return Outcome{r >= 2.96 && r <= 3.66, "ops ratio " + num(r) + " in [2.96, 3.66]"};
    });

    criterion(2, "latency decoupled from ops", 10.0, [] {
        const auto rf = bench::cmd_sweep(bench::RunSpec::from_json({{"recipe", "fig8"}}));
        const double lat = rf.headline["latency_ratio"];
        const double ops = rf.headline["ops_ratio"];
        return Outcome{lat <= 1.6 && ops >= 3.0, "latency ratio " + num(lat) + " <= 1.6, ops ratio " + num(ops) + " >= 3.0"};
    });

    criterion(3, "two-stage speedup trend", 30.0, [] {
        const auto rf = bench::cmd_sweep(bench::RunSpec::from_json({{"recipe", "fig7"}}));
        std::vector<double> s;
        for (const auto& r : rf.rows) s.push_back(r.report.speedup_vs_baseline);
        bool nondecreasing = true;
        for (std::size_t i = 1; i < s.size(); ++i) nondecreasing = nondecreasing && s[i] >= s[i - 1];
        const std::size_t n = s.size();
        const bool diminishing = n >= 3 && s[n - 1] - s[n - 2] <= s[n - 2] - s[n - 3];
        const double top = s.back();
        std::string curve;
        for (double v : s) curve += (curve.empty() ? "" : " ") + num(v);
        return Outcome{nondecreasing && diminishing && top >= 2.0 && top <= 3.0,
                       "speedups [" + curve + "], non-decreasing " + (nondecreasing ? "yes" : "no") +
                           ", top increment diminishing " + (diminishing ? "yes" : "no") + ", 75% in [2, 3]"};
    });

    criterion(4, "PE work reduction bound", 1.0, [] {
        constexpr std::size_t n = 10000;
        std::mt19937_64 rng(7);
        std::bernoulli_distribution zero(0.5);
        std::uniform_real_distribution<double> val(0.1, 1.0);
        model::Vector x(n);
        for (double& v : x) v = zero(rng) ? 0.0 : val(rng);

        model::Network net;
        auto layer = model::MlpLayer::zeros(n, 16, model::Activation::None);
        for (double& w : layer.weights) w = val(rng);
        net.layers.emplace_back(std::move(layer));
        sim::SimConfig cfg;
        cfg.mode = sim::SimMode::ParallelMlp;
        cfg.spu_accumulation = false;
        const std::vector<model::Vector> inputs{x};
        const model::MaskSet masks{sparsity::PatternMask::parse("1000")};
        const auto r = sim::simulate(net, inputs, masks, cfg).report;
        const double red = static_cast<double>(r.ops.skipped_pe_macs) / static_cast<double>(r.ops.dense_macs);
        return Outcome{std::abs(red - 0.875) <= 0.01, "PE-MAC reduction " + num(100 * red, 2) + "% (target 87.5 +- 1)"};
    });

    criterion(5, "MLP parallel-mode gain", 30.0, [] {
        const auto rf = bench::cmd_run(bench::RunSpec::from_json(
            {{"synth", "mlp:72,304,96"}, {"mode", "mlp-parallel"}, {"zero_fraction", 0.3}}));
        const auto& row = rf.rows.front();
        const double skip = row.speedup_zero_skip_only;
        const double both = row.report.speedup_vs_baseline;
        return Outcome{skip >= 1.3 && both <= 2.2,
                       "zero-skip only " + num(skip) + " >= 1.3, with SPU accumulation " + num(both) + " <= 2.2"};
    });

    criterion(6, "difference-reuse saving", 1.0, [] {
        double sum = 0.0;
        for (int g : {2, 4, 8, 16}) sum += spline::eval_basis_with_reuse(spline::build_knots(g, 3), 0.1).counts.saving();
        const double avg = sum / 4.0;
        return Outcome{avg >= 0.14 && avg <= 0.28, "average saving " + num(100 * avg, 1) + "% in [14, 28]"};
    });

    criterion(7, "property suite", 120.0, [] {
        const auto s = bench::cmd_verify();
        std::string failed;
        for (const auto& p : s.properties) {
            if (!p.passed) failed += " " + p.name + "(" + p.detail + ")";
        }
        return Outcome{s.all_passed(), std::to_string(s.properties.size()) + " properties" +
                                           (failed.empty() ? ", all green" : ", failing:" + failed)};
    });

    return failures == 0 ? 0 : 1;
}
