#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vikin/errors.hpp"
#include "vikin/sim.hpp"

using namespace vikin;
using namespace vikin::sim;
using model::Activation;
using model::KanLayer;
using model::MlpLayer;
using model::SynthSpec;

namespace {

Network tiny_kan() {
    auto l = KanLayer::zeros(1, 1, spline::build_knots(2, 1));
    l.w_b = {2.0};
    l.t = {1.0, 3.0, 5.0};
    Network net;
    net.layers = {l};
    return net;
}

SimConfig kan_cfg() {
    SimConfig c;
    c.mode = SimMode::PipelineKan;
    return c;
}

SimConfig mlp_cfg(bool spu) {
    SimConfig c;
    c.mode = SimMode::ParallelMlp;
    c.spu_accumulation = spu;
    return c;
}

}  // namespace

TEST_CASE("pipeline cycles on a hand-traced single edge") {
    // G=2, K=1, x=0.5. Stage 1: SPU 5 knots + 3 bases = 8, then 3 TSE elements -> 11.
    // Stage 2: 2 nonzero bases + SiLU = 3 MACs. One tile: 11 + 3 = 14.
    // Baseline: 8 SPU cycles + 4 dense MACs = 12.
    const std::vector<Vector> in{{0.5}};
    const auto r = simulate(tiny_kan(), in, {}, kan_cfg()).report;
    CHECK(r.stage1_cycles == 11);
    CHECK(r.stage2_cycles == 3);
    CHECK(r.total_cycles == 14);
    CHECK(r.baseline_cycles == 12);
    CHECK(r.ops.pe_macs == 3);
    CHECK(r.ops.skipped_pe_macs == 1);
    CHECK(r.ops.dense_macs == 4);
}

TEST_CASE("dense and pruned op totals on a hand count") {
    // Dense: 4 MACs (3 bases + SiLU), 26 basis ops, 1 SiLU -> 2*4 + 26 + 1.
    CHECK(count_operations(tiny_kan(), Counting::Dense).total() == 35);
    // Pruned: 3 MACs, 3 + 7*2 basis ops, 1 SiLU.
    CHECK(count_operations(tiny_kan(), Counting::SupportPruned).total() == 24);
}

TEST_CASE("mode and network kind must agree") {
    const auto mlp = model::synth_model(SynthSpec::parse("mlp:8,4"));
    const std::vector<Vector> in{Vector(8, 0.5)};
    CHECK_THROWS_AS(simulate(mlp, in, {}, kan_cfg()), ModeError);
    const std::vector<Vector> kin{{0.5}};
    CHECK_THROWS_AS(simulate(tiny_kan(), kin, {}, mlp_cfg(true)), ModeError);
    CHECK(parse_mode("baseline") == SimMode::BaselineDense);
    CHECK_THROWS_AS(parse_mode("turbo"), ConfigError);
}

TEST_CASE("config validation") {
    SimConfig c;
    c.n_spu = 17;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.weight_banks = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.costs.pe_mac = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("weight buffer bandwidth per mode") {
    SimConfig c;
    const auto kan = WeightBufferScheme::for_mode(c, SimMode::PipelineKan);
    CHECK(kan.grouping == BankGrouping::KanTwoBanksStacked);
    CHECK(kan.pe_weights_per_cycle == 32);
    const auto mlp = WeightBufferScheme::for_mode(c, SimMode::ParallelMlp);
    CHECK(mlp.grouping == BankGrouping::MlpFourBanksParallel);
    CHECK(mlp.pe_weights_per_cycle == 16);
    CHECK(mlp.spu_weights_per_cycle == 16);
    const auto base = WeightBufferScheme::for_mode(c, SimMode::BaselineDense);
    CHECK(base.grouping == BankGrouping::PeOnly);
    CHECK(base.pe_weights_per_cycle == 32);
}

TEST_CASE("narrow weight words stall the PE array") {
    const auto net = model::synth_model(SynthSpec::parse("kan:32,32"));
    const auto in = model::synth_inputs(net, 2, 1, 0.0);
    auto narrow = kan_cfg();
    narrow.weights_per_word = 1;
    const auto wide = simulate(net, in, {}, kan_cfg()).report;
    const auto slow = simulate(net, in, {}, narrow).report;
    CHECK(wide.bank_conflicts == 0);
    CHECK(slow.bank_conflicts > 0);
    CHECK(slow.total_cycles > wide.total_cycles);
}

TEST_CASE("MLP mode encodes each layer input once in a multiple-of-4 slice") {
    Network net;
    net.layers = {MlpLayer::zeros(72, 16, Activation::None)};
    const std::vector<Vector> in{Vector(72, 1.0)};
    const auto r = simulate(net, in, {}, mlp_cfg(true)).report;
    // ceil(72/16) = 5, rounded up to 8.
    CHECK(r.stage1_cycles == 8);
}

TEST_CASE("SPU accumulation speeds up the parallel mode") {
    auto net = model::synth_model(SynthSpec::parse("mlp:72,304,96"));
    const auto in = model::synth_inputs(net, 16, 1, 0.0);
    net = model::calibrate_relu_sparsity(std::move(net), in, 0.3);
    const auto pe = simulate(net, in, {}, mlp_cfg(false)).report;
    const auto both = simulate(net, in, {}, mlp_cfg(true)).report;
    CHECK(both.total_cycles < pe.total_cycles);
    CHECK(pe.ops.spu_macs == 0);
    CHECK(both.ops.spu_macs > 0);
    CHECK(pe.conserves_macs());
    CHECK(both.conserves_macs());
}

TEST_CASE("baseline mode ignores sparsity and matches the unmasked reference") {
    const auto net = model::synth_model(SynthSpec::parse("kan:16,8"));
    const auto in = model::synth_inputs(net, 4, 1, 0.5);
    SimConfig c;
    c.mode = SimMode::BaselineDense;
    const auto res = simulate(net, in, {}, c);
    CHECK(res.report.ops.skipped_pe_macs == 0);
    CHECK(res.report.total_cycles == res.report.baseline_cycles);
    CHECK(matches_reference(net, in, {}, c.policy, res.outputs));
}

TEST_CASE("sweep points are sorted and carry dense op totals") {
    SweepSpec s;
    s.net_template = SynthSpec::parse("kan:16,16");
    s.param = SweepParam::GridSize;
    s.values = {8, 2, 4};
    s.batch = 4;
    const auto pts = sweep(s);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].value == 2);
    CHECK(pts[2].value == 8);
    CHECK(pts[0].dense_ops.total() < pts[2].dense_ops.total());
    CHECK(parse_sweep_param("pattern_rate") == SweepParam::PatternRate);
    CHECK_THROWS_AS(parse_sweep_param("depth"), ConfigError);
}

TEST_CASE("property: sparse execution equals the reference bit for bit") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto spec = SynthSpec::parse(seed % 2 ? "kan:20,9,5" : "mlp:20,40,5");
        spec.seed = seed;
        const auto net = model::synth_model(spec, 0.3);
        const auto in = model::synth_inputs(net, 3, seed, 0.4);
        const model::MaskSet masks(2, sparsity::PatternMask::from_rate(static_cast<int>(seed % 4) * 25));
        const auto cfg = seed % 2 ? kan_cfg() : mlp_cfg(seed % 4 == 0);
        const auto res = simulate(net, in, masks, cfg);
        CHECK(matches_reference(net, in, masks, cfg.policy, res.outputs));
        CHECK(res.report.conserves_macs());
    }
}

TEST_CASE("property: more input zeros never cost more cycles") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto spec = SynthSpec::parse("mlp:48,64,16");
        spec.seed = seed;
        const auto net = model::synth_model(spec);
        auto in = model::synth_inputs(net, 2, seed, 0.0);
        std::uint64_t prev = UINT64_MAX;
        for (std::size_t zeroed = 0; zeroed <= 48; zeroed += 8) {
            for (auto& x : in) std::fill(x.begin(), x.begin() + zeroed, 0.0);
            const auto c = simulate(net, in, {}, mlp_cfg(false)).report.total_cycles;
            CHECK(c <= prev);
            prev = c;
        }
    }
}
