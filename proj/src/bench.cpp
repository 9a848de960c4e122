#include "vikin/bench.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "vikin/errors.hpp"

namespace vikin::bench {

namespace {

using nlohmann::json;

constexpr int kReportFormatVersion = 1;

const std::vector<std::string> kKnownKeys = {"model", "synth", "g", "k", "mask", "mode", "zero_fraction",
                                             "weight_zero_fraction", "seed", "batch", "precision", "recipe",
                                             "sweep", "sim", "out"};

template <typename T>
T get_field(const json& j, const std::string& path, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config field \"" + path + key + "\": " + e.what());
    }
}

template <typename T>
void read_opt(const json& j, const std::string& path, const char* key, T& dst) {
    if (j.contains(key)) dst = get_field<T>(j, path, key);
}

void read_sim(const json& j, sim::SimConfig& cfg) {
    const std::string p = "sim.";
    for (const auto& [key, _] : j.items()) {
        static const std::vector<std::string> known = {"n_spu", "n_pe", "simd_lanes", "weight_banks",
                                                       "bank_words_per_cycle", "weights_per_word",
                                                       "spu_accumulation", "costs", "energy"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config field \"sim." + key + "\"");
        }
    }
    read_opt(j, p, "n_spu", cfg.n_spu);
    read_opt(j, p, "n_pe", cfg.n_pe);
    read_opt(j, p, "simd_lanes", cfg.simd_lanes);
    read_opt(j, p, "weight_banks", cfg.weight_banks);
    read_opt(j, p, "bank_words_per_cycle", cfg.bank_words_per_cycle);
    read_opt(j, p, "weights_per_word", cfg.weights_per_word);
    read_opt(j, p, "spu_accumulation", cfg.spu_accumulation);
    if (j.contains("costs")) {
        const json& c = j["costs"];
        const std::string cp = "sim.costs.";
        read_opt(c, cp, "spu_diff_setup_per_knot", cfg.costs.spu_diff_setup_per_knot);
        read_opt(c, cp, "spu_per_basis_per_order", cfg.costs.spu_per_basis_per_order);
        read_opt(c, cp, "spu_mac", cfg.costs.spu_mac);
        read_opt(c, cp, "pe_mac", cfg.costs.pe_mac);
        read_opt(c, cp, "simd_silu_per_lane", cfg.costs.simd_silu_per_lane);
        read_opt(c, cp, "tse_encode_per_element", cfg.costs.tse_encode_per_element);
    }
    if (j.contains("energy")) {
        const json& e = j["energy"];
        read_opt(e, "sim.energy.", "spu_op", cfg.energy.spu_op);
        read_opt(e, "sim.energy.", "mac", cfg.energy.mac);
        read_opt(e, "sim.energy.", "simd_op", cfg.energy.simd_op);
    }
}

json sim_to_json(const sim::SimConfig& c) {
    return {{"n_spu", c.n_spu},
            {"n_pe", c.n_pe},
            {"simd_lanes", c.simd_lanes},
            {"weight_banks", c.weight_banks},
            {"bank_words_per_cycle", c.bank_words_per_cycle},
            {"weights_per_word", c.weights_per_word},
            {"spu_accumulation", c.spu_accumulation},
            {"costs",
             {{"spu_diff_setup_per_knot", c.costs.spu_diff_setup_per_knot},
              {"spu_per_basis_per_order", c.costs.spu_per_basis_per_order},
              {"spu_mac", c.costs.spu_mac},
              {"pe_mac", c.costs.pe_mac},
              {"simd_silu_per_lane", c.costs.simd_silu_per_lane},
              {"tse_encode_per_element", c.costs.tse_encode_per_element}}},
            {"energy", {{"spu_op", c.energy.spu_op}, {"mac", c.energy.mac}, {"simd_op", c.energy.simd_op}}}};
}

std::vector<std::string> split_masks(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

sparsity::PatternMask parse_mask(const std::string& s) {
    return s == "off" ? sparsity::PatternMask{} : sparsity::PatternMask::parse(s);
}

model::MaskSet resolve_masks(const RunSpec& spec, std::size_t layers) {
    if (spec.masks.empty()) return {};
    if (spec.masks.size() == 1) return model::MaskSet(layers, parse_mask(spec.masks.front()));
    if (spec.masks.size() != layers) {
        throw ConfigError("mask list has " + std::to_string(spec.masks.size()) + " entries for " +
                          std::to_string(layers) + " layers");
    }
    model::MaskSet m;
    for (const auto& s : spec.masks) m.push_back(parse_mask(s));
    return m;
}

model::SynthSpec effective_synth(const RunSpec& spec) {
    model::SynthSpec s = *spec.synth;
    s.seed = spec.seed;
    return s;
}

void check_mode(model::NetworkKind kind, sim::SimMode mode) {
    if (mode == sim::SimMode::PipelineKan && kind != model::NetworkKind::Kan) {
        throw ModeError("mode kan-pipeline needs a KAN network, got " + model::to_string(kind));
    }
    if (mode == sim::SimMode::ParallelMlp && kind != model::NetworkKind::Mlp) {
        throw ModeError("mode mlp-parallel needs an MLP network, got " + model::to_string(kind));
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

json headline_for(const std::vector<ReportRow>& rows) {
    json h;
    if (rows.empty()) return h;
    const auto& first = rows.front();
    const auto& last = rows.back();
    h["ops_ratio"] = static_cast<double>(last.dense_ops.total()) / static_cast<double>(first.dense_ops.total());
    h["latency_ratio"] =
        static_cast<double>(last.report.total_cycles) / static_cast<double>(first.report.total_cycles);
    json curve = json::array();
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        curve.push_back(rows[i].report.speedup_vs_baseline);
        if (i > 0 && rows[i].report.speedup_vs_baseline < rows[i - 1].report.speedup_vs_baseline) monotone = false;
    }
    h["speedup_curve"] = curve;
    h["speedup_monotone"] = monotone;
    return h;
}

}  // namespace

json recipe_config(const std::string& name) {
    if (name == "fig6") {
        return {{"synth", "mlp:72,304,96"},
                {"mode", "mlp-parallel"},
                {"batch", 64},
                {"sweep", {{"param", "zero_fraction"}, {"values", {0.0, 0.1, 0.3, 0.5}}}}};
    }
    if (name == "fig7") {
        return {{"synth", "kan:72,96"},
                {"g", 4},
                {"k", 3},
                {"mode", "kan-pipeline"},
                {"batch", 64},
                {"sweep", {{"param", "pattern_rate"}, {"values", {0, 25, 50, 75}}}}};
    }
    if (name == "fig8") {
        return {{"synth", "kan:72,32,96"},
                {"k", 3},
                {"mode", "kan-pipeline"},
                {"batch", 256},
                {"sweep", {{"param", "G"}, {"values", {2, 4, 8, 16}}}}};
    }
    throw ConfigError("unknown recipe \"" + name + "\" (expected fig6, fig7, fig8)");
}

RunSpec RunSpec::from_json(const json& input) {
    if (!input.is_object()) throw ConfigError("run config must be a JSON object");
    json j = input;
    if (input.contains("recipe")) {
        j = recipe_config(get_field<std::string>(input, "", "recipe"));
        j.merge_patch(input);
    }
    for (const auto& [key, _] : j.items()) {
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
            throw ConfigError("unknown config field \"" + key + "\"");
        }
    }

    RunSpec s;
    if (j.contains("model")) s.model_path = get_field<std::string>(j, "", "model");
    if (j.contains("synth")) {
        s.synth = model::SynthSpec::parse(get_field<std::string>(j, "", "synth"));
        read_opt(j, "", "g", s.synth->grid_size);
        read_opt(j, "", "k", s.synth->order);
    }
    read_opt(j, "", "weight_zero_fraction", s.weight_zero_fraction);
    if (j.contains("mode")) s.mode = sim::parse_mode(get_field<std::string>(j, "", "mode"));
    if (j.contains("mask")) {
        if (j["mask"].is_array()) {
            s.masks = get_field<std::vector<std::string>>(j, "", "mask");
        } else {
            s.masks = split_masks(get_field<std::string>(j, "", "mask"));
        }
    }
    read_opt(j, "", "zero_fraction", s.zero_fraction);
    read_opt(j, "", "seed", s.seed);
    read_opt(j, "", "batch", s.batch);
    if (j.contains("precision")) {
        const auto p = get_field<std::string>(j, "", "precision");
        if (p != "f64" && p != "f16-emu") {
            throw ConfigError("config field \"precision\" must be f64 or f16-emu, got \"" + p + "\"");
        }
        s.sim.policy.enabled = p == "f16-emu";
    }
    if (j.contains("sim")) read_sim(j["sim"], s.sim);
    if (j.contains("recipe")) s.recipe = get_field<std::string>(j, "", "recipe");
    if (j.contains("sweep")) {
        const json& sw = j["sweep"];
        s.sweep_param = sim::parse_sweep_param(get_field<std::string>(sw, "sweep.", "param"));
        read_opt(sw, "sweep.", "values", s.sweep_values);
    }
    if (j.contains("out")) s.out = get_field<std::string>(j, "", "out");
    s.sim.mode = s.mode;
    s.validate();
    return s;
}

json RunSpec::to_json() const {
    json j;
    if (model_path) j["model"] = *model_path;
    if (synth) {
        j["synth"] = synth->to_string();
        j["g"] = synth->grid_size;
        j["k"] = synth->order;
    }
    j["weight_zero_fraction"] = weight_zero_fraction;
    j["mode"] = sim::to_string(mode);
    j["mask"] = masks;
    j["zero_fraction"] = zero_fraction;
    j["seed"] = seed;
    j["batch"] = batch;
    j["precision"] = sim.policy.enabled ? "f16-emu" : "f64";
    j["sim"] = sim_to_json(sim);
    if (recipe) j["recipe"] = *recipe;
    if (sweep_param) j["sweep"] = {{"param", sim::to_string(*sweep_param)}, {"values", sweep_values}};
    return j;
}

void RunSpec::validate() const {
    if (model_path.has_value() == synth.has_value()) {
        throw ConfigError("exactly one of \"model\" and \"synth\" must be given");
    }
    if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0)) throw ConfigError("zero_fraction must lie in [0, 1]");
    if (!(weight_zero_fraction >= 0.0 && weight_zero_fraction <= 1.0)) {
        throw ConfigError("weight_zero_fraction must lie in [0, 1]");
    }
    if (batch == 0) throw ConfigError("batch must be at least 1");
    if (synth) spline::build_knots(synth->grid_size, synth->order);
    for (const auto& m : masks) parse_mask(m);
    sim.validate();
}

std::string ReportFile::csv() const {
    std::ostringstream os;
    os << "param,value,mode,total_cycles,stage1_cycles,stage2_cycles,baseline_cycles,speedup_vs_baseline,"
          "speedup_zero_skip_only,spu_ops,pe_macs,spu_macs,simd_ops,skipped_pe_macs,dense_macs,pe_utilization,"
          "spu_utilization,bank_conflicts,energy_proxy,dense_ops,combined_sparsity\n";
    for (const ReportRow& r : rows) {
        const auto& rep = r.report;
        os << r.param << ',' << fmt_value(r.value) << ',' << sim::to_string(rep.mode) << ',' << rep.total_cycles << ','
           << rep.stage1_cycles << ',' << rep.stage2_cycles << ',' << rep.baseline_cycles << ','
           << fmt(rep.speedup_vs_baseline) << ',' << fmt(r.speedup_zero_skip_only) << ',' << rep.ops.spu_ops << ','
           << rep.ops.pe_macs << ',' << rep.ops.spu_macs << ',' << rep.ops.simd_ops << ','
           << rep.ops.skipped_pe_macs << ',' << rep.ops.dense_macs << ',' << fmt(rep.pe_utilization) << ','
           << fmt(rep.spu_utilization) << ',' << rep.bank_conflicts << ',' << fmt(rep.energy_proxy) << ','
           << r.dense_ops.total() << ',' << fmt(rep.activation_stats.combined_sparsity()) << '\n';
    }
    return os.str();
}

json ReportFile::metadata() const {
    return {{"tool", "vikin"},
            {"report_format_version", kReportFormatVersion},
            {"model_format_version", model::kModelFormatVersion},
            {"config", config},
            {"rows", rows.size()},
            {"verdicts", verdicts},
            {"headline", headline}};
}

void ReportFile::write(const std::string& out) const {
    std::ofstream c(out + ".csv");
    std::ofstream j(out + ".json");
    if (!c || !j) throw Error("cannot write report files at " + out);
    c << csv();
    j << metadata().dump(2) << '\n';
}

ReportFile cmd_run(const RunSpec& spec) {
    spec.validate();
    model::Network net = spec.model_path ? model::load_model(*spec.model_path)
                                         : model::synth_model(effective_synth(spec), spec.weight_zero_fraction);
    check_mode(net.kind(), spec.mode);
    auto inputs = model::synth_inputs(net, spec.batch, spec.seed, spec.zero_fraction);
    if (spec.synth && net.kind() == model::NetworkKind::Mlp && spec.zero_fraction > 0.0) {
        net = model::calibrate_relu_sparsity(std::move(net), inputs, spec.zero_fraction);
    }
    const model::MaskSet masks = resolve_masks(spec, net.layers.size());

    sim::SimConfig cfg = spec.sim;
    cfg.mode = spec.mode;
    const sim::SimResult res = sim::simulate(net, inputs, masks, cfg);
    const model::MaskSet& ref_masks = spec.mode == sim::SimMode::BaselineDense ? model::MaskSet{} : masks;
    if (!sim::matches_reference(net, inputs, ref_masks, cfg.policy, res.outputs)) {
        throw Error("functional mismatch: simulated outputs differ from the reference forward pass");
    }
    if (!res.report.conserves_macs()) throw Error("MAC conservation violated: executed + skipped != dense");

    ReportRow row{"none", 0.0, res.report, sim::count_operations(net, sim::Counting::Dense), 0.0};
    if (spec.mode == sim::SimMode::ParallelMlp) {
        sim::SimConfig pe_only = cfg;
        pe_only.spu_accumulation = false;
        row.speedup_zero_skip_only = sim::simulate_parallel_mlp(net, inputs, masks, pe_only).report.speedup_vs_baseline;
    }
    ReportFile rf;
    rf.config = spec.to_json();
    rf.rows.push_back(std::move(row));
    rf.verdicts = {{"functional_equivalence", true}, {"mac_conservation", true}};
    rf.headline = {{"speedup_vs_baseline", res.report.speedup_vs_baseline}};
    return rf;
}

ReportFile cmd_sweep(const RunSpec& spec) {
    spec.validate();
    if (!spec.sweep_param) throw ConfigError("sweep needs a parameter (sweep.param or --recipe)");
    if (spec.sweep_values.empty()) throw ConfigError("empty sweep values");
    if (!spec.synth) throw ConfigError("sweeps need a synthetic model (--synth)");
    if (spec.masks.size() > 1) throw ConfigError("sweeps take a single mask for all layers");

    sim::SweepSpec sw;
    sw.net_template = effective_synth(spec);
    sw.weight_zero_fraction = spec.weight_zero_fraction;
    sw.param = *spec.sweep_param;
    sw.values = spec.sweep_values;
    sw.cfg = spec.sim;
    sw.cfg.mode = spec.mode;
    if (!spec.masks.empty()) sw.mask = parse_mask(spec.masks.front());
    sw.activation_zero_fraction = spec.zero_fraction;
    sw.batch = spec.batch;
    sw.input_seed = spec.seed;

    // Mode compatibility is checked up front so no partial sweep runs.
    check_mode(sw.net_template.kind, spec.mode);
    const auto points = sim::sweep(sw);

    ReportFile rf;
    rf.config = spec.to_json();
    bool conserved = true;
    for (const auto& p : points) {
        conserved = conserved && p.report.conserves_macs();
        rf.rows.push_back({sim::to_string(sw.param), p.value, p.report, p.dense_ops, p.speedup_zero_skip_only});
    }
    if (!conserved) throw Error("MAC conservation violated in sweep");
    rf.verdicts = {{"functional_equivalence", true}, {"mac_conservation", conserved}};
    rf.headline = headline_for(rf.rows);
    return rf;
}

bool VerifySummary::all_passed() const {
    for (const auto& p : properties) {
        if (!p.passed) return false;
    }
    return !properties.empty();
}

}  // namespace vikin::bench
