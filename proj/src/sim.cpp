#include "vikin/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "vikin/errors.hpp"

namespace vikin::sim {

namespace {

using model::KanLayer;
using model::MlpLayer;
using sparsity::PatternMask;

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Two-stage pipeline with double-buffered hand-off: stage 1 of tile t overlaps stage 2 of tile t-1.
class TwoStagePipeline {
public:
    void push(std::uint64_t s1, std::uint64_t s2) {
        total_ += started_ ? std::max(s1, pending_s2_) : s1;
        started_ = true;
        pending_s2_ = s2;
        timing_.stage1_cycles += s1;
        timing_.stage2_cycles += s2;
    }

    LayerTiming finish() {
        timing_.cycles = total_ + pending_s2_;
        return timing_;
    }

private:
    bool started_ = false;
    std::uint64_t total_ = 0;
    std::uint64_t pending_s2_ = 0;
    LayerTiming timing_;
};

// Cycles after weight-bandwidth stalls; surplus cycles are charged as bank conflicts.
std::uint64_t with_bandwidth(std::uint64_t cycles, int demand, int supply, std::uint64_t& conflicts) {
    if (cycles == 0 || demand <= supply) return cycles;
    const std::uint64_t stalled = ceil_div(cycles * static_cast<std::uint64_t>(demand), supply);
    conflicts += stalled - cycles;
    return stalled;
}

std::uint64_t spu_cycles_per_vector(const spline::SplineConfig& s, const CycleCosts& c) {
    const std::uint64_t intervals = s.num_intervals();
    std::uint64_t bases = 0;
    for (int k = 1; k <= s.order; ++k) bases += intervals - k;
    return static_cast<std::uint64_t>(c.spu_diff_setup_per_knot) * s.knots.size() +
           static_cast<std::uint64_t>(c.spu_per_basis_per_order) * bases;
}

// MLP slice length: inputs split over 16 slices in contiguous runs whose length is a
// multiple of the mask width, so slice-local mask phase equals global phase.
std::size_t mlp_slice_length(std::size_t n_in) {
    const std::size_t per = ceil_div(n_in, sparsity::kNumSlices);
    return ceil_div(per, sparsity::kMaskWidth) * sparsity::kMaskWidth;
}

struct Accumulator {
    SimReport report;
    std::uint64_t spu_busy = 0;  // SPU-cycles spent in iterative mode
};

struct RunOptions {
    bool sparse = true;  // TSE filtering active
};

PatternMask mask_for(const MaskSet& masks, std::size_t layer) {
    return masks.empty() ? PatternMask{} : masks[layer];
}

std::vector<Vector> run_kan_layer(const KanLayer& layer, const std::vector<Vector>& xs, const PatternMask& mask,
                                  const SimConfig& cfg, const RunOptions& opt, Accumulator& acc) {
    const auto& pol = cfg.policy;
    const CycleCosts& c = cfg.costs;
    const std::size_t nb = layer.num_bases();
    const auto scheme = WeightBufferScheme::for_mode(cfg, opt.sparse ? SimMode::PipelineKan : SimMode::BaselineDense);
    const std::uint64_t spu = spu_cycles_per_vector(layer.spline, c);
    const std::uint64_t tse = opt.sparse ? static_cast<std::uint64_t>(c.tse_encode_per_element) * nb : 0;
    const std::size_t group_width = cfg.n_spu;
    const std::size_t node_width = cfg.n_pe;
    const std::size_t groups = ceil_div(layer.n_in, group_width);
    const std::size_t node_batches = ceil_div(layer.n_out, node_width);
    const std::uint64_t basis_ops = spline::dense_basis_ops(layer.spline.grid_size, layer.spline.order);

    TwoStagePipeline pipe;
    std::vector<Vector> outs;
    outs.reserve(xs.size());
    OpCounts& ops = acc.report.ops;

    for (const Vector& x : xs) {
        // Stage 1 products for this sample: SiLU values and TSE slices.
        Vector silu_vals(layer.n_in);
        std::vector<sparsity::Slice> slices(layer.n_in);
        std::vector<std::uint64_t> entries(layer.n_in);
        for (std::size_t p = 0; p < layer.n_in; ++p) {
            const double xp = pol.round(x[p]);
            silu_vals[p] = pol.round(spline::silu(xp));
            Vector b = spline::eval_basis(layer.spline, xp).values;
            for (double& v : b) v = pol.round(v);
            const int slice_id = static_cast<int>((p % group_width) % sparsity::kNumSlices);
            if (opt.sparse) {
                auto f = sparsity::two_stage_filter(b, mask, slice_id);
                acc.report.activation_stats += f.stats;
                slices[p] = std::move(f.slice);
                entries[p] = slices[p].entries.size() + (silu_vals[p] != 0.0);
            } else {
                slices[p].slice_id = slice_id;
                slices[p].dense_length = nb;
                for (std::size_t i = 0; i < nb; ++i) slices[p].entries.push_back({b[i], static_cast<std::uint32_t>(i)});
                entries[p] = nb + 1;
            }
        }

        {
            Vector out(layer.n_out, 0.0);
            for (std::size_t q = 0; q < layer.n_out; ++q) {
                double a = 0.0;
                for (std::size_t p = 0; p < layer.n_in; ++p) {
                    if (!opt.sparse || silu_vals[p] != 0.0) a = pol.add(a, pol.mul(layer.base_weight(q, p), silu_vals[p]));
                    const auto addrs = sparsity::gather_weights(slices[p], layer.coeff_index(q, p, 0));
                    for (std::size_t e = 0; e < addrs.size(); ++e) {
                        a = pol.add(a, pol.mul(layer.t[addrs[e]], slices[p].entries[e].value));
                    }
                }
                out[q] = a;
            }
            outs.push_back(std::move(out));
        }

        for (std::size_t nbt = 0; nbt < node_batches; ++nbt) {
            const std::uint64_t nodes = std::min(node_width, layer.n_out - nbt * node_width);
            for (std::size_t g = 0; g < groups; ++g) {
                const std::size_t p0 = g * group_width;
                const std::size_t p1 = std::min(layer.n_in, p0 + group_width);
                const std::uint64_t members = p1 - p0;
                std::uint64_t stream = 0;
                for (std::size_t p = p0; p < p1; ++p) stream += entries[p];

                const std::uint64_t simd =
                    ceil_div(members, cfg.simd_lanes) * static_cast<std::uint64_t>(c.simd_silu_per_lane);
                const std::uint64_t s1 = std::max(spu, simd) + tse;
                const std::uint64_t s2 = with_bandwidth(stream * c.pe_mac, cfg.n_pe, scheme.pe_weights_per_cycle,
                                                        acc.report.bank_conflicts);
                pipe.push(s1, s2);

                acc.spu_busy += members * spu;
                ops.spu_ops += members * basis_ops;
                ops.simd_ops += members;
                if (opt.sparse) ops.tse_elements += members * (nb + 1);
                ops.pe_macs += stream * nodes;
                ops.dense_macs += members * (nb + 1) * nodes;
                ops.skipped_pe_macs += (members * (nb + 1) - stream) * nodes;
            }
        }
    }
    acc.report.layers.push_back(pipe.finish());
    return outs;
}

std::vector<Vector> run_mlp_layer(const MlpLayer& layer, const std::vector<Vector>& xs, const PatternMask& mask,
                                  const SimConfig& cfg, const RunOptions& opt, bool use_spu, Accumulator& acc) {
    const auto& pol = cfg.policy;
    const CycleCosts& c = cfg.costs;
    const SimMode scheme_mode = use_spu ? SimMode::ParallelMlp : SimMode::BaselineDense;
    const auto scheme = WeightBufferScheme::for_mode(cfg, scheme_mode);
    const std::size_t slice_len = mlp_slice_length(layer.n_in);
    const std::size_t batch_width = cfg.n_pe + (use_spu ? cfg.n_spu : 0);
    const std::size_t node_batches = ceil_div(layer.n_out, batch_width);
    const std::uint64_t tse = opt.sparse ? slice_len * static_cast<std::uint64_t>(c.tse_encode_per_element) : 0;

    TwoStagePipeline pipe;
    std::vector<Vector> outs;
    outs.reserve(xs.size());
    OpCounts& ops = acc.report.ops;

    for (const Vector& x : xs) {
        Vector xin(x.begin(), x.end());
        for (double& v : xin) v = pol.round(v);

        sparsity::ZeroFreeStream stream;
        std::uint64_t nnz = layer.n_in;
        Vector masked = xin;
        if (opt.sparse) {
            for (int s = 0; s < sparsity::kNumSlices; ++s) {
                const std::size_t b = std::min(layer.n_in, s * slice_len);
                const std::size_t e = std::min(layer.n_in, b + slice_len);
                auto f = sparsity::two_stage_filter(std::span<const double>(xin).subspan(b, e - b), mask, s);
                acc.report.activation_stats += f.stats;
                stream.slices[s] = std::move(f.slice);
            }
            masked = sparsity::decode_stream(stream, layer.n_in);
            nnz = 0;
            for (const auto& s : stream.slices) nnz += s.entries.size();
        }

        std::uint64_t mac_cycles = 0;
        for (std::size_t nbt = 0; nbt < node_batches; ++nbt) {
            const std::size_t first = nbt * batch_width;
            const std::uint64_t pe_nodes = std::min<std::size_t>(cfg.n_pe, layer.n_out - first);
            const std::uint64_t spu_nodes =
                use_spu ? std::min<std::size_t>(cfg.n_spu, layer.n_out - first - pe_nodes) : 0;
            const std::uint64_t pe_c =
                with_bandwidth(nnz * c.pe_mac, cfg.n_pe, scheme.pe_weights_per_cycle, acc.report.bank_conflicts);
            const std::uint64_t spu_c =
                spu_nodes == 0 ? 0
                               : with_bandwidth(layer.n_in * static_cast<std::uint64_t>(c.spu_mac), cfg.n_spu,
                                                scheme.spu_weights_per_cycle, acc.report.bank_conflicts);
            mac_cycles += std::max(pe_c, spu_c);

            ops.pe_macs += nnz * pe_nodes;
            ops.spu_macs += layer.n_in * spu_nodes;
            ops.skipped_pe_macs += (layer.n_in - nnz) * pe_nodes;
            ops.dense_macs += layer.n_in * (pe_nodes + spu_nodes);
        }
        if (opt.sparse) ops.tse_elements += layer.n_in;
        pipe.push(tse, mac_cycles);

        {
            Vector out(layer.n_out, 0.0);
            for (std::size_t first = 0; first < layer.n_out; first += batch_width) {
                const std::size_t pe_end = std::min<std::size_t>(layer.n_out, first + cfg.n_pe);
                const std::size_t spu_end = std::min<std::size_t>(layer.n_out, first + batch_width);
                for (std::size_t q = first; q < spu_end; ++q) {
                    double a = 0.0;
                    const std::size_t row = q * layer.n_in;
                    if (q < pe_end && opt.sparse) {
                        // PE: offsets from the encoded slices drive the weight gather.
                        for (const auto& s : stream.slices) {
                            const auto addrs = sparsity::gather_weights(s, row + s.slice_id * slice_len);
                            for (std::size_t e = 0; e < addrs.size(); ++e) {
                                a = pol.add(a, pol.mul(layer.weights[addrs[e]], s.entries[e].value));
                            }
                        }
                    } else {
                        for (std::size_t j = 0; j < layer.n_in; ++j) {
                            a = pol.add(a, pol.mul(layer.weights[row + j], masked[j]));
                        }
                    }
                    a = pol.add(a, layer.bias[q]);
                    if (layer.activation == model::Activation::ReLU && a < 0.0) a = 0.0;
                    out[q] = a;
                }
            }
            outs.push_back(std::move(out));
        }
    }
    acc.report.layers.push_back(pipe.finish());
    return outs;
}

// Runs every layer; returns the report with cycles and op counts filled in.
SimResult run(const Network& net, std::span<const Vector> inputs, const MaskSet& masks, const SimConfig& cfg,
              const RunOptions& opt, bool use_spu, SimMode mode) {
    cfg.validate();
    net.validate();
    if (inputs.empty()) throw ConfigError("input batch must not be empty");
    if (!masks.empty() && masks.size() != net.layers.size()) {
        throw ConfigError("expected one mask per layer (" + std::to_string(net.layers.size()) + "), got " +
                          std::to_string(masks.size()));
    }
    for (const Vector& x : inputs) {
        if (x.size() != net.input_size()) {
            throw ShapeError("input has " + std::to_string(x.size()) + " elements, network expects " +
                             std::to_string(net.input_size()));
        }
    }

    Accumulator acc;
    acc.report.mode = mode;
    std::vector<Vector> cur(inputs.begin(), inputs.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const PatternMask mask = opt.sparse ? mask_for(masks, i) : PatternMask{};
        if (const auto* k = std::get_if<KanLayer>(&net.layers[i])) {
            cur = run_kan_layer(*k, cur, mask, cfg, opt, acc);
        } else {
            cur = run_mlp_layer(std::get<MlpLayer>(net.layers[i]), cur, mask, cfg, opt, use_spu, acc);
        }
    }

    SimReport& r = acc.report;
    for (const LayerTiming& t : r.layers) {
        r.total_cycles += t.cycles;
        r.stage1_cycles += t.stage1_cycles;
        r.stage2_cycles += t.stage2_cycles;
    }
    if (r.total_cycles > 0) {
        const double total = static_cast<double>(r.total_cycles);
        r.pe_utilization = static_cast<double>(r.ops.pe_macs) / (cfg.n_pe * total);
        const double spu_work = net.kind() == model::NetworkKind::Kan ? static_cast<double>(acc.spu_busy)
                                                                       : static_cast<double>(r.ops.spu_macs);
        r.spu_utilization = spu_work / (cfg.n_spu * total);
    }
    r.energy_proxy = cfg.energy.spu_op * static_cast<double>(r.ops.spu_ops) +
                     cfg.energy.mac * static_cast<double>(r.ops.executed_macs()) +
                     cfg.energy.simd_op * static_cast<double>(r.ops.simd_ops);
    return {std::move(r), std::move(cur)};
}

void attach_baseline(SimResult& res, const Network& net, std::span<const Vector> inputs, const SimConfig& cfg) {
    const SimResult base = run(net, inputs, {}, cfg, {false}, false, SimMode::BaselineDense);
    res.report.baseline_cycles = base.report.total_cycles;
    res.report.speedup_vs_baseline =
        res.report.total_cycles == 0 ? 0.0
                                     : static_cast<double>(base.report.total_cycles) / res.report.total_cycles;
}

}  // namespace

std::string to_string(SimMode m) {
    switch (m) {
        case SimMode::PipelineKan: return "kan-pipeline";
        case SimMode::ParallelMlp: return "mlp-parallel";
        default: return "baseline";
    }
}

SimMode parse_mode(const std::string& s) {
    if (s == "kan-pipeline") return SimMode::PipelineKan;
    if (s == "mlp-parallel") return SimMode::ParallelMlp;
    if (s == "baseline") return SimMode::BaselineDense;
    throw ConfigError("unknown mode \"" + s + "\" (expected kan-pipeline, mlp-parallel, baseline)");
}

void SimConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("SimConfig.") + name + " must be at least 1");
    };
    positive(n_spu, "n_spu");
    positive(n_pe, "n_pe");
    positive(simd_lanes, "simd_lanes");
    positive(weight_banks, "weight_banks");
    positive(bank_words_per_cycle, "bank_words_per_cycle");
    positive(weights_per_word, "weights_per_word");
    positive(costs.spu_diff_setup_per_knot, "spu_diff_setup_per_knot");
    positive(costs.spu_per_basis_per_order, "spu_per_basis_per_order");
    positive(costs.spu_mac, "spu_mac");
    positive(costs.pe_mac, "pe_mac");
    positive(costs.simd_silu_per_lane, "simd_silu_per_lane");
    positive(costs.tse_encode_per_element, "tse_encode_per_element");
    if (n_spu > sparsity::kNumSlices) throw ConfigError("SimConfig.n_spu cannot exceed the 16 TSE slices");
    if (weight_banks % 2 != 0) throw ConfigError("SimConfig.weight_banks must be even (banks pair up in KAN mode)");
}

WeightBufferScheme WeightBufferScheme::for_mode(const SimConfig& cfg, SimMode mode) {
    const int per_bank = cfg.bank_words_per_cycle * cfg.weights_per_word;
    WeightBufferScheme s;
    switch (mode) {
        case SimMode::PipelineKan:
            // banks/2 groups of two stacked banks, all feeding the PE array
            s.grouping = BankGrouping::KanTwoBanksStacked;
            s.pe_weights_per_cycle = (cfg.weight_banks / 2) * 2 * per_bank;
            break;
        case SimMode::ParallelMlp:
            s.grouping = BankGrouping::MlpFourBanksParallel;
            s.pe_weights_per_cycle = (cfg.weight_banks / 2) * per_bank;
            s.spu_weights_per_cycle = (cfg.weight_banks / 2) * per_bank;
            break;
        default:
            s.grouping = BankGrouping::PeOnly;
            s.pe_weights_per_cycle = cfg.weight_banks * per_bank;
            break;
    }
    return s;
}

SimResult simulate_pipeline_kan(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                                const SimConfig& cfg) {
    if (net.kind() != model::NetworkKind::Kan) throw ModeError("kan-pipeline mode requires a pure-KAN network");
    SimResult res = run(net, inputs, masks, cfg, {true}, false, SimMode::PipelineKan);
    attach_baseline(res, net, inputs, cfg);
    return res;
}

SimResult simulate_parallel_mlp(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                                const SimConfig& cfg) {
    if (net.kind() != model::NetworkKind::Mlp) throw ModeError("mlp-parallel mode requires a pure-MLP network");
    SimResult res = run(net, inputs, masks, cfg, {true}, cfg.spu_accumulation, SimMode::ParallelMlp);
    attach_baseline(res, net, inputs, cfg);
    return res;
}

SimResult simulate_baseline(const Network& net, std::span<const Vector> inputs, const SimConfig& cfg) {
    SimResult res = run(net, inputs, {}, cfg, {false}, false, SimMode::BaselineDense);
    res.report.baseline_cycles = res.report.total_cycles;
    res.report.speedup_vs_baseline = 1.0;
    return res;
}

SimResult simulate(const Network& net, std::span<const Vector> inputs, const MaskSet& masks, const SimConfig& cfg) {
    switch (cfg.mode) {
        case SimMode::PipelineKan: return simulate_pipeline_kan(net, inputs, masks, cfg);
        case SimMode::ParallelMlp: return simulate_parallel_mlp(net, inputs, masks, cfg);
        default: return simulate_baseline(net, inputs, cfg);
    }
}

bool matches_reference(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                       const model::HalfPrecisionPolicy& policy, std::span<const Vector> outputs) {
    if (inputs.size() != outputs.size()) return false;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const Vector ref = model::network_forward(net, inputs[s], policy, masks);
        if (ref.size() != outputs[s].size()) return false;
        for (std::size_t q = 0; q < ref.size(); ++q) {
            if (std::bit_cast<std::uint64_t>(ref[q]) != std::bit_cast<std::uint64_t>(outputs[s][q])) return false;
        }
    }
    return true;
}

OpTotals count_operations(const Network& net, Counting counting) {
    net.validate();
    OpTotals t;
    for (const model::Layer& l : net.layers) {
        if (const auto* k = std::get_if<KanLayer>(&l)) {
            const int g = k->spline.grid_size;
            const int order = k->spline.order;
            const std::uint64_t per_input =
                counting == Counting::Dense ? static_cast<std::uint64_t>(g + order + 1) : order + 2;
            t.macs += k->n_in * k->n_out * per_input;
            t.basis_ops += k->n_in * (counting == Counting::Dense ? spline::dense_basis_ops(g, order)
                                                                  : spline::pruned_basis_ops(order));
            t.silu_ops += k->n_in;
        } else {
            const auto& m = std::get<MlpLayer>(l);
            t.macs += m.n_in * m.n_out;
        }
    }
    return t;
}

std::string to_string(SweepParam p) {
    switch (p) {
        case SweepParam::GridSize: return "G";
        case SweepParam::PatternRate: return "pattern_rate";
        default: return "zero_fraction";
    }
}

SweepParam parse_sweep_param(const std::string& s) {
    if (s == "G" || s == "g" || s == "grid_size") return SweepParam::GridSize;
    if (s == "pattern_rate") return SweepParam::PatternRate;
    if (s == "zero_fraction") return SweepParam::ZeroFraction;
    throw ConfigError("unknown sweep parameter \"" + s + "\" (expected G, pattern_rate, zero_fraction)");
}

Workload make_workload(const SweepSpec& spec, double value) {
    model::SynthSpec ns = spec.net_template;
    PatternMask mask = spec.mask;
    double zf = spec.activation_zero_fraction;
    switch (spec.param) {
        case SweepParam::GridSize:
            if (value != std::floor(value) || !spline::supported_grid_size(static_cast<int>(value))) {
                throw ConfigError("sweep value " + std::to_string(value) + " is not a supported grid size");
            }
            ns.grid_size = static_cast<int>(value);
            break;
        case SweepParam::PatternRate:
            if (value != std::floor(value)) throw ConfigError("pattern rate must be an integer percentage");
            mask = PatternMask::from_rate(static_cast<int>(value));
            break;
        case SweepParam::ZeroFraction:
            if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("zero fraction sweep values must lie in [0, 1]");
            zf = value;
            break;
    }
    Workload w;
    w.net = model::synth_model(ns, spec.weight_zero_fraction);
    w.inputs = model::synth_inputs(w.net, spec.batch, spec.input_seed, zf);
    if (ns.kind == model::NetworkKind::Mlp && zf > 0.0) {
        w.net = model::calibrate_relu_sparsity(std::move(w.net), w.inputs, zf);
    }
    w.masks.assign(w.net.layers.size(), mask);
    return w;
}

std::vector<SweepPoint> sweep(const SweepSpec& spec) {
    std::vector<SweepPoint> points;
    for (double v : spec.values) {
        const Workload w = make_workload(spec, v);
        SweepPoint pt;
        pt.value = v;
        const SimResult r = simulate(w.net, w.inputs, w.masks, spec.cfg);
        if (spec.cfg.mode != SimMode::BaselineDense &&
            !matches_reference(w.net, w.inputs, w.masks, spec.cfg.policy, r.outputs)) {
            throw ModeError("simulated outputs diverge from the reference at sweep value " + std::to_string(v));
        }
        pt.report = r.report;
        pt.dense_ops = count_operations(w.net, Counting::Dense);
        if (spec.cfg.mode == SimMode::ParallelMlp) {
            SimConfig pe_only = spec.cfg;
            pe_only.spu_accumulation = false;
            pt.speedup_zero_skip_only = simulate_parallel_mlp(w.net, w.inputs, w.masks, pe_only).report.speedup_vs_baseline;
        }
        points.push_back(std::move(pt));
    }
    std::stable_sort(points.begin(), points.end(),
                     [](const SweepPoint& a, const SweepPoint& b) { return a.value < b.value; });
    return points;
}

}  // namespace vikin::sim
