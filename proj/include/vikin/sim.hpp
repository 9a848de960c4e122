#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vikin/network.hpp"
#include "vikin/sparsity.hpp"

namespace vikin::sim {

using model::MaskSet;
using model::Network;
using model::Vector;

enum class SimMode { PipelineKan, ParallelMlp, BaselineDense };

std::string to_string(SimMode m);
/// Accepts the CLI spellings kan-pipeline, mlp-parallel, baseline.
SimMode parse_mode(const std::string& s);

/// Cycles charged per primitive. Every entry must be at least 1.
struct CycleCosts {
    int spu_diff_setup_per_knot = 1;
    int spu_per_basis_per_order = 1;
    int spu_mac = 1;
    int pe_mac = 1;
    int simd_silu_per_lane = 1;
    int tse_encode_per_element = 1;
};

/// Relative energy weights per op class; the proxy is unitless.
struct EnergyWeights {
    double spu_op = 1.0;
    double mac = 1.0;
    double simd_op = 1.0;
};

struct SimConfig {
    int n_spu = 16;
    int n_pe = 16;
    int simd_lanes = 16;
    int weight_banks = 4;
    int bank_words_per_cycle = 1;
    int weights_per_word = 8;
    CycleCosts costs;
    SimMode mode = SimMode::PipelineKan;
    /// Parallel mode only: SPUs join the PE array as accumulators.
    bool spu_accumulation = true;
    model::HalfPrecisionPolicy policy;
    EnergyWeights energy;

    void validate() const;
};

enum class BankGrouping { KanTwoBanksStacked, MlpFourBanksParallel, PeOnly };

/// Weight-buffer bandwidth delivered to each consumer, in weights per cycle.
struct WeightBufferScheme {
    BankGrouping grouping = BankGrouping::PeOnly;
    int pe_weights_per_cycle = 0;
    int spu_weights_per_cycle = 0;

    static WeightBufferScheme for_mode(const SimConfig& cfg, SimMode mode);
};

struct OpCounts {
    std::uint64_t spu_ops = 0;          // basis-evaluation arithmetic (iterative mode)
    std::uint64_t pe_macs = 0;          // MACs executed on the PE array
    std::uint64_t spu_macs = 0;         // MACs executed by SPUs in accumulation mode
    std::uint64_t simd_ops = 0;         // SiLU evaluations
    std::uint64_t skipped_pe_macs = 0;  // MACs removed by the TSE
    std::uint64_t dense_macs = 0;       // MACs of a dense execution of the same work
    std::uint64_t tse_elements = 0;     // elements pushed through the encoder

    std::uint64_t executed_macs() const { return pe_macs + spu_macs; }
};

struct LayerTiming {
    std::uint64_t cycles = 0;
    std::uint64_t stage1_cycles = 0;
    std::uint64_t stage2_cycles = 0;
};

struct SimReport {
    SimMode mode = SimMode::PipelineKan;
    std::uint64_t total_cycles = 0;
    std::uint64_t stage1_cycles = 0;
    std::uint64_t stage2_cycles = 0;
    OpCounts ops;
    double pe_utilization = 0.0;
    double spu_utilization = 0.0;
    std::uint64_t bank_conflicts = 0;
    std::uint64_t baseline_cycles = 0;
    double speedup_vs_baseline = 0.0;
    double energy_proxy = 0.0;
    sparsity::SparsityStats activation_stats;
    std::vector<LayerTiming> layers;

    /// executed + skipped MACs equal the dense MAC count.
    bool conserves_macs() const { return ops.executed_macs() + ops.skipped_pe_macs == ops.dense_macs; }
};

struct SimResult {
    SimReport report;
    std::vector<Vector> outputs;
};

/// KAN pipeline mode. Stage 1: SPUs build basis vectors of up to n_spu inputs while the
/// SIMD core computes their SiLUs, then the TSE filters and encodes them. Stage 2: the PE
/// array (one output node per PE) consumes the encoded entries with gathered weights.
/// Tiles run per sample, per node batch, per input group; consecutive tiles overlap.
SimResult simulate_pipeline_kan(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                                const SimConfig& cfg);

/// MLP parallel mode. The TSE encodes each layer input once; PEs skip encoded zeros while
/// SPU accumulators walk every (masked) input position. Node batches are n_pe + n_spu wide.
SimResult simulate_parallel_mlp(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                                const SimConfig& cfg);

/// Dense PE-only execution without the TSE; the denominator for every speedup.
SimResult simulate_baseline(const Network& net, std::span<const Vector> inputs, const SimConfig& cfg);

/// Dispatches on cfg.mode.
SimResult simulate(const Network& net, std::span<const Vector> inputs, const MaskSet& masks, const SimConfig& cfg);

/// True when `outputs` equal the masked reference forward bit for bit.
bool matches_reference(const Network& net, std::span<const Vector> inputs, const MaskSet& masks,
                       const model::HalfPrecisionPolicy& policy, std::span<const Vector> outputs);

enum class Counting { Dense, SupportPruned };

/// Per-input-vector operation totals. A MAC counts as two ops (multiply and add).
struct OpTotals {
    std::uint64_t macs = 0;
    std::uint64_t basis_ops = 0;
    std::uint64_t silu_ops = 0;

    std::uint64_t total() const { return 2 * macs + basis_ops + silu_ops; }
};

OpTotals count_operations(const Network& net, Counting counting);

enum class SweepParam { GridSize, PatternRate, ZeroFraction };

std::string to_string(SweepParam p);
SweepParam parse_sweep_param(const std::string& s);

struct SweepSpec {
    model::SynthSpec net_template;
    double weight_zero_fraction = 0.0;
    SweepParam param = SweepParam::PatternRate;
    std::vector<double> values;
    SimConfig cfg;
    sparsity::PatternMask mask;             // every layer; held fixed unless the pattern rate is swept
    double activation_zero_fraction = 0.0;  // held fixed unless swept
    std::size_t batch = 64;
    std::uint64_t input_seed = 1;
};

struct SweepPoint {
    double value = 0.0;
    SimReport report;
    OpTotals dense_ops;
    /// Parallel MLP only: speedup with SPU accumulation switched off.
    double speedup_zero_skip_only = 0.0;
};

/// Activation zero fraction applies to the inputs and, for MLPs, to every hidden ReLU
/// output via bias calibration. Throws ModeError if a point's outputs diverge from the reference.
std::vector<SweepPoint> sweep(const SweepSpec& spec);

/// Builds the network and input batch for one sweep point (exposed for tests).
struct Workload {
    Network net;
    std::vector<Vector> inputs;
    MaskSet masks;
};
Workload make_workload(const SweepSpec& spec, double value);

}  // namespace vikin::sim
