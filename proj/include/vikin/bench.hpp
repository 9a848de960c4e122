#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vikin/network.hpp"
#include "vikin/sim.hpp"

namespace vikin::bench {

/// Everything needed to reproduce one run or sweep.
///
/// JSON keys mirror the CLI flags: model, synth, g, k, mask, mode, zero_fraction,
/// weight_zero_fraction, seed, batch, precision, recipe, sweep {param, values},
/// sim {n_spu, n_pe, simd_lanes, weight_banks, bank_words_per_cycle, weights_per_word,
/// spu_accumulation, costs {...}, energy {...}}, out.
struct RunSpec {
    std::optional<std::string> model_path;
    std::optional<model::SynthSpec> synth;
    double weight_zero_fraction = 0.0;
    sim::SimMode mode = sim::SimMode::PipelineKan;
    std::vector<std::string> masks;  // one per layer, or a single mask for all layers
    double zero_fraction = 0.0;      // activation zeros: inputs, and hidden ReLUs of synth MLPs
    std::uint64_t seed = 1;
    std::size_t batch = 64;
    sim::SimConfig sim;
    std::optional<std::string> recipe;
    std::optional<sim::SweepParam> sweep_param;
    std::vector<double> sweep_values;
    std::optional<std::string> out;

    /// Throws ConfigError (or ParseError for malformed JSON) naming the offending field.
    static RunSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

/// Named sweep recipes: fig6 (MLP activation sparsity), fig7 (KAN pattern rate), fig8 (KAN grid size).
nlohmann::json recipe_config(const std::string& name);

struct ReportRow {
    std::string param;
    double value = 0.0;
    sim::SimReport report;
    sim::OpTotals dense_ops;
    double speedup_zero_skip_only = 0.0;
};

struct ReportFile {
    nlohmann::json config;
    std::vector<ReportRow> rows;
    nlohmann::json verdicts;
    nlohmann::json headline;

    std::string csv() const;
    nlohmann::json metadata() const;
    /// Writes <out>.csv and <out>.json.
    void write(const std::string& out) const;
};

/// One simulation plus the functional check. Throws ModeError on a kind/mode mismatch and
/// on any divergence from the reference.
ReportFile cmd_run(const RunSpec& spec);

/// One row per sweep value, sorted by value. Throws ConfigError("empty sweep values").
ReportFile cmd_sweep(const RunSpec& spec);

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    /// Flips the sign of one basis value before the checks see it.
    bool inject_basis_sign_fault = false;
    std::uint64_t seed = 2024;
};

struct VerifySummary {
    std::vector<PropertyResult> properties;
    bool all_passed() const;
};

VerifySummary cmd_verify(const VerifyOptions& opts = {});

}  // namespace vikin::bench
