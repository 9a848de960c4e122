#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vikin::spline {

struct Domain {
    double lo = -1.0;
    double hi = 1.0;
    bool operator==(const Domain&) const = default;
};

/// Uniform extended knot grid for order-K B-splines over a fixed input domain.
///
/// The grid has G intervals inside [lo, hi] and K extra intervals on each side,
/// so there are G + 2K + 1 knots and G + K basis functions of order K.
struct SplineConfig {
    int grid_size = 4;  // G, one of 2, 4, 8, 16
    int order = 3;      // K, one of 1..4
    Domain domain;
    std::vector<double> knots;

    double step() const { return (domain.hi - domain.lo) / grid_size; }
    std::size_t num_bases() const { return static_cast<std::size_t>(grid_size + order); }
    std::size_t num_intervals() const { return knots.size() - 1; }

    bool operator==(const SplineConfig&) const = default;
};

/// Basis evaluations at one input. [nonzero_lo, nonzero_hi) brackets the nonzero entries;
/// both are 0 when every entry is zero.
struct BasisVector {
    std::vector<double> values;
    std::size_t nonzero_lo = 0;
    std::size_t nonzero_hi = 0;

    std::size_t nonzero_count() const;
};

/// Input-minus-knot differences computed once at order 0 and reused by every higher order.
struct StageBuffer {
    std::vector<double> diffs_left;   // x - knot[j]
    std::vector<double> diffs_right;  // knot[j] - x
};

/// Arithmetic-operation tallies for one basis-vector evaluation.
struct ReuseCounts {
    std::uint64_t with_reuse = 0;
    std::uint64_t without_reuse = 0;

    double saving() const {
        return without_reuse == 0 ? 0.0
                                  : 1.0 - static_cast<double>(with_reuse) / static_cast<double>(without_reuse);
    }
};

struct ReuseResult {
    BasisVector basis;
    ReuseCounts counts;
};

bool supported_grid_size(int g);
bool supported_order(int k);

/// Throws ConfigError naming the offending parameter.
SplineConfig build_knots(int grid_size, int order, Domain domain = {});

/// Clamps x into [lo, hi); the right endpoint maps to hi - 2^-20 * h.
double clamp_to_domain(const SplineConfig& cfg, double x);

StageBuffer fill_stage_buffer(const SplineConfig& cfg, double x);

/// Order-0 indicators over the G + 2K knot intervals, half-open [x_j, x_{j+1}). No clamping.
BasisVector eval_basis_zero(const SplineConfig& cfg, double x);

/// Order-K bases (length G + K) via the Cox-de Boor recursion, after clamping x to the domain.
BasisVector eval_basis(const SplineConfig& cfg, double x);

/// Same values as eval_basis, plus op counts with and without stage-buffer reuse.
///
/// Counting: one op per add, subtract, multiply, or reciprocal lookup; every basis at
/// every order level is evaluated (no support pruning). Order 0 always costs one
/// subtraction per knot for the interval tests; with reuse those differences are kept
/// and the right-hand differences are their negations.
ReuseResult eval_basis_with_reuse(const SplineConfig& cfg, double x);

/// Analytic per-input op count of the dense recursion with reuse. Matches eval_basis_with_reuse.
std::uint64_t dense_basis_ops(int grid_size, int order);
/// Analytic per-input op count when only the K+1 supported bases are evaluated.
std::uint64_t pruned_basis_ops(int order);

/// 1 / (span_multiple * h) using exponent arithmetic and a stored 1/3, no division.
/// h must be a positive power of two; span_multiple in 1..order, order in 1..4.
double reciprocal_div_free(int order, int span_multiple, double h);

double silu(double x);

}  // namespace vikin::spline
