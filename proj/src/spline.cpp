#include "vikin/spline.hpp"

#include <cmath>
#include <string>

#include "vikin/errors.hpp"

namespace vikin::spline {

namespace {

constexpr double kOneThird = 1.0 / 3.0;
constexpr double kRightEdgeFraction = 0x1p-20;

// Nonzero bracket of a dense vector.
void mark_support(BasisVector& b) {
    b.nonzero_lo = b.nonzero_hi = 0;
    bool seen = false;
    for (std::size_t i = 0; i < b.values.size(); ++i) {
        if (b.values[i] != 0.0) {
            if (!seen) b.nonzero_lo = i;
            seen = true;
            b.nonzero_hi = i + 1;
        }
    }
}

std::vector<double> order_zero(const SplineConfig& cfg, const StageBuffer& sb) {
    const std::size_t n = cfg.num_intervals();
    std::vector<double> b(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (sb.diffs_left[j] >= 0.0 && sb.diffs_left[j + 1] < 0.0) b[j] = 1.0;
    }
    return b;
}

// Raises `b` from order 0 to cfg.order in place, reading differences from the stage buffer.
void raise_order(const SplineConfig& cfg, const StageBuffer& sb, std::vector<double>& b) {
    const auto& t = cfg.knots;
    for (int k = 1; k <= cfg.order; ++k) {
        const std::size_t count = b.size() - 1;
        for (std::size_t i = 0; i < count; ++i) {
            const double left = sb.diffs_left[i] / (t[i + k] - t[i]) * b[i];
            const double right = sb.diffs_right[i + k + 1] / (t[i + k + 1] - t[i + 1]) * b[i + 1];
            b[i] = left + right;
        }
        b.pop_back();
    }
}

}  // namespace

std::size_t BasisVector::nonzero_count() const {
    std::size_t n = 0;
    for (double v : values) n += (v != 0.0);
    return n;
}

bool supported_grid_size(int g) { return g == 2 || g == 4 || g == 8 || g == 16; }
bool supported_order(int k) { return k >= 1 && k <= 4; }

SplineConfig build_knots(int grid_size, int order, Domain domain) {
    if (!supported_grid_size(grid_size)) {
        throw ConfigError("unsupported grid size G=" + std::to_string(grid_size) + " (allowed: 2, 4, 8, 16)");
    }
    if (!supported_order(order)) {
        throw ConfigError("unsupported spline order K=" + std::to_string(order) + " (allowed: 1..4)");
    }
    if (!(std::isfinite(domain.lo) && std::isfinite(domain.hi) && domain.lo < domain.hi)) {
        throw ConfigError("invalid domain: lo must be finite and below hi");
    }
    SplineConfig cfg{grid_size, order, domain, {}};
    const double h = cfg.step();
    const int n = grid_size + 2 * order + 1;
    cfg.knots.reserve(n);
    for (int j = 0; j < n; ++j) cfg.knots.push_back(domain.lo + (j - order) * h);
    return cfg;
}

double clamp_to_domain(const SplineConfig& cfg, double x) {
    if (!std::isfinite(x)) throw ConfigError("spline input must be finite");
    if (x < cfg.domain.lo) return cfg.domain.lo;
    if (x >= cfg.domain.hi) return cfg.domain.hi - kRightEdgeFraction * cfg.step();
    return x;
}

StageBuffer fill_stage_buffer(const SplineConfig& cfg, double x) {
    StageBuffer sb;
    sb.diffs_left.reserve(cfg.knots.size());
    sb.diffs_right.reserve(cfg.knots.size());
    for (double knot : cfg.knots) {
        const double d = x - knot;
        sb.diffs_left.push_back(d);
        sb.diffs_right.push_back(-d);
    }
    return sb;
}

BasisVector eval_basis_zero(const SplineConfig& cfg, double x) {
    BasisVector out;
    out.values = order_zero(cfg, fill_stage_buffer(cfg, x));
    mark_support(out);
    return out;
}

BasisVector eval_basis(const SplineConfig& cfg, double x) {
    const double xc = clamp_to_domain(cfg, x);
    const StageBuffer sb = fill_stage_buffer(cfg, xc);
    BasisVector out;
    out.values = order_zero(cfg, sb);
    raise_order(cfg, sb, out.values);
    mark_support(out);
    return out;
}

ReuseResult eval_basis_with_reuse(const SplineConfig& cfg, double x) {
    ReuseResult r;
    r.basis = eval_basis(cfg, x);

    const std::uint64_t knots = cfg.knots.size();
    std::uint64_t with = knots;     // x - knot[j], kept in the stage buffer
    std::uint64_t without = knots;  // same subtractions, used only for the interval tests
    std::uint64_t level_len = cfg.num_intervals();
    for (int k = 1; k <= cfg.order; ++k) {
        --level_len;
        // per basis: 2 reciprocal lookups, 2 scalings, 2 products with lower-order bases, 1 add
        with += 7 * level_len;
        // plus the two numerator differences recomputed from the knots
        without += 9 * level_len;
    }
    r.counts = {with, without};
    return r;
}

std::uint64_t dense_basis_ops(int grid_size, int order) {
    const std::uint64_t intervals = grid_size + 2 * order;
    std::uint64_t ops = intervals + 1;
    for (int k = 1; k <= order; ++k) ops += 7 * (intervals - k);
    return ops;
}

std::uint64_t pruned_basis_ops(int order) {
    std::uint64_t ops = order + 2;
    for (int k = 1; k <= order; ++k) ops += 7 * static_cast<std::uint64_t>(k + 1);
    return ops;
}

double reciprocal_div_free(int order, int span_multiple, double h) {
    if (!supported_order(order)) {
        throw ConfigError("unsupported spline order K=" + std::to_string(order));
    }
    if (span_multiple < 1 || span_multiple > order) {
        throw ConfigError("unsupported span multiple " + std::to_string(span_multiple) + " for order " +
                          std::to_string(order));
    }
    int exp = 0;
    const double mant = std::frexp(h, &exp);
    if (!(h > 0.0) || mant != 0.5) throw ConfigError("knot step must be a positive power of two");
    // h = 2^(exp-1), so 1/h = 2^(1-exp).
    switch (span_multiple) {
        case 1: return std::ldexp(1.0, 1 - exp);
        case 2: return std::ldexp(1.0, -exp);
        case 3: return std::ldexp(kOneThird, 1 - exp);
        default: return std::ldexp(1.0, -1 - exp);
    }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace vikin::spline
