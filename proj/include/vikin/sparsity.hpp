#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vikin::sparsity {

inline constexpr int kNumSlices = 16;
inline constexpr int kMaskWidth = 4;

/// Structured mask applied in batches of four. bits[0] corresponds to batch index 2'b00.
struct PatternMask {
    std::array<bool, kMaskWidth> bits{true, true, true, true};
    bool enabled = false;

    /// Parses "1010"-style strings. Throws ConfigError on bad length, characters, or an all-zero mask.
    static PatternMask parse(std::string_view text);
    /// Mask that drops `rate_percent` of each batch of four (0, 25, 50, 75): 1111, 1110, 1010, 1000.
    static PatternMask from_rate(int rate_percent);

    bool keeps(std::size_t index) const { return !enabled || bits[index % kMaskWidth]; }
    int popcount() const;
    /// Fraction of positions the mask removes (0 when disabled).
    double pattern_sparsity() const;
    std::string to_string() const;

    bool operator==(const PatternMask&) const = default;
};

struct Entry {
    double value = 0.0;
    std::uint32_t offset = 0;
    bool operator==(const Entry&) const = default;
};

/// One TSE slice: nonzero values with their slice-local dense offsets, in offset order.
struct Slice {
    int slice_id = 0;
    std::size_t dense_length = 0;
    std::vector<Entry> entries;
};

struct ZeroFreeStream {
    std::array<Slice, kNumSlices> slices;
};

struct SparsityStats {
    std::uint64_t dense_count = 0;
    std::uint64_t nonzero_count = 0;        // nonzero before masking
    std::uint64_t mask_retained_count = 0;  // positions the mask keeps
    std::uint64_t survivor_count = 0;       // nonzero and kept

    double inherent_sparsity() const;
    double pattern_sparsity() const;
    double combined_sparsity() const;

    SparsityStats& operator+=(const SparsityStats& o);
};

struct FilterResult {
    Slice slice;
    SparsityStats stats;
};

/// Element j survives iff the mask keeps j mod 4 and the value is nonzero; others become zero.
std::vector<double> apply_pattern_mask(std::span<const double> values, const PatternMask& mask);

/// Throws IndexError for slice_id outside [0, 16).
Slice encode_zero_free(std::span<const double> values, int slice_id);
std::vector<double> decode_zero_free(const Slice& slice);

/// Splits `values` into 16 contiguous slices of `slice_length` elements and encodes each.
ZeroFreeStream encode_stream(std::span<const double> values, std::size_t slice_length);
std::vector<double> decode_stream(const ZeroFreeStream& stream, std::size_t dense_length);

FilterResult two_stage_filter(std::span<const double> values, const PatternMask& mask, int slice_id);

/// Weight addresses base + offset for each entry offset; throws IndexError past row_length.
std::vector<std::size_t> gather_weights(std::span<const std::uint32_t> offsets, std::size_t weight_row_base,
                                        std::size_t row_length);
std::vector<std::size_t> gather_weights(const Slice& slice, std::size_t weight_row_base);

/// Sum of value * weights[addr] over a slice, in offset order.
double sparse_mac(const Slice& slice, std::span<const double> weights, std::size_t weight_row_base);

}  // namespace vikin::sparsity
