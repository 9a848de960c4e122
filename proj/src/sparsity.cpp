#include "vikin/sparsity.hpp"

#include <algorithm>
#include <string>

#include "vikin/errors.hpp"

namespace vikin::sparsity {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void check_slice_id(int slice_id) {
    if (slice_id < 0 || slice_id >= kNumSlices) {
        throw IndexError("slice id " + std::to_string(slice_id) + " outside [0, 16)");
    }
}

}  // namespace

PatternMask PatternMask::parse(std::string_view text) {
    if (text.size() != kMaskWidth) {
        throw ConfigError("pattern mask must have 4 characters, got \"" + std::string(text) + "\"");
    }
    PatternMask m;
    m.enabled = true;
    for (int i = 0; i < kMaskWidth; ++i) {
        if (text[i] != '0' && text[i] != '1') {
            throw ConfigError("pattern mask \"" + std::string(text) + "\" may only contain 0 and 1");
        }
        m.bits[i] = text[i] == '1';
    }
    if (m.popcount() == 0) throw ConfigError("pattern mask must keep at least one position");
    return m;
}

PatternMask PatternMask::from_rate(int rate_percent) {
    switch (rate_percent) {
        case 0: return PatternMask{};
        case 25: return parse("1110");
        case 50: return parse("1010");
        case 75: return parse("1000");
        default:
            throw ConfigError("pattern rate must be one of 0, 25, 50, 75 (got " + std::to_string(rate_percent) +
                              ")");
    }
}

int PatternMask::popcount() const {
    int n = 0;
    for (bool b : bits) n += b;
    return n;
}

double PatternMask::pattern_sparsity() const {
    return enabled ? 1.0 - static_cast<double>(popcount()) / kMaskWidth : 0.0;
}

std::string PatternMask::to_string() const {
    if (!enabled) return "off";
    std::string s;
    for (bool b : bits) s.push_back(b ? '1' : '0');
    return s;
}

double SparsityStats::inherent_sparsity() const { return 1.0 - ratio(nonzero_count, dense_count); }
double SparsityStats::pattern_sparsity() const { return 1.0 - ratio(mask_retained_count, dense_count); }
double SparsityStats::combined_sparsity() const { return 1.0 - ratio(survivor_count, dense_count); }

SparsityStats& SparsityStats::operator+=(const SparsityStats& o) {
    dense_count += o.dense_count;
    nonzero_count += o.nonzero_count;
    mask_retained_count += o.mask_retained_count;
    survivor_count += o.survivor_count;
    return *this;
}

std::vector<double> apply_pattern_mask(std::span<const double> values, const PatternMask& mask) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (mask.keeps(j) && values[j] != 0.0) out[j] = values[j];
    }
    return out;
}

Slice encode_zero_free(std::span<const double> values, int slice_id) {
    check_slice_id(slice_id);
    Slice s;
    s.slice_id = slice_id;
    s.dense_length = values.size();
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j] != 0.0) s.entries.push_back({values[j], static_cast<std::uint32_t>(j)});
    }
    return s;
}

std::vector<double> decode_zero_free(const Slice& slice) {
    std::vector<double> out(slice.dense_length, 0.0);
    for (const Entry& e : slice.entries) {
        if (e.offset >= out.size()) throw IndexError("slice offset beyond dense length");
        out[e.offset] = e.value;
    }
    return out;
}

ZeroFreeStream encode_stream(std::span<const double> values, std::size_t slice_length) {
    if (slice_length * kNumSlices < values.size()) {
        throw ShapeError("stream of " + std::to_string(values.size()) + " elements does not fit 16 slices of " +
                         std::to_string(slice_length));
    }
    ZeroFreeStream z;
    for (int s = 0; s < kNumSlices; ++s) {
        const std::size_t begin = std::min(values.size(), s * slice_length);
        const std::size_t end = std::min(values.size(), begin + slice_length);
        z.slices[s] = encode_zero_free(values.subspan(begin, end - begin), s);
    }
    return z;
}

std::vector<double> decode_stream(const ZeroFreeStream& stream, std::size_t dense_length) {
    std::vector<double> out;
    out.reserve(dense_length);
    for (const Slice& s : stream.slices) {
        auto part = decode_zero_free(s);
        out.insert(out.end(), part.begin(), part.end());
    }
    if (out.size() != dense_length) throw ShapeError("decoded stream length mismatch");
    return out;
}

FilterResult two_stage_filter(std::span<const double> values, const PatternMask& mask, int slice_id) {
    FilterResult r;
    r.slice = encode_zero_free(apply_pattern_mask(values, mask), slice_id);
    r.slice.dense_length = values.size();
    r.stats.dense_count = values.size();
    for (std::size_t j = 0; j < values.size(); ++j) {
        r.stats.nonzero_count += values[j] != 0.0;
        r.stats.mask_retained_count += mask.keeps(j);
    }
    r.stats.survivor_count = r.slice.entries.size();
    return r;
}

std::vector<std::size_t> gather_weights(std::span<const std::uint32_t> offsets, std::size_t weight_row_base,
                                        std::size_t row_length) {
    std::vector<std::size_t> addrs;
    addrs.reserve(offsets.size());
    for (std::uint32_t off : offsets) {
        if (off >= row_length) {
            throw IndexError("offset " + std::to_string(off) + " outside weight row of length " +
                             std::to_string(row_length));
        }
        addrs.push_back(weight_row_base + off);
    }
    return addrs;
}

std::vector<std::size_t> gather_weights(const Slice& slice, std::size_t weight_row_base) {
    std::vector<std::uint32_t> offsets;
    offsets.reserve(slice.entries.size());
    for (const Entry& e : slice.entries) offsets.push_back(e.offset);
    return gather_weights(offsets, weight_row_base, slice.dense_length);
}

double sparse_mac(const Slice& slice, std::span<const double> weights, std::size_t weight_row_base) {
    double acc = 0.0;
    for (const Entry& e : slice.entries) {
        const std::size_t addr = weight_row_base + e.offset;
        if (e.offset >= slice.dense_length || addr >= weights.size()) throw IndexError("weight address out of range");
        acc += e.value * weights[addr];
    }
    return acc;
}

}  // namespace vikin::sparsity
