#include <bit>
#include <cmath>
#include <functional>
#include <random>

#include "vikin/bench.hpp"
#include "vikin/errors.hpp"
#include "vikin/half.hpp"
#include "vikin/sparsity.hpp"
#include "vikin/spline.hpp"

namespace vikin::bench {

namespace {

using model::Vector;

struct Ctx {
    std::mt19937_64 rng;
    bool fault = false;

    double unit() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int pick(std::initializer_list<int> xs) { return *(xs.begin() + rng() % xs.size()); }
    std::size_t range(std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }
};

// Basis values as the checks see them; the fault hook corrupts one nonzero entry.
std::vector<double> basis_under_test(const Ctx& c, const spline::SplineConfig& cfg, double x) {
    auto b = spline::eval_basis(cfg, x).values;
    if (c.fault) {
        for (double& v : b) {
            if (v != 0.0) {
                v = -v;
                break;
            }
        }
    }
    return b;
}

// Textbook recursion straight from the knot vector.
double naive_basis(const std::vector<double>& t, std::size_t i, int k, double x) {
    if (k == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
    const double a = (x - t[i]) / (t[i + k] - t[i]) * naive_basis(t, i, k - 1, x);
    const double b = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * naive_basis(t, i + 1, k - 1, x);
    return a + b;
}

std::vector<double> naive_knots(int g, int k, double lo, double hi) {
    std::vector<double> t;
    const double h = (hi - lo) / g;
    for (int j = 0; j <= g + 2 * k; ++j) t.push_back(lo + (j - k) * h);
    return t;
}

double naive_clamp(double x, double lo, double hi, int g) {
    const double h = (hi - lo) / g;
    if (x < lo) return lo;
    if (x >= hi) return hi - std::ldexp(h, -20);
    return x;
}

spline::SplineConfig random_spline(Ctx& c) {
    return spline::build_knots(c.pick({2, 4, 8, 16}), c.pick({1, 2, 3, 4}));
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol * (1.0 + std::fabs(b)); }

bool bit_equal(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    return true;
}

using Check = std::function<std::string(Ctx&)>;  // empty string on success

constexpr int kSamplesPerConfig = 10000;

// Runs fn over kSamplesPerConfig inputs for every supported (G, K), including knots and both ends.
template <typename Fn>
std::string for_each_sample(Ctx& c, Fn fn) {
    for (int g : {2, 4, 8, 16}) {
        for (int k = 1; k <= 4; ++k) {
            const auto cfg = spline::build_knots(g, k);
            for (int n = 0; n < kSamplesPerConfig; ++n) {
                const double x = n <= g ? -1.0 + n * (2.0 / g) : c.uniform(-1.5, 1.5);
                auto msg = fn(cfg, x);
                if (!msg.empty()) return msg + " (G=" + std::to_string(g) + " K=" + std::to_string(k) + ")";
            }
        }
    }
    return {};
}

std::string partition_of_unity(Ctx& c) {
    return for_each_sample(c, [&](const spline::SplineConfig& cfg, double x) -> std::string {
        double s = 0.0;
        for (double v : basis_under_test(c, cfg, x)) s += v;
        if (std::fabs(s - 1.0) > 1e-12) return "sum " + std::to_string(s) + " at x=" + std::to_string(x);
        return {};
    });
}

std::string non_negativity(Ctx& c) {
    return for_each_sample(c, [&](const spline::SplineConfig& cfg, double x) -> std::string {
        for (double v : basis_under_test(c, cfg, x)) {
            if (v < 0.0) return "negative basis value at x=" + std::to_string(x);
        }
        return {};
    });
}

std::string local_support(Ctx& c) {
    return for_each_sample(c, [&](const spline::SplineConfig& cfg, double x) -> std::string {
        const auto b = basis_under_test(c, cfg, x);
        std::size_t nz = 0;
        std::size_t first = b.size();
        std::size_t last = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (b[i] != 0.0) {
                ++nz;
                first = std::min(first, i);
                last = i;
            }
        }
        if (nz > static_cast<std::size_t>(cfg.order + 1)) return "more than K+1 nonzero bases";
        if (nz > 0 && last - first > static_cast<std::size_t>(cfg.order)) return "nonzero bases not contiguous";
        return {};
    });
}

std::string basis_oracle(Ctx& c) {
    for (int trial = 0; trial < 500; ++trial) {
        const int g = c.pick({2, 4, 8, 16});
        const int k = c.pick({1, 2, 3, 4});
        const auto cfg = spline::build_knots(g, k);
        const double x = trial < 20 ? (trial % 2 ? 1.0 : -1.0) : c.uniform(-1.5, 1.5);
        const auto t = naive_knots(g, k, -1.0, 1.0);
        const double xc = naive_clamp(x, -1.0, 1.0, g);
        const auto b = basis_under_test(c, cfg, x);
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (!close(b[i], naive_basis(t, i, k, xc), 1e-12)) {
                return "B_" + std::to_string(i) + " differs at G=" + std::to_string(g) + " K=" + std::to_string(k) +
                       " x=" + std::to_string(x);
            }
        }
    }
    return {};
}

std::string reciprocal_exact(Ctx&) {
    for (int g : {2, 4, 8, 16}) {
        const double h = 2.0 / g;
        for (int k = 1; k <= 4; ++k) {
            for (int m = 1; m <= k; ++m) {
                if (spline::reciprocal_div_free(k, m, h) != 1.0 / (m * h)) {
                    return "1/(" + std::to_string(m) + "h) inexact at G=" + std::to_string(g);
                }
            }
        }
    }
    return {};
}

std::string reuse_identity(Ctx& c) {
    for (int trial = 0; trial < 200; ++trial) {
        const auto cfg = random_spline(c);
        const double x = c.uniform(-1.2, 1.2);
        const auto r = spline::eval_basis_with_reuse(cfg, x);
        if (!bit_equal(r.basis.values, spline::eval_basis(cfg, x).values)) return "reuse changes basis values";
        const std::uint64_t n0 = cfg.grid_size + 2 * cfg.order;
        std::uint64_t s = 0;
        for (int k = 1; k <= cfg.order; ++k) s += n0 - k;
        if (r.counts.with_reuse != (n0 + 1) + 7 * s || r.counts.without_reuse != (n0 + 1) + 9 * s) {
            return "operation counts off";
        }
        if (!(r.counts.with_reuse < r.counts.without_reuse)) return "no saving";
    }
    return {};
}

model::KanLayer random_kan(Ctx& c, std::size_t n_in, std::size_t n_out, double zf = 0.0) {
    auto l = model::KanLayer::zeros(n_in, n_out, random_spline(c));
    for (double& w : l.w_b) w = c.unit() < zf ? 0.0 : c.uniform(-1, 1);
    for (double& w : l.t) w = c.unit() < zf ? 0.0 : c.uniform(-1, 1);
    return l;
}

model::MlpLayer random_mlp(Ctx& c, std::size_t n_in, std::size_t n_out, model::Activation act, double zf = 0.0) {
    auto l = model::MlpLayer::zeros(n_in, n_out, act);
    for (double& w : l.weights) w = c.unit() < zf ? 0.0 : c.uniform(-1, 1);
    for (double& b : l.bias) b = c.uniform(-0.2, 0.2);
    return l;
}

Vector random_vec(Ctx& c, std::size_t n, double zf = 0.0, double lo = -1.2, double hi = 1.2) {
    Vector v(n);
    for (double& x : v) x = c.unit() < zf ? 0.0 : c.uniform(lo, hi);
    return v;
}

std::string kan_forward_oracle(Ctx& c) {
    for (int trial = 0; trial < 50; ++trial) {
        const auto l = random_kan(c, c.range(1, 12), c.range(1, 12));
        const auto x = random_vec(c, l.n_in);
        const auto out = model::kan_layer_forward(l, x);
        const auto t = naive_knots(l.spline.grid_size, l.spline.order, -1.0, 1.0);
        const std::size_t nb = l.num_bases();
        for (std::size_t q = 0; q < l.n_out; ++q) {
            double ref = 0.0;
            for (std::size_t p = 0; p < l.n_in; ++p) {
                const double s = x[p] / (1.0 + std::exp(-x[p]));
                ref += l.w_b[q * l.n_in + p] * s;
                const double xc = naive_clamp(x[p], -1.0, 1.0, l.spline.grid_size);
                for (std::size_t i = 0; i < nb; ++i) {
                    ref += l.t[(q * l.n_in + p) * nb + i] * naive_basis(t, i, l.spline.order, xc);
                }
            }
            if (!close(out[q], ref, 1e-10)) return "output " + std::to_string(q) + " differs from oracle";
        }
    }
    return {};
}

std::string equivalent_linear(Ctx& c) {
    for (int trial = 0; trial < 50; ++trial) {
        const auto l = random_kan(c, c.range(1, 10), c.range(1, 10));
        const auto lin = model::as_equivalent_linear(l);
        if (lin.per_input != l.num_bases() + 1) return "wrong intermediates per input";
        const auto x = random_vec(c, l.n_in);
        const auto a = lin.apply(x);
        const auto b = model::kan_layer_forward(l, x);
        for (std::size_t q = 0; q < l.n_out; ++q) {
            if (!close(a[q], b[q], 1e-12)) return "linear form differs at output " + std::to_string(q);
        }
    }
    return {};
}

std::string weight_folding(Ctx& c) {
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t edges = c.range(1, 20);
        const std::size_t nb = c.range(3, 20);
        const auto ws = random_vec(c, edges);
        const auto cf = random_vec(c, edges * nb);
        const auto t = model::fold_weights(ws, cf, nb);
        for (std::size_t e = 0; e < edges; ++e) {
            for (std::size_t i = 0; i < nb; ++i) {
                if (t[e * nb + i] != ws[e] * cf[e * nb + i]) return "folded coefficient mismatch";
            }
        }
    }
    return {};
}

std::string sparse_equals_dense(Ctx& c) {
    const char* rates[] = {"off", "1110", "1010", "1000", "0110"};
    for (int trial = 0; trial < 100; ++trial) {
        model::Network net;
        const bool kan = trial % 2 == 0;
        const std::size_t depth = c.range(1, 3);
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i <= depth; ++i) sizes.push_back(c.range(1, 40));
        const double zf = c.unit() * 0.6;
        for (std::size_t i = 0; i < depth; ++i) {
            if (kan) {
                net.layers.emplace_back(random_kan(c, sizes[i], sizes[i + 1], zf));
            } else {
                const auto act = i + 1 == depth ? model::Activation::None : model::Activation::ReLU;
                net.layers.emplace_back(random_mlp(c, sizes[i], sizes[i + 1], act, zf));
            }
        }
        if (kan) {
            // All layers in one net share the first layer's spline config.
            const auto cfg = std::get<model::KanLayer>(net.layers.front()).spline;
            for (auto& l : net.layers) {
                auto& k = std::get<model::KanLayer>(l);
                if (k.spline.num_bases() != cfg.num_bases()) {
                    k = model::KanLayer::zeros(k.n_in, k.n_out, cfg);
                    for (double& w : k.t) w = c.unit() < zf ? 0.0 : c.uniform(-1, 1);
                    for (double& w : k.w_b) w = c.uniform(-1, 1);
                }
                k.spline = cfg;
            }
        }
        std::vector<Vector> inputs;
        for (int b = 0; b < 4; ++b) inputs.push_back(random_vec(c, sizes[0], zf));
        const std::string rate = rates[c.rng() % 5];
        model::MaskSet masks;
        if (rate != "off") masks.assign(depth, sparsity::PatternMask::parse(rate));

        sim::SimConfig cfg;
        cfg.mode = kan ? sim::SimMode::PipelineKan : sim::SimMode::ParallelMlp;
        cfg.policy.enabled = trial % 5 == 4;
        const auto res = sim::simulate(net, inputs, masks, cfg);
        for (std::size_t b = 0; b < inputs.size(); ++b) {
            if (!bit_equal(res.outputs[b], model::network_forward(net, inputs[b], cfg.policy, masks))) {
                return "trial " + std::to_string(trial) + " diverges from the dense reference";
            }
        }
        if (!res.report.conserves_macs()) return "trial " + std::to_string(trial) + " loses MACs";
    }
    return {};
}

std::string zero_free_roundtrip(Ctx& c) {
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = c.range(1, 300);
        const auto v = random_vec(c, n, c.unit());
        const std::size_t slice = (n + sparsity::kNumSlices - 1) / sparsity::kNumSlices;
        const auto stream = sparsity::encode_stream(v, slice);
        if (!bit_equal(sparsity::decode_stream(stream, n), v)) return "round trip changed values";
        for (const auto& s : stream.slices) {
            for (const auto& e : s.entries) {
                if (e.value == 0.0) return "zero survived encoding";
            }
        }
    }
    return {};
}

std::string mac_conservation(Ctx& c) {
    for (int trial = 0; trial < 30; ++trial) {
        model::SynthSpec spec;
        spec.kind = trial % 2 ? model::NetworkKind::Kan : model::NetworkKind::Mlp;
        spec.sizes = {c.range(1, 48), c.range(1, 48), c.range(1, 48)};
        spec.seed = c.rng();
        const auto net = model::synth_model(spec, c.unit() * 0.5);
        const auto inputs = model::synth_inputs(net, 3, spec.seed, c.unit() * 0.5);
        sim::SimConfig cfg;
        cfg.mode = trial % 2 ? sim::SimMode::PipelineKan : sim::SimMode::ParallelMlp;
        cfg.spu_accumulation = trial % 4 < 2;
        const auto masks = model::MaskSet(2, sparsity::PatternMask::from_rate(c.pick({0, 25, 50, 75})));
        const auto r = sim::simulate(net, inputs, masks, cfg).report;
        if (r.ops.executed_macs() + r.ops.skipped_pe_macs != r.ops.dense_macs) {
            return "executed " + std::to_string(r.ops.executed_macs()) + " + skipped " +
                   std::to_string(r.ops.skipped_pe_macs) + " != dense " + std::to_string(r.ops.dense_macs);
        }
    }
    return {};
}

std::string cycle_monotonicity(Ctx& c) {
    const int ladder[] = {0, 25, 50, 75};
    for (int trial = 0; trial < 20; ++trial) {
        model::SynthSpec spec;
        spec.kind = model::NetworkKind::Kan;
        spec.sizes = {c.range(1, 64), c.range(1, 64)};
        spec.grid_size = c.pick({2, 4, 8, 16});
        spec.order = c.pick({1, 2, 3, 4});
        spec.seed = c.rng();
        const auto net = model::synth_model(spec);
        const auto inputs = model::synth_inputs(net, 4, spec.seed, 0.0);
        sim::SimConfig cfg;
        std::uint64_t prev = UINT64_MAX;
        for (int rate : ladder) {
            const model::MaskSet masks(1, sparsity::PatternMask::from_rate(rate));
            const auto cycles = sim::simulate(net, inputs, masks, cfg).report.total_cycles;
            if (cycles > prev) return "cycles grew from " + std::to_string(prev) + " at rate " + std::to_string(rate);
            prev = cycles;
        }
    }
    return {};
}

std::string baseline_dominance(Ctx& c) {
    for (int trial = 0; trial < 20; ++trial) {
        model::SynthSpec spec;
        spec.kind = trial % 2 ? model::NetworkKind::Kan : model::NetworkKind::Mlp;
        spec.sizes = {16 * c.range(1, 4), 16 * c.range(1, 4), 16 * c.range(1, 4)};
        spec.seed = c.rng();
        const auto net = model::synth_model(spec);
        const auto inputs = model::synth_inputs(net, 4, spec.seed, c.unit() * 0.5);
        sim::SimConfig cfg;
        cfg.mode = trial % 2 ? sim::SimMode::PipelineKan : sim::SimMode::ParallelMlp;
        const auto r = sim::simulate(net, inputs, {}, cfg).report;
        if (r.total_cycles > r.baseline_cycles) {
            return "sparse " + std::to_string(r.total_cycles) + " > baseline " + std::to_string(r.baseline_cycles);
        }
    }
    return {};
}

std::string model_roundtrip(Ctx& c) {
    for (int trial = 0; trial < 10; ++trial) {
        model::SynthSpec spec;
        spec.kind = trial % 2 ? model::NetworkKind::Kan : model::NetworkKind::Mlp;
        spec.sizes = {c.range(1, 20), c.range(1, 20), c.range(1, 20)};
        spec.seed = c.rng();
        const auto net = model::synth_model(spec, 0.2);
        const auto bytes = model::serialize_model(net);
        const auto back = model::deserialize_model(bytes);
        if (model::serialize_model(back) != bytes) return "bytes differ after round trip";
        const auto x = random_vec(c, net.input_size());
        if (!bit_equal(model::network_forward(net, x), model::network_forward(back, x))) return "outputs differ";
    }
    return {};
}

std::string half_bound(Ctx& c) {
    for (int trial = 0; trial < 5000; ++trial) {
        const double x = std::ldexp(c.uniform(-1, 1), static_cast<int>(c.range(0, 40)) - 28);
        const double r = model::round_to_half(x);
        const double tol = std::fabs(x) >= 0x1.0p-14 ? std::ldexp(std::fabs(x), -11) : 0x1.0p-25;
        if (std::fabs(r - x) > tol) return "rounding error too large at " + std::to_string(x);
        if (model::round_to_half(r) != r) return "rounding not idempotent";
    }
    return {};
}

}  // namespace

VerifySummary cmd_verify(const VerifyOptions& opts) {
    const std::pair<const char*, Check> checks[] = {
        {"partition_of_unity", partition_of_unity},
        {"basis_non_negative", non_negativity},
        {"basis_local_support", local_support},
        {"basis_matches_naive_recursion", basis_oracle},
        {"div_free_reciprocal_exact", reciprocal_exact},
        {"reuse_identity_and_counts", reuse_identity},
        {"kan_forward_matches_oracle", kan_forward_oracle},
        {"equivalent_linear_fidelity", equivalent_linear},
        {"weight_folding", weight_folding},
        {"sparse_equals_dense_100_nets", sparse_equals_dense},
        {"zero_free_round_trip", zero_free_roundtrip},
        {"mac_conservation", mac_conservation},
        {"cycles_monotone_in_mask_ladder", cycle_monotonicity},
        {"sparse_not_slower_than_baseline", baseline_dominance},
        {"model_file_round_trip", model_roundtrip},
        {"half_precision_error_bound", half_bound},
    };
    VerifySummary summary;
    for (const auto& [name, check] : checks) {
        Ctx ctx{std::mt19937_64(opts.seed), opts.inject_basis_sign_fault};
        PropertyResult r{name, false, {}};
        try {
            r.detail = check(ctx);
            r.passed = r.detail.empty();
        } catch (const std::exception& e) {
            r.detail = std::string("threw: ") + e.what();
        }
        summary.properties.push_back(std::move(r));
    }
    return summary;
}

}  // namespace vikin::bench
