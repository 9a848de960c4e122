#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vikin/errors.hpp"
#include "vikin/network.hpp"

namespace vikin::model {

namespace {

// Bit-level conversion keeps the stream identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 engine_;
};

constexpr std::uint64_t kInputStream = 0x9e3779b97f4a7c15ULL;

double sparse_uniform(Rng& rng, double a, double zero_fraction) {
    const double v = rng.uniform(-a, a);
    return rng.unit() < zero_fraction ? 0.0 : v;
}

}  // namespace

SynthSpec SynthSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("synth spec \"" + text + "\" must look like kan:72,32,96");
    SynthSpec s;
    const std::string kind = text.substr(0, colon);
    if (kind == "kan") {
        s.kind = NetworkKind::Kan;
    } else if (kind == "mlp") {
        s.kind = NetworkKind::Mlp;
    } else {
        throw ConfigError("synth spec kind must be kan or mlp, got \"" + kind + "\"");
    }
    std::stringstream ss(text.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || v <= 0) throw ConfigError("synth spec size \"" + tok + "\" is not a positive integer");
        s.sizes.push_back(static_cast<std::size_t>(v));
    }
    if (s.sizes.size() < 2) throw ConfigError("synth spec needs at least two layer sizes");
    return s;
}

std::string SynthSpec::to_string() const {
    std::string s = model::to_string(kind) + ":";
    for (std::size_t i = 0; i < sizes.size(); ++i) s += (i ? "," : "") + std::to_string(sizes[i]);
    return s;
}

Network synth_model(const SynthSpec& spec, double zero_fraction) {
    if (spec.sizes.size() < 2) throw ConfigError("synth spec needs at least two layer sizes");
    if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0)) throw ConfigError("zero_fraction must lie in [0, 1]");
    Rng rng(spec.seed);
    Network net;
    for (std::size_t i = 0; i + 1 < spec.sizes.size(); ++i) {
        const std::size_t n_in = spec.sizes[i];
        const std::size_t n_out = spec.sizes[i + 1];
        if (spec.kind == NetworkKind::Kan) {
            KanLayer l = KanLayer::zeros(n_in, n_out, spline::build_knots(spec.grid_size, spec.order, spec.domain));
            const double a = 1.0 / std::sqrt(static_cast<double>(n_in));
            for (double& w : l.w_b) w = sparse_uniform(rng, a, zero_fraction);
            for (double& w : l.t) w = sparse_uniform(rng, a, zero_fraction);
            net.layers.emplace_back(std::move(l));
        } else {
            const bool last = i + 2 == spec.sizes.size();
            MlpLayer l = MlpLayer::zeros(n_in, n_out, last ? Activation::None : Activation::ReLU);
            const double a = std::sqrt(3.0 / static_cast<double>(n_in));
            for (double& w : l.weights) w = sparse_uniform(rng, a, zero_fraction);
            for (double& b : l.bias) b = sparse_uniform(rng, 0.1, zero_fraction);
            net.layers.emplace_back(std::move(l));
        }
    }
    net.validate();
    return net;
}

Network calibrate_relu_sparsity(Network net, std::span<const Vector> inputs, double zero_fraction) {
    if (net.kind() != NetworkKind::Mlp) throw ModeError("ReLU calibration needs an MLP network");
    if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0)) throw ConfigError("zero_fraction must lie in [0, 1]");
    if (inputs.empty()) return net;
    std::vector<Vector> acts(inputs.begin(), inputs.end());
    for (Layer& layer : net.layers) {
        auto& l = std::get<MlpLayer>(layer);
        MlpLayer linear = l;
        std::fill(linear.bias.begin(), linear.bias.end(), 0.0);
        linear.activation = Activation::None;
        std::vector<Vector> pre;
        pre.reserve(acts.size());
        for (const Vector& a : acts) pre.push_back(mlp_layer_forward(linear, a));

        if (l.activation == Activation::ReLU) {
            const std::size_t n = pre.size();
            const auto k = static_cast<std::size_t>(std::llround(zero_fraction * static_cast<double>(n)));
            for (std::size_t q = 0; q < l.n_out; ++q) {
                Vector col(n);
                for (std::size_t s = 0; s < n; ++s) col[s] = pre[s][q];
                std::sort(col.begin(), col.end());
                // Put the zero threshold midway between the k-th and (k+1)-th smallest pre-activation.
                const double below = k == 0 ? col.front() - 1.0 : col[k - 1];
                const double above = k == n ? col.back() + 1.0 : col[k];
                l.bias[q] = -0.5 * (below + above);
            }
        }
        for (Vector& a : acts) a = mlp_layer_forward(l, a);
    }
    return net;
}

std::vector<Vector> synth_inputs(const Network& net, std::size_t batch, std::uint64_t seed, double zero_fraction) {
    if (!(zero_fraction >= 0.0 && zero_fraction <= 1.0)) throw ConfigError("zero_fraction must lie in [0, 1]");
    double lo = 0.0;
    double hi = 1.0;
    if (const auto* k = std::get_if<KanLayer>(&net.layers.front())) {
        lo = k->spline.domain.lo;
        hi = k->spline.domain.hi;
    }
    Rng rng(seed ^ kInputStream);
    std::vector<Vector> out(batch, Vector(net.input_size()));
    for (Vector& v : out) {
        for (double& x : v) {
            x = rng.uniform(lo, hi);
            if (rng.unit() < zero_fraction) x = 0.0;
        }
    }
    return out;
}

}  // namespace vikin::model
