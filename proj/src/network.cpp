#include "vikin/network.hpp"

#include <cmath>
#include <string>

#include "vikin/errors.hpp"

namespace vikin::model {

namespace {

void check_finite(const Vector& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw ConfigError(std::string(what) + " contains a non-finite value");
    }
}

void check_input(std::span<const double> x, std::size_t expected, const char* layer) {
    if (x.size() != expected) {
        throw ShapeError(std::string(layer) + " input has " + std::to_string(x.size()) + " elements, expected " +
                         std::to_string(expected));
    }
}

}  // namespace

KanLayer KanLayer::zeros(std::size_t n_in, std::size_t n_out, spline::SplineConfig cfg) {
    if (n_in == 0 || n_out == 0) throw ConfigError("KAN layer dimensions must be positive");
    KanLayer l;
    l.n_in = n_in;
    l.n_out = n_out;
    l.spline = std::move(cfg);
    l.w_b.assign(n_in * n_out, 0.0);
    l.t.assign(n_in * n_out * l.num_bases(), 0.0);
    return l;
}

void KanLayer::validate() const {
    if (n_in == 0 || n_out == 0) throw ConfigError("KAN layer dimensions must be positive");
    if (spline.knots.size() != static_cast<std::size_t>(spline.grid_size + 2 * spline.order + 1)) {
        throw ConfigError("KAN layer spline knots inconsistent with G and K");
    }
    if (w_b.size() != n_in * n_out) {
        throw ShapeError("w_b has " + std::to_string(w_b.size()) + " entries, expected " +
                         std::to_string(n_in * n_out));
    }
    if (t.size() != n_in * n_out * num_bases()) {
        throw ShapeError("t has " + std::to_string(t.size()) + " entries, expected " +
                         std::to_string(n_in * n_out * num_bases()));
    }
    check_finite(w_b, "w_b");
    check_finite(t, "t");
}

MlpLayer MlpLayer::zeros(std::size_t n_in, std::size_t n_out, Activation act) {
    if (n_in == 0 || n_out == 0) throw ConfigError("MLP layer dimensions must be positive");
    return MlpLayer{n_in, n_out, Vector(n_in * n_out, 0.0), Vector(n_out, 0.0), act};
}

void MlpLayer::validate() const {
    if (n_in == 0 || n_out == 0) throw ConfigError("MLP layer dimensions must be positive");
    if (weights.size() != n_in * n_out) throw ShapeError("MLP weight matrix size mismatch");
    if (bias.size() != n_out) throw ShapeError("MLP bias size mismatch");
    check_finite(weights, "MLP weights");
    check_finite(bias, "MLP bias");
}

std::size_t layer_inputs(const Layer& l) {
    return std::visit([](const auto& x) { return x.n_in; }, l);
}

std::size_t layer_outputs(const Layer& l) {
    return std::visit([](const auto& x) { return x.n_out; }, l);
}

NetworkKind Network::kind() const {
    if (layers.empty()) throw ConfigError("network has no layers");
    const bool first_kan = std::holds_alternative<KanLayer>(layers.front());
    for (const Layer& l : layers) {
        if (std::holds_alternative<KanLayer>(l) != first_kan) {
            throw ConfigError("mixed KAN/MLP networks are not supported");
        }
    }
    return first_kan ? NetworkKind::Kan : NetworkKind::Mlp;
}

void Network::validate() const {
    const NetworkKind k = kind();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::visit([](const auto& l) { l.validate(); }, layers[i]);
        if (i + 1 < layers.size() && layer_outputs(layers[i]) != layer_inputs(layers[i + 1])) {
            throw ShapeError("layer " + std::to_string(i) + " produces " + std::to_string(layer_outputs(layers[i])) +
                             " outputs but layer " + std::to_string(i + 1) + " expects " +
                             std::to_string(layer_inputs(layers[i + 1])));
        }
    }
    if (k == NetworkKind::Mlp && std::get<MlpLayer>(layers.back()).activation != Activation::None) {
        throw ConfigError("final MLP layer must not apply an activation");
    }
}

std::string to_string(NetworkKind k) { return k == NetworkKind::Kan ? "kan" : "mlp"; }

Vector kan_basis_stream(const KanLayer& layer, double x, const sparsity::PatternMask& mask,
                        const HalfPrecisionPolicy& policy) {
    Vector b = spline::eval_basis(layer.spline, x).values;
    for (double& v : b) v = policy.round(v);
    return sparsity::apply_pattern_mask(b, mask);
}

Vector kan_layer_forward(const KanLayer& layer, std::span<const double> x, const HalfPrecisionPolicy& policy,
                         const sparsity::PatternMask& mask) {
    check_input(x, layer.n_in, "KAN layer");
    const std::size_t nb = layer.num_bases();
    Vector silu_vals(layer.n_in);
    std::vector<Vector> bases(layer.n_in);
    for (std::size_t p = 0; p < layer.n_in; ++p) {
        const double xp = policy.round(x[p]);
        silu_vals[p] = policy.round(spline::silu(xp));
        bases[p] = kan_basis_stream(layer, xp, mask, policy);
    }
    Vector out(layer.n_out, 0.0);
    for (std::size_t q = 0; q < layer.n_out; ++q) {
        double acc = 0.0;
        for (std::size_t p = 0; p < layer.n_in; ++p) {
            acc = policy.add(acc, policy.mul(layer.base_weight(q, p), silu_vals[p]));
            const std::size_t row = layer.coeff_index(q, p, 0);
            for (std::size_t i = 0; i < nb; ++i) acc = policy.add(acc, policy.mul(layer.t[row + i], bases[p][i]));
        }
        out[q] = acc;
    }
    return out;
}

Vector mlp_layer_forward(const MlpLayer& layer, std::span<const double> x, const HalfPrecisionPolicy& policy,
                         const sparsity::PatternMask& mask) {
    check_input(x, layer.n_in, "MLP layer");
    Vector xin(x.begin(), x.end());
    for (double& v : xin) v = policy.round(v);
    xin = sparsity::apply_pattern_mask(xin, mask);
    Vector out(layer.n_out, 0.0);
    for (std::size_t q = 0; q < layer.n_out; ++q) {
        double acc = 0.0;
        const double* row = layer.weights.data() + q * layer.n_in;
        for (std::size_t j = 0; j < layer.n_in; ++j) acc = policy.add(acc, policy.mul(row[j], xin[j]));
        acc = policy.add(acc, layer.bias[q]);
        if (layer.activation == Activation::ReLU && acc < 0.0) acc = 0.0;
        out[q] = acc;
    }
    return out;
}

Vector network_forward(const Network& net, std::span<const double> x, const HalfPrecisionPolicy& policy,
                       const MaskSet& masks) {
    if (!masks.empty() && masks.size() != net.layers.size()) {
        throw ConfigError("expected one mask per layer (" + std::to_string(net.layers.size()) + "), got " +
                          std::to_string(masks.size()));
    }
    Vector cur(x.begin(), x.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (cur.size() != layer_inputs(net.layers[i])) {
            throw ShapeError("layer " + std::to_string(i) + " expects " +
                             std::to_string(layer_inputs(net.layers[i])) + " inputs, got " +
                             std::to_string(cur.size()));
        }
        const sparsity::PatternMask mask = masks.empty() ? sparsity::PatternMask{} : masks[i];
        cur = std::visit(
            [&](const auto& l) -> Vector {
                if constexpr (std::is_same_v<std::decay_t<decltype(l)>, KanLayer>) {
                    return kan_layer_forward(l, cur, policy, mask);
                } else {
                    return mlp_layer_forward(l, cur, policy, mask);
                }
            },
            net.layers[i]);
    }
    return cur;
}

Vector EquivalentLinear::apply(std::span<const double> x) const {
    const Vector mid = intermediates(x);
    const std::size_t cols = n_in * per_input;
    Vector out(n_out, 0.0);
    for (std::size_t q = 0; q < n_out; ++q) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += matrix[q * cols + c] * mid[c];
        out[q] = acc;
    }
    return out;
}

EquivalentLinear as_equivalent_linear(const KanLayer& layer) {
    layer.validate();
    const std::size_t nb = layer.num_bases();
    EquivalentLinear eq;
    eq.n_in = layer.n_in;
    eq.n_out = layer.n_out;
    eq.per_input = nb + 1;
    const std::size_t cols = layer.n_in * eq.per_input;
    eq.matrix.assign(layer.n_out * cols, 0.0);
    for (std::size_t q = 0; q < layer.n_out; ++q) {
        for (std::size_t p = 0; p < layer.n_in; ++p) {
            double* dst = eq.matrix.data() + q * cols + p * eq.per_input;
            for (std::size_t i = 0; i < nb; ++i) dst[i] = layer.t[layer.coeff_index(q, p, i)];
            dst[nb] = layer.base_weight(q, p);
        }
    }
    eq.intermediates = [cfg = layer.spline, n_in = layer.n_in, nb](std::span<const double> x) {
        check_input(x, n_in, "equivalent-linear");
        Vector mid;
        mid.reserve(n_in * (nb + 1));
        for (double xp : x) {
            const auto b = spline::eval_basis(cfg, xp);
            mid.insert(mid.end(), b.values.begin(), b.values.end());
            mid.push_back(spline::silu(xp));
        }
        return mid;
    };
    return eq;
}

Vector fold_weights(std::span<const double> w_s, std::span<const double> c, std::size_t num_bases) {
    if (num_bases == 0 || c.size() != w_s.size() * num_bases) {
        throw ShapeError("coefficient tensor has " + std::to_string(c.size()) + " entries, expected " +
                         std::to_string(w_s.size() * num_bases));
    }
    Vector t(c.size());
    for (std::size_t e = 0; e < w_s.size(); ++e) {
        for (std::size_t i = 0; i < num_bases; ++i) t[e * num_bases + i] = w_s[e] * c[e * num_bases + i];
    }
    return t;
}

}  // namespace vikin::model
