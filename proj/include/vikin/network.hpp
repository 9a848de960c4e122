#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vikin/half.hpp"
#include "vikin/sparsity.hpp"
#include "vikin/spline.hpp"

namespace vikin::model {

using Vector = std::vector<double>;

/// KAN layer with folded spline coefficients: phi(x) = w_b * silu(x) + sum_i t_i * B_i(x).
///
/// w_b is row-major [n_out][n_in]; t is [n_out][n_in][G+K].
struct KanLayer {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    spline::SplineConfig spline;
    Vector w_b;
    Vector t;

    std::size_t num_bases() const { return spline.num_bases(); }
    double& base_weight(std::size_t q, std::size_t p) { return w_b[q * n_in + p]; }
    double base_weight(std::size_t q, std::size_t p) const { return w_b[q * n_in + p]; }
    std::size_t coeff_index(std::size_t q, std::size_t p, std::size_t i) const {
        return (q * n_in + p) * num_bases() + i;
    }

    /// Zero-initialised layer. Throws ConfigError for empty dimensions.
    static KanLayer zeros(std::size_t n_in, std::size_t n_out, spline::SplineConfig cfg);
    void validate() const;

    bool operator==(const KanLayer&) const = default;
};

enum class Activation { None, ReLU };

struct MlpLayer {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    Vector weights;  // [n_out][n_in]
    Vector bias;     // [n_out]
    Activation activation = Activation::None;

    static MlpLayer zeros(std::size_t n_in, std::size_t n_out, Activation act);
    void validate() const;

    bool operator==(const MlpLayer&) const = default;
};

using Layer = std::variant<KanLayer, MlpLayer>;

enum class NetworkKind { Kan, Mlp };

std::size_t layer_inputs(const Layer& l);
std::size_t layer_outputs(const Layer& l);

struct Network {
    std::vector<Layer> layers;

    /// Throws ConfigError for empty or mixed networks, ShapeError for broken chains.
    NetworkKind kind() const;
    void validate() const;
    std::size_t input_size() const { return layer_inputs(layers.front()); }
    std::size_t output_size() const { return layer_outputs(layers.back()); }

    bool operator==(const Network&) const = default;
};

std::string to_string(NetworkKind k);

/// Per-layer activation masks; empty means no pattern masking anywhere.
using MaskSet = std::vector<sparsity::PatternMask>;

/// Basis vector of one input with FP16 rounding and pattern masking applied, as the
/// PE array sees it. The mask phase restarts at basis index 0.
Vector kan_basis_stream(const KanLayer& layer, double x, const sparsity::PatternMask& mask,
                        const HalfPrecisionPolicy& policy);

/// out[q] = sum_p (w_b[q,p] silu(x_p) + sum_i t[q,p,i] B_i(x_p)), accumulated in order p then i.
Vector kan_layer_forward(const KanLayer& layer, std::span<const double> x, const HalfPrecisionPolicy& policy = {},
                         const sparsity::PatternMask& mask = {});

/// out = act(W x + b); the mask applies to the input activations.
Vector mlp_layer_forward(const MlpLayer& layer, std::span<const double> x, const HalfPrecisionPolicy& policy = {},
                         const sparsity::PatternMask& mask = {});

Vector network_forward(const Network& net, std::span<const double> x, const HalfPrecisionPolicy& policy = {},
                       const MaskSet& masks = {});

/// KAN layer lowered to a plain linear map over per-input intermediates.
///
/// Intermediates per input: G+K basis values followed by one SiLU value.
struct EquivalentLinear {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::size_t per_input = 0;
    Vector matrix;  // [n_out][n_in * per_input]
    std::function<Vector(std::span<const double>)> intermediates;

    Vector apply(std::span<const double> x) const;
};

EquivalentLinear as_equivalent_linear(const KanLayer& layer);

/// t[q,p,i] = w_s[q,p] * c[q,p,i].
Vector fold_weights(std::span<const double> w_s, std::span<const double> c, std::size_t num_bases);

/// Model file: "VIKN", u32 version, u32 header length, JSON header, little-endian f64 weight blocks.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Network& net);
Network deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

struct SynthSpec {
    NetworkKind kind = NetworkKind::Kan;
    std::vector<std::size_t> sizes;  // node counts, e.g. {72, 32, 96}
    int grid_size = 4;
    int order = 3;
    spline::Domain domain;
    std::uint64_t seed = 1;

    /// Parses "kan:72,32,96" or "mlp:72,304,96".
    static SynthSpec parse(const std::string& text);
    std::string to_string() const;
};

/// Seeded random network; each weight (and MLP bias) is independently zeroed with
/// probability zero_fraction. MLP layers use ReLU except the last.
Network synth_model(const SynthSpec& spec, double zero_fraction = 0.0);

/// Shifts hidden MLP biases so that, over `inputs`, about `zero_fraction` of each hidden
/// node's post-ReLU outputs are zero. Returns the adjusted network.
Network calibrate_relu_sparsity(Network net, std::span<const Vector> inputs, double zero_fraction);

/// Deterministic input batch: uniform in the first layer's domain (KAN) or [0, 1) (MLP),
/// with each element zeroed with probability zero_fraction.
std::vector<Vector> synth_inputs(const Network& net, std::size_t batch, std::uint64_t seed, double zero_fraction);

}  // namespace vikin::model
