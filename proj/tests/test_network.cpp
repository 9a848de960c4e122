#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "vikin/errors.hpp"
#include "vikin/network.hpp"

using namespace vikin;
using namespace vikin::model;

namespace {

KanLayer tiny_kan() {
    auto l = KanLayer::zeros(1, 1, spline::build_knots(2, 1));
    l.w_b = {2.0};
    l.t = {1.0, 3.0, 5.0};
    return l;
}

Network small_mlp() {
    Network net;
    auto a = MlpLayer::zeros(2, 2, Activation::ReLU);
    a.weights = {1, 2, 3, -4};
    a.bias = {0.5, -1};
    auto b = MlpLayer::zeros(2, 1, Activation::None);
    b.weights = {1, 1};
    b.bias = {0.25};
    net.layers = {a, b};
    return net;
}

}  // namespace

TEST_CASE("KAN layer output on a hand-worked case") {
    // x=0.5 on G=2, K=1: B_1 = B_2 = 0.5, so out = 2 silu(0.5) + 3*0.5 + 5*0.5.
    const Vector x{0.5};
    const auto out = kan_layer_forward(tiny_kan(), x);
    CHECK(out[0] == doctest::Approx(4.6224593312018545));
}

TEST_CASE("MLP forward on a hand-worked case") {
    const Vector x{1, 1};
    const auto net = small_mlp();
    const auto h = mlp_layer_forward(std::get<MlpLayer>(net.layers[0]), x);
    CHECK(h == Vector{3.5, 0.0});
    CHECK(network_forward(net, x) == Vector{3.75});
}

TEST_CASE("input mask drops MLP activations by position") {
    auto l = MlpLayer::zeros(4, 1, Activation::None);
    l.weights = {1, 1, 1, 1};
    const Vector x{1, 2, 3, 4};
    CHECK(mlp_layer_forward(l, x, {}, sparsity::PatternMask::parse("1000"))[0] == 1.0);
    CHECK(mlp_layer_forward(l, x, {}, sparsity::PatternMask::parse("1010"))[0] == 4.0);
}

TEST_CASE("KAN basis stream masks bases but keeps SiLU out of it") {
    const auto l = tiny_kan();
    const auto s = kan_basis_stream(l, 0.5, sparsity::PatternMask::parse("1010"), {});
    REQUIRE(s.size() == 3);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.0);
    CHECK(s[2] == 0.5);
}

TEST_CASE("shape and structure errors") {
    const Vector bad{1, 2, 3};
    CHECK_THROWS_AS(network_forward(small_mlp(), bad), ShapeError);
    Network empty;
    CHECK_THROWS_AS(empty.kind(), ConfigError);
    Network mixed;
    mixed.layers = {tiny_kan(), MlpLayer::zeros(1, 1, Activation::None)};
    CHECK_THROWS_AS(mixed.kind(), ConfigError);
    auto net = small_mlp();
    std::get<MlpLayer>(net.layers[1]).activation = Activation::ReLU;
    CHECK_THROWS_AS(net.validate(), ConfigError);
    auto k = tiny_kan();
    k.t.pop_back();
    CHECK_THROWS_AS(k.validate(), ShapeError);
    const Vector nan{std::nan("")};
    CHECK_THROWS_AS(kan_layer_forward(tiny_kan(), nan), ConfigError);
    CHECK_THROWS_AS(network_forward(small_mlp(), Vector{1, 1}, {}, MaskSet(3)), ConfigError);
}

TEST_CASE("weight folding multiplies each coefficient by its edge scale") {
    const Vector ws{2, -1};
    const Vector c{1, 2, 3, 4, 5, 6};
    CHECK(fold_weights(ws, c, 3) == Vector{2, 4, 6, -4, -5, -6});
    CHECK_THROWS_AS(fold_weights(ws, c, 4), ShapeError);
}

TEST_CASE("equivalent linear form reproduces the KAN layer") {
    auto net = synth_model(SynthSpec::parse("kan:5,3"));
    const auto& l = std::get<KanLayer>(net.layers[0]);
    const auto lin = as_equivalent_linear(l);
    CHECK(lin.per_input == l.num_bases() + 1);
    CHECK(lin.matrix.size() == l.n_out * l.n_in * lin.per_input);
    const Vector x{-0.9, -0.2, 0.0, 0.4, 1.3};
    const auto a = lin.apply(x);
    const auto b = kan_layer_forward(l, x);
    for (std::size_t q = 0; q < 3; ++q) CHECK(a[q] == doctest::Approx(b[q]).epsilon(1e-12));
}

TEST_CASE("synth spec parsing") {
    const auto s = SynthSpec::parse("mlp:72,304,96");
    CHECK(s.kind == NetworkKind::Mlp);
    CHECK(s.sizes == std::vector<std::size_t>{72, 304, 96});
    CHECK(SynthSpec::parse(s.to_string()).sizes == s.sizes);
    CHECK_THROWS_AS(SynthSpec::parse("cnn:3,4"), ConfigError);
    CHECK_THROWS_AS(SynthSpec::parse("kan:3"), ConfigError);
    CHECK_THROWS_AS(SynthSpec::parse("kan:3,x"), ConfigError);
    CHECK_THROWS_AS(SynthSpec::parse("kan"), ConfigError);
}

TEST_CASE("synthetic models are deterministic per seed and honour the weight zero fraction") {
    auto spec = SynthSpec::parse("kan:16,8");
    CHECK(serialize_model(synth_model(spec)) == serialize_model(synth_model(spec)));
    spec.seed = 2;
    CHECK(serialize_model(synth_model(spec)) != serialize_model(synth_model(SynthSpec::parse("kan:16,8"))));
    const auto sparse = synth_model(SynthSpec::parse("mlp:100,100"), 0.4);
    const auto& w = std::get<MlpLayer>(sparse.layers[0]).weights;
    const double zeros = static_cast<double>(std::count(w.begin(), w.end(), 0.0)) / w.size();
    CHECK(zeros == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("ReLU calibration hits the requested hidden zero fraction") {
    auto net = synth_model(SynthSpec::parse("mlp:72,304,96"));
    const auto inputs = synth_inputs(net, 64, 1, 0.0);
    net = calibrate_relu_sparsity(std::move(net), inputs, 0.3);
    std::size_t zeros = 0;
    std::size_t total = 0;
    for (const auto& x : inputs) {
        const auto h = mlp_layer_forward(std::get<MlpLayer>(net.layers[0]), x);
        zeros += std::count(h.begin(), h.end(), 0.0);
        total += h.size();
    }
    CHECK(static_cast<double>(zeros) / total == doctest::Approx(0.3).epsilon(0.05));
    auto kan = synth_model(SynthSpec::parse("kan:4,4"));
    CHECK_THROWS_AS(calibrate_relu_sparsity(kan, synth_inputs(kan, 2, 1, 0.0), 0.3), ModeError);
}

TEST_CASE("model file round trip is byte and output identical") {
    const auto net = synth_model(SynthSpec::parse("kan:6,5,4"), 0.2);
    const auto path = std::filesystem::temp_directory_path() / "vikin_test_model.vikn";
    save_model(net, path);
    const auto back = load_model(path);
    std::filesystem::remove(path);
    CHECK(serialize_model(back) == serialize_model(net));
    const Vector x{0.1, -0.3, 0.7, 0.0, 1.5, -2.0};
    CHECK(network_forward(back, x) == network_forward(net, x));
}

TEST_CASE("malformed model files are rejected with the right error") {
    const auto bytes = serialize_model(small_mlp());
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ParseError);
    auto future = bytes;
    future[4] = 2;
    CHECK_THROWS_AS(deserialize_model(future), VersionError);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    CHECK_THROWS_AS(deserialize_model(truncated), ParseError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(deserialize_model(trailing), ParseError);
    CHECK_THROWS_AS(load_model("/nonexistent/model.vikn"), Error);
}

TEST_CASE("property: 16-bit mode stays close to 64-bit mode") {
    const auto net = synth_model(SynthSpec::parse("kan:8,8,4"));
    for (const auto& x : synth_inputs(net, 16, 3, 0.2)) {
        const auto a = network_forward(net, x);
        const auto b = network_forward(net, x, HalfPrecisionPolicy{true});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 0.05 * (1.0 + std::fabs(a[i])));
    }
}
