#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "vikin/errors.hpp"
#include "vikin/network.hpp"

namespace vikin::model {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'V', 'I', 'K', 'N'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void put_block(std::vector<std::uint8_t>& out, const Vector& v) {
    for (double d : v) put_f64(out, d);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

    std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
        if (bytes_.size() - pos_ < n) {
            throw ParseError("truncated model file at byte offset " + std::to_string(pos_) + " while reading " +
                             what + " (need " + std::to_string(n) + " bytes, have " +
                             std::to_string(bytes_.size() - pos_) + ")");
        }
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32(const std::string& what) {
        auto s = take(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
        return v;
    }

    Vector block(std::size_t count, const std::string& what) {
        auto s = take(count * 8, what);
        Vector v(count);
        for (std::size_t k = 0; k < count; ++k) {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(s[k * 8 + i]) << (8 * i);
            v[k] = std::bit_cast<double>(bits);
        }
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

template <typename T>
T field(const json& obj, const char* name, std::size_t layer) {
    try {
        return obj.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ParseError("model header: layer " + std::to_string(layer) + " field \"" + name + "\": " + e.what());
    }
}

json layer_header(const Layer& l) {
    if (const auto* k = std::get_if<KanLayer>(&l)) {
        return {{"type", "kan"},
                {"n_in", k->n_in},
                {"n_out", k->n_out},
                {"grid_size", k->spline.grid_size},
                {"order", k->spline.order},
                {"domain", {k->spline.domain.lo, k->spline.domain.hi}}};
    }
    const auto& m = std::get<MlpLayer>(l);
    return {{"type", "mlp"},
            {"n_in", m.n_in},
            {"n_out", m.n_out},
            {"activation", m.activation == Activation::ReLU ? "relu" : "none"}};
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Network& net) {
    net.validate();
    json header;
    header["kind"] = to_string(net.kind());
    header["layers"] = json::array();
    for (const Layer& l : net.layers) header["layers"].push_back(layer_header(l));
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kModelFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const Layer& l : net.layers) {
        if (const auto* k = std::get_if<KanLayer>(&l)) {
            put_block(out, k->w_b);
            put_block(out, k->t);
        } else {
            const auto& m = std::get<MlpLayer>(l);
            put_block(out, m.weights);
            put_block(out, m.bias);
        }
    }
    return out;
}

Network deserialize_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("bad magic at byte offset 0: not a VIKN model");
    const std::uint32_t version = r.u32("format version");
    if (version != kModelFormatVersion) {
        throw VersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint32_t header_len = r.u32("header length");
    const std::size_t header_offset = r.offset();
    auto header_bytes = r.take(header_len, "JSON header");

    json header;
    try {
        header = json::parse(header_bytes.begin(), header_bytes.end());
    } catch (const json::exception& e) {
        throw ParseError("model header at byte offset " + std::to_string(header_offset) + " is not valid JSON: " +
                         e.what());
    }
    if (!header.contains("layers") || !header["layers"].is_array()) {
        throw ParseError("model header: missing field \"layers\"");
    }

    Network net;
    std::size_t idx = 0;
    for (const json& lh : header["layers"]) {
        const auto type = field<std::string>(lh, "type", idx);
        const auto n_in = field<std::size_t>(lh, "n_in", idx);
        const auto n_out = field<std::size_t>(lh, "n_out", idx);
        const std::string where = "layer " + std::to_string(idx);
        if (type == "kan") {
            const auto dom = field<std::vector<double>>(lh, "domain", idx);
            if (dom.size() != 2) throw ParseError("model header: " + where + " field \"domain\" needs 2 values");
            auto cfg = spline::build_knots(field<int>(lh, "grid_size", idx), field<int>(lh, "order", idx),
                                           {dom[0], dom[1]});
            KanLayer k = KanLayer::zeros(n_in, n_out, std::move(cfg));
            k.w_b = r.block(k.w_b.size(), where + " w_b");
            k.t = r.block(k.t.size(), where + " t");
            net.layers.emplace_back(std::move(k));
        } else if (type == "mlp") {
            const auto act = field<std::string>(lh, "activation", idx);
            if (act != "relu" && act != "none") {
                throw ParseError("model header: " + where + " field \"activation\" has unknown value " + act);
            }
            MlpLayer m = MlpLayer::zeros(n_in, n_out, act == "relu" ? Activation::ReLU : Activation::None);
            m.weights = r.block(m.weights.size(), where + " weights");
            m.bias = r.block(m.bias.size(), where + " bias");
            net.layers.emplace_back(std::move(m));
        } else {
            throw VersionError("unknown layer kind \"" + type + "\" in " + where);
        }
        ++idx;
    }
    if (!r.at_end()) {
        throw ParseError("trailing bytes after weight blocks at byte offset " + std::to_string(r.offset()));
    }
    net.validate();
    return net;
}

void save_model(const Network& net, const std::filesystem::path& path) {
    const auto bytes = serialize_model(net);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("failed writing " + path.string());
}

Network load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace vikin::model
