#ifndef FCNAD_BUNDLE_HPP
#define FCNAD_BUNDLE_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "fcnad/autoencoder.hpp"
#include "fcnad/binary_io.hpp"
#include "fcnad/cascade.hpp"
#include "fcnad/error.hpp"
#include "fcnad/fcnw.hpp"
#include "fcnad/gaussian.hpp"
#include "fcnad/preproc.hpp"

namespace fcnad {

/// Everything `detect` needs: frozen layers, C_T, standardization, G1, G2, thresholds.
struct ModelBundle {
    NetworkSpec network;  ///< tap_index selects the feature layer
    ConvLayerSpec ct;     ///< autoencoder encoder as a 1x1 sigmoid convolution
    AutoencoderHyper autoencoder;
    FeatureTransform transform;
    GaussianModel g1;
    GaussianModel g2;
    CascadeConfig cascade;
    QuantileConfig quantiles;
    std::uint32_t zeta = 3;
    PreprocOptions preproc;
    std::size_t resize_h = 0;  ///< 0 keeps native resolution
    std::size_t resize_w = 0;

    void validate() const {
        network.validate();
        ct.validate();
        const std::size_t m = network.channels_after(network.tap_index);
        if (g1.dim() != m) {
            throw Error(ErrorCode::Shape, "G1 dimension " + std::to_string(g1.dim()) + " != tap channels " +
                                              std::to_string(m));
        }
        if (ct.in_channels != m) throw Error(ErrorCode::Shape, "C_T input does not match tap channels");
        if (g2.dim() != ct.out_channels) {
            throw Error(ErrorCode::Shape, "G2 dimension " + std::to_string(g2.dim()) + " != C_T outputs " +
                                              std::to_string(ct.out_channels));
        }
        if (transform.dim() != m) throw Error(ErrorCode::Shape, "standardization dimension mismatch");
        cascade.validate();
    }

    CascadeModel cascade_model() const {
        return CascadeModel{transform, g1, encoder_from_conv(ct), g2, cascade};
    }
};

// .fab layout (little-endian):
//   "FCAB" | u32 version=1 | u32 manifest_len | manifest JSON (UTF-8)
//   | section payloads, concatenated in manifest order
//   | u32 CRC32 of all preceding bytes
// Manifest "sections" entries carry name, offset (from the first payload byte), length
// and the section's own CRC32. docs/FORMATS.md has the field list.

inline constexpr char kBundleMagic[4] = {'F', 'C', 'A', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;

namespace detail {

inline std::vector<std::uint8_t> f64_bytes(const double* data, std::size_t count) {
    ByteWriter w;
    w.put_array<double>(std::span<const double>(data, count));
    return std::move(w.bytes());
}

inline std::vector<double> f64_values(std::span<const std::uint8_t> bytes, const std::string& name) {
    if (bytes.size() % sizeof(double) != 0) throw Error(ErrorCode::Truncated, "section " + name + " length");
    std::vector<double> v(bytes.size() / sizeof(double));
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

inline nlohmann::json hyper_json(const AutoencoderHyper& h) {
    return {{"hidden", h.hidden},
            {"sparsity_target", h.sparsity_target},
            {"sparsity_weight", h.sparsity_weight},
            {"weight_decay", h.weight_decay},
            {"learning_rate", h.learning_rate},
            {"momentum", h.momentum},
            {"batch_size", h.batch_size},
            {"epochs", h.epochs},
            {"holdout_fraction", h.holdout_fraction},
            {"tied", h.tied},
            {"seed", h.seed}};
}

inline AutoencoderHyper hyper_from_json(const nlohmann::json& j) {
    AutoencoderHyper h;
    h.hidden = j.at("hidden");
    h.sparsity_target = j.at("sparsity_target");
    h.sparsity_weight = j.at("sparsity_weight");
    h.weight_decay = j.at("weight_decay");
    h.learning_rate = j.at("learning_rate");
    h.momentum = j.at("momentum");
    h.batch_size = j.at("batch_size");
    h.epochs = j.at("epochs");
    h.holdout_fraction = j.at("holdout_fraction");
    h.tied = j.at("tied");
    h.seed = j.at("seed");
    return h;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_bundle(const ModelBundle& b) {
    b.validate();
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> sections;
    sections.emplace_back("network", encode_fcnw(b.network));
    sections.emplace_back("ct", encode_fcnw(std::vector<Layer>{b.ct}));
    sections.emplace_back("transform.mean", detail::f64_bytes(b.transform.mean.data(), b.transform.dim()));
    sections.emplace_back("transform.scale", detail::f64_bytes(b.transform.scale.data(), b.transform.dim()));
    for (const auto& [prefix, g] : {std::pair<std::string, const GaussianModel*>{"g1", &b.g1}, {"g2", &b.g2}}) {
        sections.emplace_back(prefix + ".mean", detail::f64_bytes(g->mean.data(), g->dim()));
        sections.emplace_back(prefix + ".covariance",
                              detail::f64_bytes(g->covariance.data(), static_cast<std::size_t>(g->covariance.size())));
        sections.emplace_back(prefix + ".quantiles",
                              detail::f64_bytes(g->distance_quantiles.data(), g->distance_quantiles.size()));
    }

    nlohmann::json index = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, bytes] : sections) {
        index.push_back({{"name", name}, {"offset", offset}, {"length", bytes.size()}, {"crc32", crc32_of(bytes)}});
        offset += bytes.size();
    }
    const auto gauss = [](const GaussianModel& g) {
        return nlohmann::json{{"dim", g.dim()}, {"epsilon", g.epsilon}, {"diagonal", g.diagonal}};
    };
    const nlohmann::json manifest = {
        {"format", "fcnad-bundle"},
        {"version", kBundleVersion},
        {"tap_index", b.network.tap_index},
        {"tap_layer", b.network.tap_index == 0 ? std::string("input") : layer_name(b.network.layers[b.network.tap_index - 1])},
        {"autoencoder", detail::hyper_json(b.autoencoder)},
        {"standardize", b.transform.enabled},
        {"g1", gauss(b.g1)},
        {"g2", gauss(b.g2)},
        {"cascade", {{"alpha", b.cascade.alpha}, {"beta", b.cascade.beta}, {"phi", b.cascade.phi}}},
        {"quantiles", {{"q_beta", b.quantiles.q_beta}, {"q_alpha", b.quantiles.q_alpha}, {"q_phi", b.quantiles.q_phi}}},
        {"zeta", b.zeta},
        {"preproc", {{"channel_mean", b.preproc.channel_mean}, {"resize", {b.resize_w, b.resize_h}}}},
        {"sections", index},
    };
    const std::string text = manifest.dump();
    ByteWriter w;
    w.put_raw(std::string(kBundleMagic, 4));
    w.put_u32(kBundleVersion);
    w.put_u32(static_cast<std::uint32_t>(text.size()));
    w.put_raw(text);
    for (const auto& s : sections) w.put_bytes(s.second);
    w.put_u32(crc32_of(w.bytes()));
    return std::move(w.bytes());
}

inline ModelBundle decode_bundle(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>") {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kBundleMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, source + ": not a model bundle");
    }
    ByteReader r(bytes);
    r.set_context(source + " header");
    r.get_span(4);
    const std::uint32_t version = r.get_u32();
    if (version != kBundleVersion) {
        throw Error(ErrorCode::VersionMismatch, source + ": bundle version " + std::to_string(version) +
                                                    ", expected " + std::to_string(kBundleVersion));
    }
    const std::uint32_t manifest_len = r.get_u32();
    r.set_context(source + " manifest");
    const std::string text = r.get_string(manifest_len);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Decode, source + ": manifest is not valid JSON (" + e.what() + ")");
    }
    const std::size_t payload_start = r.position();
    std::map<std::string, std::span<const std::uint8_t>> sections;
    std::uint64_t payload_end = payload_start;
    for (const auto& entry : manifest.at("sections")) {
        const std::string name = entry.at("name");
        const std::uint64_t offset = entry.at("offset");
        const std::uint64_t length = entry.at("length");
        if (payload_start + offset + length + 4 > bytes.size()) {
            throw Error(ErrorCode::Truncated, source + ": section '" + name + "' extends past end of file");
        }
        auto span = bytes.subspan(payload_start + offset, length);
        if (crc32_of(span) != entry.at("crc32").get<std::uint32_t>()) {
            throw Error(ErrorCode::Checksum, source + ": section '" + name + "' CRC32 mismatch");
        }
        sections[name] = span;
        payload_end = std::max<std::uint64_t>(payload_end, payload_start + offset + length);
    }
    if (payload_end + 4 != bytes.size()) {
        throw Error(payload_end + 4 > bytes.size() ? ErrorCode::Truncated : ErrorCode::Checksum,
                    source + ": unexpected file length");
    }
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (stored != crc32_of(bytes.first(bytes.size() - 4))) throw Error(ErrorCode::Checksum, source + ": CRC32 mismatch");

    const auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        if (it == sections.end()) throw Error(ErrorCode::Decode, source + ": missing section '" + name + "'");
        return it->second;
    };
    ModelBundle b;
    b.network = decode_fcnw(section("network"), source + ":network");
    b.network.tap_index = manifest.at("tap_index");
    auto ct_layers = decode_fcnw_layers(section("ct"), source + ":ct");
    if (ct_layers.size() != 1 || !std::holds_alternative<ConvLayerSpec>(ct_layers[0])) {
        throw Error(ErrorCode::Decode, source + ": C_T section must hold one conv layer");
    }
    b.ct = std::get<ConvLayerSpec>(ct_layers[0]);
    b.autoencoder = detail::hyper_from_json(manifest.at("autoencoder"));

    const auto vec = [&](const std::string& name) {
        const auto v = detail::f64_values(section(name), name);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    b.transform.enabled = manifest.at("standardize");
    b.transform.mean = vec("transform.mean");
    b.transform.scale = vec("transform.scale");
    for (const auto& [prefix, g] : {std::pair<std::string, GaussianModel*>{"g1", &b.g1}, {"g2", &b.g2}}) {
        const auto& meta = manifest.at(prefix);
        g->mean = vec(prefix + ".mean");
        const auto d = g->mean.size();
        if (meta.at("dim").get<Eigen::Index>() != d) throw Error(ErrorCode::Decode, source + ": " + prefix + " dim");
        const auto cov = detail::f64_values(section(prefix + ".covariance"), prefix);
        if (static_cast<Eigen::Index>(cov.size()) != d * d) {
            throw Error(ErrorCode::Decode, source + ": " + prefix + " covariance size");
        }
        g->covariance = Eigen::Map<const Eigen::MatrixXd>(cov.data(), d, d);
        g->epsilon = meta.at("epsilon");
        g->diagonal = meta.at("diagonal");
        g->distance_quantiles = detail::f64_values(section(prefix + ".quantiles"), prefix);
        factorize(*g);
    }
    const auto& c = manifest.at("cascade");
    b.cascade = {c.at("alpha"), c.at("beta"), c.at("phi")};
    const auto& q = manifest.at("quantiles");
    b.quantiles = {q.at("q_beta"), q.at("q_alpha"), q.at("q_phi")};
    b.zeta = manifest.at("zeta");
    b.preproc.channel_mean = manifest.at("preproc").at("channel_mean");
    const auto resize = manifest.at("preproc").at("resize");
    b.resize_w = resize.at(0);
    b.resize_h = resize.at(1);
    b.validate();
    return b;
}

inline void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
    write_file_bytes(path, encode_bundle(b));
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
    return decode_bundle(read_file_bytes(path), path.string());
}

} // namespace fcnad

#endif
