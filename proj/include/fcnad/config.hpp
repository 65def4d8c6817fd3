#ifndef FCNAD_CONFIG_HPP
#define FCNAD_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "fcnad/autoencoder.hpp"
#include "fcnad/cascade.hpp"
#include "fcnad/error.hpp"
#include "fcnad/gaussian.hpp"
#include "fcnad/preproc.hpp"

namespace fcnad {

/// Training/detection settings. Every field has the library default; a TOML file may override any.
struct RunConfig {
    std::filesystem::path data;     ///< training frames (directory of P5 images or of video subdirectories)
    std::filesystem::path weights;  ///< FCNW file with the frozen layers
    std::string tap = "C2";
    AutoencoderHyper autoencoder;
    GaussianFitOptions gaussian;
    QuantileConfig quantiles;
    std::uint32_t zeta = 3;
    bool standardize = true;
    PreprocOptions preproc;
    std::size_t resize_w = 0;
    std::size_t resize_h = 0;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::size_t max_training_vectors = 0;  ///< 0 uses every regional vector

    void validate() const {
        if (autoencoder.hidden == 0) throw Error(ErrorCode::Config, "autoencoder.hidden must be >= 1");
        if (autoencoder.batch_size == 0) throw Error(ErrorCode::Config, "autoencoder.batch_size must be >= 1");
        if (!(autoencoder.sparsity_target > 0.0 && autoencoder.sparsity_target < 1.0)) {
            throw Error(ErrorCode::Config, "autoencoder.sparsity_target must lie in (0,1)");
        }
        if (!(autoencoder.learning_rate > 0.0)) throw Error(ErrorCode::Config, "autoencoder.learning_rate must be > 0");
        if (!(autoencoder.holdout_fraction >= 0.0 && autoencoder.holdout_fraction < 1.0)) {
            throw Error(ErrorCode::Config, "autoencoder.holdout_fraction must lie in [0,1)");
        }
        if (quantiles.q_beta >= quantiles.q_alpha) throw Error(ErrorCode::Config, "cascade.q_beta must be < q_alpha");
        for (double q : {quantiles.q_beta, quantiles.q_alpha, quantiles.q_phi}) {
            if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::Config, "cascade quantiles must lie in [0,1]");
        }
        if (gaussian.epsilon && *gaussian.epsilon < 0.0) throw Error(ErrorCode::Config, "gaussian.epsilon must be >= 0");
        if ((resize_w == 0) != (resize_h == 0)) throw Error(ErrorCode::Config, "resize needs both width and height");
        if (workers == 0) throw Error(ErrorCode::Config, "workers must be >= 1");
    }
};

namespace detail {

template <typename T>
void read_value(const toml::table& table, std::string_view key, T& out, std::set<std::string>& seen,
                const std::string& section) {
    const auto* node = table.get(key);
    if (!node) return;
    seen.insert(std::string(key));
    if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value<bool>()) {
            out = *v;
            return;
        }
    } else if constexpr (std::is_integral_v<T>) {
        if (auto v = node->value<std::int64_t>(); v && *v >= 0) {
            out = static_cast<T>(*v);
            return;
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = node->value<double>()) {
            out = *v;
            return;
        }
    } else {
        if (auto v = node->value<std::string>()) {
            out = *v;
            return;
        }
    }
    throw Error(ErrorCode::Config, section + "." + std::string(key) + " has the wrong type");
}

inline void reject_unknown(const toml::table& table, const std::set<std::string>& seen, const std::string& section) {
    for (const auto& [key, node] : table) {
        if (!seen.count(std::string(key.str()))) {
            throw Error(ErrorCode::Config, "unknown key " + (section.empty() ? "" : section + ".") + std::string(key.str()));
        }
    }
}

} // namespace detail

/// Parses a TOML document. Relative paths are resolved against `base_dir`.
inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw Error(ErrorCode::Config, std::string("TOML: ") + std::string(e.description()));
    }
    RunConfig cfg;
    std::set<std::string> top_seen;
    const auto section = [&](const char* name, auto&& fn) {
        const auto* node = root.get(name);
        if (!node) return;
        top_seen.insert(name);
        const auto* table = node->as_table();
        if (!table) throw Error(ErrorCode::Config, std::string(name) + " must be a table");
        std::set<std::string> seen;
        fn(*table, seen);
        detail::reject_unknown(*table, seen, name);
    };
    using detail::read_value;

    section("data", [&](const toml::table& t, std::set<std::string>& seen) {
        std::string data, weights;
        read_value(t, "train", data, seen, "data");
        read_value(t, "weights", weights, seen, "data");
        if (!data.empty()) cfg.data = base_dir / data;
        if (!weights.empty()) cfg.weights = base_dir / weights;
    });
    section("network", [&](const toml::table& t, std::set<std::string>& seen) {
        read_value(t, "tap", cfg.tap, seen, "network");
    });
    section("preproc", [&](const toml::table& t, std::set<std::string>& seen) {
        read_value(t, "resize_width", cfg.resize_w, seen, "preproc");
        read_value(t, "resize_height", cfg.resize_h, seen, "preproc");
        if (const auto* arr = t.get_as<toml::array>("channel_mean")) {
            seen.insert("channel_mean");
            if (arr->size() != 3) throw Error(ErrorCode::Config, "preproc.channel_mean needs 3 values");
            for (std::size_t i = 0; i < 3; ++i) {
                auto v = (*arr)[i].value<double>();
                if (!v) throw Error(ErrorCode::Config, "preproc.channel_mean must be numeric");
                cfg.preproc.channel_mean[i] = static_cast<float>(*v);
            }
        }
    });
    section("autoencoder", [&](const toml::table& t, std::set<std::string>& seen) {
        auto& a = cfg.autoencoder;
        read_value(t, "hidden", a.hidden, seen, "autoencoder");
        read_value(t, "sparsity_target", a.sparsity_target, seen, "autoencoder");
        read_value(t, "sparsity_weight", a.sparsity_weight, seen, "autoencoder");
        read_value(t, "weight_decay", a.weight_decay, seen, "autoencoder");
        read_value(t, "learning_rate", a.learning_rate, seen, "autoencoder");
        read_value(t, "momentum", a.momentum, seen, "autoencoder");
        read_value(t, "batch_size", a.batch_size, seen, "autoencoder");
        read_value(t, "epochs", a.epochs, seen, "autoencoder");
        read_value(t, "holdout_fraction", a.holdout_fraction, seen, "autoencoder");
        read_value(t, "tied", a.tied, seen, "autoencoder");
    });
    section("gaussian", [&](const toml::table& t, std::set<std::string>& seen) {
        double eps = -1.0;
        read_value(t, "epsilon", eps, seen, "gaussian");
        if (seen.count("epsilon")) cfg.gaussian.epsilon = eps;
        read_value(t, "relative_epsilon", cfg.gaussian.relative_epsilon, seen, "gaussian");
        read_value(t, "diagonal", cfg.gaussian.diagonal, seen, "gaussian");
    });
    section("cascade", [&](const toml::table& t, std::set<std::string>& seen) {
        read_value(t, "q_beta", cfg.quantiles.q_beta, seen, "cascade");
        read_value(t, "q_alpha", cfg.quantiles.q_alpha, seen, "cascade");
        read_value(t, "q_phi", cfg.quantiles.q_phi, seen, "cascade");
    });
    section("localization", [&](const toml::table& t, std::set<std::string>& seen) {
        read_value(t, "zeta", cfg.zeta, seen, "localization");
    });
    section("run", [&](const toml::table& t, std::set<std::string>& seen) {
        read_value(t, "seed", cfg.seed, seen, "run");
        read_value(t, "workers", cfg.workers, seen, "run");
        read_value(t, "standardize", cfg.standardize, seen, "run");
        read_value(t, "max_training_vectors", cfg.max_training_vectors, seen, "run");
    });
    detail::reject_unknown(root, top_seen, "");
    cfg.autoencoder.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_run_config(text, path.parent_path());
}

} // namespace fcnad

#endif
