#ifndef FCNAD_CASCADE_HPP
#define FCNAD_CASCADE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcnad/autoencoder.hpp"
#include "fcnad/error.hpp"
#include "fcnad/gaussian.hpp"
#include "fcnad/netcore.hpp"

namespace fcnad {

/// Per-dimension standardization fitted on training vectors. G1 sees z-scores; the
/// autoencoder sees z clamped to +-3 and mapped onto [0.1, 0.9] for its sigmoid decoder.
struct FeatureTransform {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    bool enabled = true;

    static constexpr double kClampSigma = 3.0;
    static constexpr double kMinScale = 1e-6;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }

    static FeatureTransform identity(std::size_t d) {
        return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d)),
                false};
    }

    static FeatureTransform fit(const Eigen::MatrixXd& vectors, bool enabled = true) {
        if (!enabled || vectors.cols() < 2) return identity(static_cast<std::size_t>(vectors.rows()));
        FeatureTransform t;
        t.enabled = true;
        t.mean = vectors.rowwise().mean();
        const Eigen::MatrixXd centered = vectors.colwise() - t.mean;
        t.scale = (centered.rowwise().squaredNorm() / static_cast<double>(vectors.cols() - 1)).cwiseSqrt();
        const double floor = std::max(kMinScale, kMinScale * t.scale.maxCoeff());
        t.scale = t.scale.cwiseMax(floor);
        return t;
    }

    Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const {
        if (!enabled) return x;
        return (x.colwise() - mean).array().colwise() / scale.array();
    }

    /// Autoencoder input. Without standardization values are only clamped to [0,1].
    Eigen::MatrixXd squash(const Eigen::MatrixXd& standardized) const {
        if (!enabled) return standardized.cwiseMax(0.0).cwiseMin(1.0);
        return ((standardized.array().max(-kClampSigma).min(kClampSigma) / kClampSigma + 1.0) * 0.4 + 0.1).matrix();
    }
};

struct CascadeConfig {
    double alpha = 1.0;
    double beta = 0.5;
    double phi = 1.0;

    void validate() const {
        if (!(beta >= 0.0 && beta < alpha) || !std::isfinite(alpha)) {
            throw Error(ErrorCode::Config, "cascade thresholds need 0 <= beta < alpha (beta " + std::to_string(beta) +
                                               ", alpha " + std::to_string(alpha) + ")");
        }
        if (!(phi > 0.0) || !std::isfinite(phi)) {
            throw Error(ErrorCode::Config, "phi must be positive, got " + std::to_string(phi));
        }
    }
};

enum class Verdict { Normal, Suspicious, Abnormal };

inline std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Normal: return "normal";
    case Verdict::Suspicious: return "suspicious";
    case Verdict::Abnormal: return "abnormal";
    }
    return "?";
}

struct RegionVerdict {
    Verdict verdict = Verdict::Normal;
    int stage = 1;
    double d1 = 0.0;
    double d2 = std::numeric_limits<double>::quiet_NaN();  ///< set only when escalated
    double score = 0.0;
};

/// Three-way rule on the G1 distance: <= beta normal, >= alpha abnormal, else suspicious.
inline RegionVerdict stage1(double d1, const CascadeConfig& cfg) {
    RegionVerdict v;
    v.stage = 1;
    v.d1 = d1;
    v.score = d1 / cfg.alpha;
    if (d1 <= cfg.beta) {
        v.verdict = Verdict::Normal;
    } else if (d1 >= cfg.alpha) {
        v.verdict = Verdict::Abnormal;
    } else {
        v.verdict = Verdict::Suspicious;
    }
    return v;
}

/// Resolves a suspicious region on the G2 distance: >= phi abnormal.
inline RegionVerdict stage2(double d2, const CascadeConfig& cfg) {
    RegionVerdict v;
    v.stage = 2;
    v.d2 = d2;
    v.verdict = d2 >= cfg.phi ? Verdict::Abnormal : Verdict::Normal;
    v.score = d2 / cfg.phi;
    return v;
}

struct QuantileConfig {
    double q_beta = 0.95;
    double q_alpha = 0.999;
    double q_phi = 0.99;
};

/// Thresholds from training-distance quantiles of G1 (beta, alpha) and G2 (phi).
inline CascadeConfig calibrate(const std::vector<double>& g1_quantiles, const std::vector<double>& g2_quantiles,
                               const QuantileConfig& q = {}) {
    for (double v : {q.q_beta, q.q_alpha, q.q_phi}) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::Config, "quantiles must lie in [0,1]");
    }
    if (q.q_beta >= q.q_alpha) {
        throw Error(ErrorCode::Config, "q_beta (" + std::to_string(q.q_beta) + ") must be below q_alpha (" +
                                           std::to_string(q.q_alpha) + ")");
    }
    CascadeConfig cfg;
    cfg.beta = sorted_quantile(g1_quantiles, q.q_beta);
    cfg.alpha = sorted_quantile(g1_quantiles, q.q_alpha);
    cfg.phi = sorted_quantile(g2_quantiles, q.q_phi);
    if (!(cfg.beta < cfg.alpha)) {
        throw Error(ErrorCode::DegenerateData, "G1 training distances give beta " + std::to_string(cfg.beta) +
                                                   " >= alpha " + std::to_string(cfg.alpha) +
                                                   "; training features are (near-)constant");
    }
    if (!(cfg.phi > 0.0)) {
        throw Error(ErrorCode::DegenerateData, "G2 training distances give phi = 0; encoded features are constant");
    }
    return cfg;
}

inline CascadeConfig calibrate(const GaussianModel& g1, const GaussianModel& g2, const QuantileConfig& q = {}) {
    return calibrate(g1.distance_quantiles, g2.distance_quantiles, q);
}

/// Everything needed to classify one tap-layer grid.
struct CascadeModel {
    FeatureTransform transform;
    GaussianModel g1;
    SparseAutoencoder encoder;  ///< only the encoder half is used
    GaussianModel g2;
    CascadeConfig config;
};

struct VerdictGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<RegionVerdict> cells;  ///< row-major
    std::size_t escalated = 0;         ///< cells sent to the autoencoder

    const RegionVerdict& at(std::size_t i, std::size_t j) const { return cells[i * width + j]; }

    double frame_score() const {
        double best = 0.0;
        for (const auto& c : cells) best = std::max(best, c.score);
        return best;
    }

    std::vector<std::pair<std::size_t, std::size_t>> abnormal_cells() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < height; ++i) {
            for (std::size_t j = 0; j < width; ++j) {
                if (at(i, j).verdict == Verdict::Abnormal) out.emplace_back(i, j);
            }
        }
        return out;
    }

    std::vector<double> scores() const {
        std::vector<double> s(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) s[i] = cells[i].score;
        return s;
    }
};

/// Wall-clock split of classify_grid: autoencoder work is representation, the rest classifying.
struct CascadeTiming {
    std::chrono::nanoseconds representation{0};
    std::chrono::nanoseconds classifying{0};
};

/// Grid cells as columns of a d x (h*w) matrix, row-major cell order.
inline Eigen::MatrixXd grid_vectors(const FeatureGrid& grid) {
    const auto& t = grid.values;
    const std::size_t cells = t.plane_size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(t.channels()), static_cast<Eigen::Index>(cells));
    for (std::size_t c = 0; c < t.channels(); ++c) {
        const auto plane = t.plane(c);
        for (std::size_t i = 0; i < cells; ++i) x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = plane[i];
    }
    return x;
}

/// Applies both cascade stages to every cell. Only stage-1 suspicious cells are encoded.
/// Cell score is d1/alpha when resolved at stage 1 and max(d1/alpha, d2/phi) when escalated,
/// so score >= 1 exactly when the verdict is abnormal.
inline VerdictGrid classify_grid(const FeatureGrid& grid, const CascadeModel& model, CascadeTiming* timing = nullptr) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    if (grid.vector_length() != model.g1.dim()) {
        throw Error(ErrorCode::Shape, "grid vectors have length " + std::to_string(grid.vector_length()) +
                                          ", G1 expects " + std::to_string(model.g1.dim()));
    }
    VerdictGrid out;
    out.height = grid.grid_height();
    out.width = grid.grid_width();
    const Eigen::MatrixXd standardized = model.transform.standardize(grid_vectors(grid));
    const Eigen::VectorXd d1 = mahalanobis_batch(model.g1, standardized);
    out.cells.resize(static_cast<std::size_t>(d1.size()));
    std::vector<Eigen::Index> suspicious;
    for (Eigen::Index i = 0; i < d1.size(); ++i) {
        out.cells[static_cast<std::size_t>(i)] = stage1(d1[i], model.config);
        if (out.cells[static_cast<std::size_t>(i)].verdict == Verdict::Suspicious) suspicious.push_back(i);
    }
    out.escalated = suspicious.size();
    const auto t1 = Clock::now();
    auto t2 = t1;
    if (!suspicious.empty()) {
        Eigen::MatrixXd picked(standardized.rows(), static_cast<Eigen::Index>(suspicious.size()));
        for (std::size_t s = 0; s < suspicious.size(); ++s) {
            picked.col(static_cast<Eigen::Index>(s)) = standardized.col(suspicious[s]);
        }
        const Eigen::MatrixXd encoded = encode_batch(model.encoder, model.transform.squash(picked));
        t2 = Clock::now();
        const Eigen::VectorXd d2 = mahalanobis_batch(model.g2, encoded);
        for (std::size_t s = 0; s < suspicious.size(); ++s) {
            auto& cell = out.cells[static_cast<std::size_t>(suspicious[s])];
            const RegionVerdict resolved = stage2(d2[static_cast<Eigen::Index>(s)], model.config);
            cell.verdict = resolved.verdict;
            cell.stage = 2;
            cell.d2 = resolved.d2;
            cell.score = std::max(cell.score, resolved.score);
        }
    }
    const auto t3 = Clock::now();
    if (timing) {
        timing->representation += t2 - t1;
        timing->classifying += (t1 - t0) + (t3 - t2);
    }
    return out;
}

/// Verdicts re-derived from cell scores at a swept threshold (score >= threshold is abnormal).
inline std::vector<std::pair<std::size_t, std::size_t>> cells_at_threshold(const std::vector<double>& scores,
                                                                           std::size_t width, double threshold) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k] >= threshold) out.emplace_back(k / width, k % width);
    }
    return out;
}

} // namespace fcnad

#endif
