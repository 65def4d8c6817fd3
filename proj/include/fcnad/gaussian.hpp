#ifndef FCNAD_GAUSSIAN_HPP
#define FCNAD_GAUSSIAN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fcnad/error.hpp"

namespace fcnad {

/// Type-7 (linear interpolation) quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw Error(ErrorCode::DegenerateData, "quantile of an empty sample");
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr std::size_t kQuantileTableSize = 10001;

/// Sorted sample itself when small, otherwise its quantiles on a uniform grid of
/// kQuantileTableSize points; sorted_quantile() reads either form.
inline std::vector<double> quantile_table(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    if (sample.size() <= kQuantileTableSize) return sample;
    std::vector<double> table(kQuantileTableSize);
    for (std::size_t i = 0; i < kQuantileTableSize; ++i) {
        table[i] = sorted_quantile(sample, static_cast<double>(i) / (kQuantileTableSize - 1));
    }
    return table;
}

inline constexpr double kMinimumEpsilon = 1e-12;

struct GaussianFitOptions {
    /// Absolute ridge; when unset, relative_epsilon * trace(S) / d is used.
    std::optional<double> epsilon;
    double relative_epsilon = 1e-3;
    bool diagonal = false;
};

/// One-class Gaussian reference model with covariance regularized by epsilon * I.
struct GaussianModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  ///< sample covariance (N-1) + epsilon * I
    double epsilon = 0.0;
    bool diagonal = false;
    Eigen::MatrixXd whitening;   ///< L^{-1} with covariance = L L^T
    std::vector<double> distance_quantiles;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Rebuilds the cached whitening matrix from `covariance`.
inline void factorize(GaussianModel& g) {
    const auto d = g.mean.size();
    if (g.diagonal) {
        g.whitening = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            if (!(g.covariance(i, i) > 0.0)) {
                std::ostringstream msg;
                msg << "diagonal variance " << g.covariance(i, i) << " at dimension " << i
                    << " is not positive; increase epsilon above " << g.epsilon;
                throw Error(ErrorCode::NotPositiveDefinite, msg.str());
            }
            g.whitening(i, i) = 1.0 / std::sqrt(g.covariance(i, i));
        }
        return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
    if (llt.info() != Eigen::Success) {
        const double trace = g.covariance.trace();
        std::ostringstream msg;
        msg << "Cholesky failed with epsilon " << g.epsilon << "; try epsilon >= "
            << std::max(10.0 * g.epsilon, 1e-6 * std::max(trace / static_cast<double>(d), 1.0));
        throw Error(ErrorCode::NotPositiveDefinite, msg.str());
    }
    g.whitening = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
}

/// Distances of each column of `points` (d x N) from the model.
inline Eigen::VectorXd mahalanobis_batch(const GaussianModel& g, const Eigen::MatrixXd& points) {
    if (static_cast<std::size_t>(points.rows()) != g.dim()) {
        throw Error(ErrorCode::Shape, "mahalanobis: vector length " + std::to_string(points.rows()) +
                                          ", model dimension " + std::to_string(g.dim()));
    }
    if (points.cols() == 0) return {};
    const Eigen::MatrixXd centered = points.colwise() - g.mean;
    Eigen::MatrixXd white;
    if (g.diagonal) {
        white = g.whitening.diagonal().asDiagonal() * centered;
    } else {
        white = g.whitening.triangularView<Eigen::Lower>() * centered;
    }
    return white.colwise().norm().transpose();
}

inline double mahalanobis(const GaussianModel& g, const Eigen::VectorXd& x) {
    return mahalanobis_batch(g, x)[0];
}

/// Fits mean and (N-1) covariance to the columns of `vectors` (d x N).
inline GaussianModel fit_gaussian(const Eigen::MatrixXd& vectors, const GaussianFitOptions& options = {}) {
    if (vectors.cols() < 2) throw Error(ErrorCode::DegenerateData, "Gaussian fit needs at least 2 vectors");
    if (vectors.rows() < 1) throw Error(ErrorCode::Shape, "Gaussian fit on zero-dimensional vectors");
    if (!vectors.allFinite()) throw Error(ErrorCode::NonFinite, "Gaussian fit input contains non-finite values");
    const auto d = vectors.rows();
    const double n = static_cast<double>(vectors.cols());
    GaussianModel g;
    g.diagonal = options.diagonal;
    g.mean = vectors.rowwise().mean();
    const Eigen::MatrixXd centered = vectors.colwise() - g.mean;
    if (options.diagonal) {
        g.covariance = Eigen::MatrixXd::Zero(d, d);
        g.covariance.diagonal() = centered.rowwise().squaredNorm() / (n - 1.0);
    } else {
        g.covariance = (centered * centered.transpose()) / (n - 1.0);
    }
    g.epsilon = options.epsilon ? *options.epsilon
                                : options.relative_epsilon * g.covariance.trace() / static_cast<double>(d);
    if (!options.epsilon && g.epsilon == 0.0) g.epsilon = kMinimumEpsilon;  // constant data
    if (g.epsilon < 0.0 || !std::isfinite(g.epsilon)) throw Error(ErrorCode::Config, "epsilon must be >= 0");
    g.covariance.diagonal().array() += g.epsilon;
    factorize(g);
    const Eigen::VectorXd distances = mahalanobis_batch(g, vectors);
    g.distance_quantiles = quantile_table(std::vector<double>(distances.data(), distances.data() + distances.size()));
    return g;
}

} // namespace fcnad

#endif
