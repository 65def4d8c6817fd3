#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fcnad/cascade.hpp"
#include "fcnad/gaussian.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fcnad;
using gen::normal_sample;
using gen::random_model;

namespace {

CascadeModel toy_cascade(Rng& rng, std::size_t d, std::size_t h) {
    CascadeModel m;
    m.transform = FeatureTransform::identity(d);
    const Eigen::MatrixXd train = normal_sample(rng, static_cast<Eigen::Index>(d), 4000);
    m.g1 = fit_gaussian(train);
    AutoencoderHyper hyper;
    hyper.hidden = h;
    hyper.seed = 5;
    m.encoder = make_autoencoder(d, hyper);
    m.g2 = fit_gaussian(encode_batch(m.encoder, m.transform.squash(train)));
    m.config = calibrate(m.g1, m.g2);
    return m;
}

FeatureGrid random_grid(Rng& rng, std::size_t d, std::size_t h, std::size_t w, double spread) {
    FeatureGrid grid{Tensor3(d, h, w), 3, 0};
    for (auto& v : grid.values.data()) v = static_cast<float>(spread * standard_normal(rng));
    return grid;
}

} // namespace

TEST(Quantiles, TypeSevenInterpolation) {
    const std::vector<double> s{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(sorted_quantile(s, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(sorted_quantile(s, 0.5), 2.5);
    std::vector<double> big(50000);
    std::iota(big.begin(), big.end(), 0.0);
    const auto table = quantile_table(big);
    EXPECT_EQ(table.size(), kQuantileTableSize);
    EXPECT_NEAR(sorted_quantile(table, 0.95), sorted_quantile(big, 0.95), 1e-6);
    EXPECT_THROW(sorted_quantile({}, 0.5), Error);
}

TEST(GaussianFit, ConstantVectors) {
    Eigen::MatrixXd x(3, 10);
    for (Eigen::Index i = 0; i < 10; ++i) x.col(i) << 1, -2, 0.5;
    GaussianFitOptions opts;
    opts.epsilon = 0.01;
    const GaussianModel g = fit_gaussian(x, opts);
    EXPECT_EQ(g.mean, x.col(0));
    EXPECT_LT((g.covariance - 0.01 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    for (double d : g.distance_quantiles) EXPECT_EQ(d, 0.0);
}

TEST(GaussianFit, TwoPointsUnbiased) {
    const Eigen::MatrixXd x = (Eigen::MatrixXd(1, 2) << 0, 2).finished();
    GaussianFitOptions opts;
    opts.epsilon = 1e-3;
    const GaussianModel g = fit_gaussian(x, opts);
    EXPECT_DOUBLE_EQ(g.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(g.covariance(0, 0), 2.0 + 1e-3);
}

TEST(GaussianFit, DefaultEpsilonIsRelativeAndFloored) {
    Rng rng(2);
    const GaussianModel g = fit_gaussian(3.0 * normal_sample(rng, 4, 500));
    EXPECT_NEAR(g.epsilon, 1e-3 * (g.covariance.trace() - 4 * g.epsilon) / 4, 1e-12);
    const GaussianModel c = fit_gaussian(Eigen::MatrixXd::Ones(2, 5));
    EXPECT_EQ(c.epsilon, kMinimumEpsilon);
}

TEST(GaussianFit, LawOfLargeNumbers) {
    Rng rng(3);
    GaussianFitOptions opts;
    opts.epsilon = 0.0;
    const GaussianModel g = fit_gaussian(normal_sample(rng, 2, 100000), opts);
    EXPECT_LT(g.mean.cwiseAbs().maxCoeff(), 0.05);
    EXPECT_LT((g.covariance - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(GaussianFit, Errors) {
    EXPECT_THROW(fit_gaussian(Eigen::MatrixXd::Zero(3, 1)), Error);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4);
    x(1, 2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(fit_gaussian(x), Error);
    GaussianFitOptions opts;
    opts.epsilon = 0.0;
    try {
        fit_gaussian(Eigen::MatrixXd::Ones(3, 6), opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
    }
}

TEST(Mahalanobis, SimpleCases) {
    GaussianModel g;
    g.mean = Eigen::VectorXd::Zero(3);
    g.covariance = Eigen::MatrixXd::Identity(3, 3);
    factorize(g);
    EXPECT_DOUBLE_EQ(mahalanobis(g, g.mean), 0.0);
    EXPECT_DOUBLE_EQ(mahalanobis(g, Eigen::Vector3d(0, 1, 0)), 1.0);
    EXPECT_THROW(mahalanobis(g, Eigen::VectorXd::Zero(2)), Error);
}

TEST(Mahalanobis, MatchesSolveOracle) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 12));
        const GaussianModel g = random_model(rng, d);
        const Eigen::MatrixXd x = normal_sample(rng, d, 5) * 2.0;
        const Eigen::VectorXd fast = mahalanobis_batch(g, x);
        for (Eigen::Index n = 0; n < x.cols(); ++n) {
            const double slow = oracle::mahalanobis_solve(g.covariance, g.mean, x.col(n));
            EXPECT_NEAR(fast[n], slow, 1e-6 * std::max(1.0, slow));
        }
    }
}

TEST(Mahalanobis, DiagonalModel) {
    Rng rng(5);
    GaussianFitOptions opts;
    opts.diagonal = true;
    const Eigen::MatrixXd x = normal_sample(rng, 3, 200);
    const GaussianModel g = fit_gaussian(x, opts);
    const Eigen::Vector3d p(1, 2, 3);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) expect += std::pow(p[i] - g.mean[i], 2) / g.covariance(i, i);
    EXPECT_NEAR(mahalanobis(g, p), std::sqrt(expect), 1e-12);
}

TEST(Mahalanobis, AffineInvariant) {
    Rng rng(6);
    const Eigen::MatrixXd x = normal_sample(rng, 3, 300);
    Eigen::Matrix3d a;
    a << 2, 0.5, 0, -1, 1, 0.3, 0.2, 0, 3;
    const Eigen::Vector3d b(4, -2, 1);
    const Eigen::MatrixXd y = (a * x).colwise() + b;
    GaussianFitOptions opts;
    opts.epsilon = 0.0;
    const GaussianModel gx = fit_gaussian(x, opts);
    const GaussianModel gy = fit_gaussian(y, opts);
    const Eigen::Vector3d p(0.3, -1, 2);
    EXPECT_NEAR(mahalanobis(gx, p), mahalanobis(gy, a * p + b), 1e-8);
}

TEST(Stages, BoundariesAsWritten) {
    const CascadeConfig c{10.0, 4.0, 3.0};
    EXPECT_EQ(stage1(4.0, c).verdict, Verdict::Normal);
    EXPECT_EQ(stage1(10.0, c).verdict, Verdict::Abnormal);
    EXPECT_EQ(stage1(7.0, c).verdict, Verdict::Suspicious);
    EXPECT_EQ(stage1(std::nextafter(4.0, 5.0), c).verdict, Verdict::Suspicious);
    EXPECT_EQ(stage2(3.0, c).verdict, Verdict::Abnormal);
    EXPECT_EQ(stage2(0.0, c).verdict, Verdict::Normal);
    EXPECT_EQ(stage2(std::nextafter(3.0, 0.0), c).verdict, Verdict::Normal);
}

TEST(Stages, PartitionOfTheLine) {
    const CascadeConfig c{10.0, 4.0, 3.0};
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double d = uniform(rng, 0.0, 20.0);
        const Verdict v = stage1(d, c).verdict;
        const int hits = (d <= c.beta) + (d >= c.alpha) + (d > c.beta && d < c.alpha);
        EXPECT_EQ(hits, 1);
        EXPECT_EQ(v == Verdict::Normal, d <= c.beta);
        EXPECT_EQ(v == Verdict::Abnormal, d >= c.alpha);
    }
}

TEST(Stages, Monotonicity) {
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
        const double beta = uniform(rng, 0.0, 5.0);
        const double alpha = beta + uniform(rng, 0.1, 5.0);
        const double phi = uniform(rng, 0.5, 5.0);
        const CascadeConfig c{alpha, beta, phi};
        const CascadeConfig raised{alpha + uniform(rng, 0.0, 3.0), beta, phi};
        const CascadeConfig lowered{alpha, beta, phi * uniform(rng, 0.1, 1.0)};
        const double d1 = uniform(rng, 0.0, 12.0);
        const double d2 = uniform(rng, 0.0, 6.0);
        if (oracle::reference_verdict(d1, d2, c) == Verdict::Normal) {
            EXPECT_EQ(oracle::reference_verdict(d1, d2, raised), Verdict::Normal);
        }
        if (stage2(d2, c).verdict == Verdict::Abnormal) EXPECT_EQ(stage2(d2, lowered).verdict, Verdict::Abnormal);
    }
}

TEST(Calibrate, PercentilesOfExplicitList) {
    std::vector<double> d(1000);
    std::iota(d.begin(), d.end(), 1.0);
    const CascadeConfig c = calibrate(d, d);
    EXPECT_NEAR(c.beta, 950.0, 1.0);
    EXPECT_NEAR(c.alpha, 999.0, 1.0);
    EXPECT_NEAR(c.phi, 990.0, 1.0);
    QuantileConfig q;
    q.q_phi = 1.0;
    EXPECT_EQ(calibrate(d, d, q).phi, 1000.0);
}

TEST(Calibrate, DegenerateDistances) {
    const std::vector<double> zeros(100, 0.0);
    try {
        calibrate(zeros, zeros);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
    }
    std::vector<double> d(10);
    std::iota(d.begin(), d.end(), 1.0);
    QuantileConfig bad;
    bad.q_beta = 0.99;
    bad.q_alpha = 0.9;
    try {
        calibrate(d, d, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
    }
}

TEST(Calibrate, EscalationFractionMatchesQuantileGap) {
    Rng rng(9);
    const Eigen::MatrixXd train = normal_sample(rng, 4, 100000);
    const GaussianModel g = fit_gaussian(train);
    const CascadeConfig c = calibrate(g, g);
    const Eigen::MatrixXd fresh = normal_sample(rng, 4, 100000);
    const Eigen::VectorXd d = mahalanobis_batch(g, fresh);
    std::size_t escalated = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) escalated += stage1(d[i], c).verdict == Verdict::Suspicious;
    EXPECT_NEAR(static_cast<double>(escalated) / static_cast<double>(d.size()), 0.999 - 0.95, 0.005);
}

TEST(ClassifyGrid, AllAtMeanStayAtStageOne) {
    Rng rng(10);
    const CascadeModel m = toy_cascade(rng, 4, 3);
    FeatureGrid grid{Tensor3(4, 3, 5), 3, 0};
    for (std::size_t c = 0; c < 4; ++c) {
        for (float& v : grid.values.plane(c)) v = static_cast<float>(m.g1.mean[static_cast<Eigen::Index>(c)]);
    }
    const VerdictGrid out = classify_grid(grid, m);
    EXPECT_EQ(out.escalated, 0u);
    for (const auto& cell : out.cells) {
        EXPECT_EQ(cell.verdict, Verdict::Normal);
        EXPECT_EQ(cell.stage, 1);
        EXPECT_TRUE(std::isnan(cell.d2));
    }
}

TEST(ClassifyGrid, FarCellsAbnormalWithoutEncoder) {
    Rng rng(11);
    const CascadeModel m = toy_cascade(rng, 4, 3);
    const FeatureGrid grid{Tensor3(4, 2, 3, 1000.0f), 3, 0};
    const VerdictGrid out = classify_grid(grid, m);
    EXPECT_EQ(out.escalated, 0u);
    EXPECT_EQ(out.abnormal_cells().size(), 6u);
    EXPECT_GE(out.frame_score(), 1.0);
}

TEST(ClassifyGrid, MatchesPerCellReference) {
    Rng rng(12);
    const CascadeModel m = toy_cascade(rng, 5, 4);
    std::size_t escalated_total = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureGrid grid = random_grid(rng, 5, 6, 7, 1.6);
        const VerdictGrid out = classify_grid(grid, m);
        std::size_t escalated = 0;
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 7; ++j) {
                const auto v = grid.cell<double>(i, j);
                const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), 5);
                const double d1 = oracle::mahalanobis_solve(m.g1.covariance, m.g1.mean, x);
                const Eigen::VectorXd t = encode(m.encoder, m.transform.squash(x));
                const double d2 = oracle::mahalanobis_solve(m.g2.covariance, m.g2.mean, t);
                const auto& cell = out.at(i, j);
                EXPECT_EQ(cell.verdict, oracle::reference_verdict(d1, d2, m.config)) << i << "," << j;
                const bool suspicious = d1 > m.config.beta && d1 < m.config.alpha;
                escalated += suspicious;
                EXPECT_EQ(cell.stage, suspicious ? 2 : 1);
                const double score = suspicious ? std::max(d1 / m.config.alpha, d2 / m.config.phi) : d1 / m.config.alpha;
                EXPECT_NEAR(cell.score, score, 1e-9);
                EXPECT_EQ(cell.score >= 1.0, cell.verdict == Verdict::Abnormal);
            }
        }
        EXPECT_EQ(out.escalated, escalated);
        escalated_total += escalated;
    }
    EXPECT_GT(escalated_total, 0u);
}

TEST(ClassifyGrid, ShapeMismatch) {
    Rng rng(13);
    const CascadeModel m = toy_cascade(rng, 4, 3);
    EXPECT_THROW(classify_grid(FeatureGrid{Tensor3(5, 2, 2), 3, 0}, m), Error);
}

TEST(FeatureTransform, StandardizeAndSquash) {
    Rng rng(14);
    const Eigen::MatrixXd x = (normal_sample(rng, 3, 1000).array() * 4.0 + 2.0).matrix();
    const FeatureTransform t = FeatureTransform::fit(x);
    const Eigen::MatrixXd z = t.standardize(x);
    EXPECT_LT(z.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::MatrixXd s = t.squash(z);
    EXPECT_GE(s.minCoeff(), 0.1 - 1e-12);
    EXPECT_LE(s.maxCoeff(), 0.9 + 1e-12);
    EXPECT_DOUBLE_EQ(t.squash(Eigen::MatrixXd::Zero(1, 1).replicate(3, 1))(0, 0), 0.5);
}
