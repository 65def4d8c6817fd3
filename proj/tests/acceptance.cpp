// Acceptance run: prints one PASS/FAIL line per criterion, exits non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "fcnad/fcnad.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace fcnad;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

template <typename Fn>
void criterion(int id, const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail << " (" << std::fixed;
    detail.precision(1);
    detail << secs << " s)";
    report(id, name, ok, detail.str());
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::runtime_error("corrupted input was accepted");
}

ModelBundle train_videos(const std::vector<FixtureVideo>& videos, const RunConfig& config, std::uint64_t net_seed) {
    std::vector<std::unique_ptr<FrameSource>> sources;
    for (const auto& v : videos) sources.push_back(std::make_unique<MemorySource>(v.frames, v.name));
    return train_pipeline(config, default_network(net_seed), sources);
}

std::vector<FrameResult> detect_video(const Detector& d, const FixtureVideo& v) {
    MemorySource src(v.frames, v.name);
    std::vector<FrameResult> out;
    detect(d, src, [&](FrameResult&& r) { out.push_back(std::move(r)); });
    return out;
}

RunConfig fixture_config(std::uint64_t seed) {
    RunConfig c;
    c.autoencoder.hidden = 64;
    c.autoencoder.epochs = 8;
    c.autoencoder.batch_size = 256;
    c.seed = seed;
    c.autoencoder.seed = seed;
    return c;
}

} // namespace

int main() {
    criterion(1, "receptive-field law", [](std::ostream& out) {
        const auto table = geometry_table(default_network(1));
        int c1 = 0, c2 = 0;
        for (const auto& row : table) {
            if (row.layer == "C1") c1 = static_cast<int>(row.size_h);
            if (row.layer == "C2") c2 = static_cast<int>(row.size_h);
        }
        Rng rng(2024);
        int ran = 0, agreeing = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto r = gen::perturbation_check(gen::positive_net(rng), rng);
            if (!r.ran) continue;
            ++ran;
            agreeing += r.mismatches == 0;
        }
        out << "C1 " << c1 << "x" << c1 << ", C2 " << c2 << "x" << c2 << ", perturbation oracle " << agreeing << "/"
            << ran << " nets";
        return c1 == 11 && c2 == 51 && ran >= 90 && agreeing == ran;
    });

    criterion(2, "convolution correctness", [](std::ostream& out) {
        Rng rng(2025);
        double worst = 0.0;
        int grouped = 0;
        for (int trial = 0; trial < 50; ++trial) {
            const std::uint32_t groups = trial % 2 == 0 ? 2 : 1;
            grouped += groups == 2;
            const auto c = gen::random_conv_case(rng, groups);
            const Tensor3 fast = conv_forward(c.input, c.layer);
            const Tensor3 slow = oracle::direct_conv(c.input, c.layer);
            if (!fast.same_shape(slow)) throw std::runtime_error("shape differs on trial " + std::to_string(trial));
            worst = std::max(worst, oracle::max_rel_diff(fast, slow));
        }
        double pool_worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto w = static_cast<std::uint32_t>(2 + uniform_index(rng, 3));
            const PoolLayerSpec p{"P", w, w, static_cast<std::uint32_t>(1 + uniform_index(rng, 2)), PoolMode::Mean};
            const Tensor3 in = gen::random_tensor(rng, 2, 9 + uniform_index(rng, 8), 9 + uniform_index(rng, 8));
            pool_worst = std::max(pool_worst, oracle::max_rel_diff(pool_forward(in, p), oracle::mean_pool_as_conv(in, p)));
        }
        out << "50 conv pairs (" << grouped << " with groups=2), max rel diff " << worst << "; pool " << pool_worst;
        return worst < 1e-5 && pool_worst < 1e-5;
    });

    criterion(3, "autoencoder gradients", [](std::ostream& out) {
        Rng rng(2026);
        double worst = 0.0;
        for (int draw = 0; draw < 20; ++draw) worst = std::max(worst, gen::random_gradient_draw(rng, draw));
        out << "20 draws, max rel error " << worst;
        return worst < 1e-4;
    });

    criterion(4, "mahalanobis and cascade", [](std::ostream& out) {
        Rng rng(2027);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 12));
            const GaussianModel g = gen::random_model(rng, d);
            const Eigen::MatrixXd x = gen::normal_sample(rng, d, 5) * 2.0;
            const Eigen::VectorXd fast = mahalanobis_batch(g, x);
            for (Eigen::Index n = 0; n < x.cols(); ++n) {
                const double slow = oracle::mahalanobis_solve(g.covariance, g.mean, x.col(n));
                worst = std::max(worst, std::abs(fast[n] - slow) / std::max(1.0, slow));
            }
        }
        const CascadeConfig c{10.0, 4.0, 3.0};
        const bool boundaries = stage1(4.0, c).verdict == Verdict::Normal &&
                                stage1(10.0, c).verdict == Verdict::Abnormal &&
                                stage2(3.0, c).verdict == Verdict::Abnormal &&
                                stage1(std::nextafter(4.0, 5.0), c).verdict == Verdict::Suspicious &&
                                stage1(std::nextafter(10.0, 0.0), c).verdict == Verdict::Suspicious &&
                                stage2(std::nextafter(3.0, 0.0), c).verdict == Verdict::Normal;
        std::size_t partition_bad = 0, monotone_bad = 0;
        for (int i = 0; i < 20000; ++i) {
            const double beta = uniform(rng, 0.0, 5.0);
            const CascadeConfig r{beta + uniform(rng, 0.1, 5.0), beta, uniform(rng, 0.5, 5.0)};
            const double d1 = uniform(rng, 0.0, 12.0);
            const double d2 = uniform(rng, 0.0, 6.0);
            const Verdict v = stage1(d1, r).verdict;
            const int hits = (v == Verdict::Normal) + (v == Verdict::Abnormal) + (v == Verdict::Suspicious);
            partition_bad += hits != 1 || (v == Verdict::Normal) != (d1 <= r.beta) ||
                             (v == Verdict::Abnormal) != (d1 >= r.alpha);
            const auto cascade = [&](double a, double b) {
                const Verdict first = stage1(a, r).verdict;
                return first == Verdict::Suspicious ? stage2(b, r).verdict : first;
            };
            // larger distances never turn an abnormal cell back into a normal one
            const bool abnormal = cascade(d1, d2) == Verdict::Abnormal;
            const bool still = cascade(d1 + uniform(rng, 0.0, 3.0), d2 + uniform(rng, 0.0, 3.0)) == Verdict::Abnormal;
            monotone_bad += abnormal && !still;
            monotone_bad += cascade(d1, d2) != oracle::reference_verdict(d1, d2, r);
        }
        out << "solve oracle max rel diff " << worst << ", boundaries " << (boundaries ? "exact" : "WRONG")
            << ", partition violations " << partition_bad << ", monotonicity or reference violations " << monotone_bad;
        return worst < 1e-6 && boundaries && partition_bad == 0 && monotone_bad == 0;
    });

    criterion(5, "roc, eer and auc", [](std::ostream& out) {
        Rng rng(2028);
        double auc_worst = 0.0, eer_worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto s = gen::random_scores(rng, 5 + uniform_index(rng, 60), 1 + trial % 8);
            const RocCurve c = roc(s);
            auc_worst = std::max(auc_worst, std::abs(c.auc - oracle::pairwise_auc(s)));
            eer_worst = std::max(eer_worst, std::abs(c.eer - oracle::dense_sweep_eer(s)));
        }
        const DetectionMask truth = gen::mask_with(10, 10, 100);
        const bool b39 = pixel_level_match(gen::mask_with(10, 10, 39), truth);
        const bool b40 = pixel_level_match(gen::mask_with(10, 10, 40), truth);
        const bool b41 = pixel_level_match(gen::mask_with(10, 10, 41), truth);
        out << "100 instances, max |AUC diff| " << auc_worst << ", max |EER diff| " << eer_worst << ", 39/40/41% -> "
            << b39 << "/" << b40 << "/" << b41;
        return auc_worst <= 1e-9 && eer_worst <= 1e-6 && !b39 && b40 && b41;
    });

    // the desk-scale bundle is shared by criteria 6 and 8
    std::unique_ptr<FixtureSet> fixture;
    std::unique_ptr<Detector> detector;
    criterion(6, "end-to-end desk scale", [&](std::ostream& out) {
        fixture = std::make_unique<FixtureSet>(make_fixture(7));
        const RunConfig config = fixture_config(7);
        detector = std::make_unique<Detector>(train_videos(fixture->train, config, 7));
        std::vector<LabeledScore> scores;
        for (const auto& v : fixture->test) {
            for (const auto& r : detect_video(*detector, v)) {
                if (!r.warmup) scores.push_back({r.frame_index, r.score, v.truth[static_cast<std::size_t>(r.frame_index)].any()});
            }
        }
        const RocCurve curve = roc(scores);
        std::size_t cells = 0, escalated = 0;
        for (const auto& v : fixture->holdout) {
            for (const auto& r : detect_video(*detector, v)) {
                if (r.warmup) continue;
                cells += r.cell_scores.size();
                escalated += r.escalated;
            }
        }
        const double rate = static_cast<double>(escalated) / static_cast<double>(cells);
        const double expected = config.quantiles.q_alpha - config.quantiles.q_beta;
        out << "frame AUC " << curve.auc << " (EER " << curve.eer << ") over " << scores.size()
            << " frames; held-out escalation " << rate << " vs " << expected << " +/- 0.02";
        return curve.auc >= 0.90 && std::abs(rate - expected) <= 0.02;
    });

    criterion(7, "determinism and persistence", [](std::ostream& out) {
        FixtureSpec spec;
        spec.train_videos = 3;
        spec.test_videos = 1;
        spec.holdout_videos = 0;
        spec.frames_per_video = 30;
        const FixtureSet set = make_fixture(21, spec);
        RunConfig config = fixture_config(21);
        config.autoencoder.hidden = 16;
        config.autoencoder.epochs = 2;
        const auto a = encode_bundle(train_videos(set.train, config, 21));
        const auto b = encode_bundle(train_videos(set.train, config, 21));
        const bool bundles_equal = a == b;

        const ModelBundle loaded = decode_bundle(a);
        const bool fab_round_trip = encode_bundle(loaded) == a;
        const Detector d1(loaded);
        const Detector d2(decode_bundle(b));
        const auto r1 = detect_video(d1, set.test[0]);
        const auto r2 = detect_video(d2, set.test[0]);
        bool outputs_equal = r1.size() == r2.size();
        for (std::size_t t = 0; outputs_equal && t < r1.size(); ++t) {
            outputs_equal = r1[t].cell_scores == r2[t].cell_scores && r1[t].mask == r2[t].mask && r1[t].score == r2[t].score;
        }

        const auto weights = encode_fcnw(default_network(21));
        const bool fcnw_round_trip = encode_fcnw(decode_fcnw(weights)) == weights;

        auto w_flip = weights;
        w_flip[w_flip.size() / 2] ^= 0x10;
        auto w_magic = weights;
        w_magic[0] ^= 0xff;
        auto w_version = weights;
        w_version[4] = 9;
        const std::vector<std::uint8_t> w_cut(weights.begin(), weights.end() - 64);
        auto f_flip = a;
        f_flip[f_flip.size() / 2] ^= 0x10;
        auto f_magic = a;
        f_magic[0] ^= 0xff;
        auto f_version = a;
        f_version[4] = 9;
        const std::vector<std::uint8_t> f_cut(a.begin(), a.end() - 64);
        const bool codes =
            code_of([&] { decode_fcnw(w_flip); }) == ErrorCode::Checksum &&
            code_of([&] { decode_fcnw(w_magic); }) == ErrorCode::BadMagic &&
            code_of([&] { decode_fcnw(w_version); }) == ErrorCode::VersionMismatch &&
            code_of([&] { decode_fcnw(w_cut); }) == ErrorCode::Truncated &&
            code_of([&] { decode_bundle(f_flip); }) == ErrorCode::Checksum &&
            code_of([&] { decode_bundle(f_magic); }) == ErrorCode::BadMagic &&
            code_of([&] { decode_bundle(f_version); }) == ErrorCode::VersionMismatch &&
            code_of([&] { decode_bundle(f_cut); }) == ErrorCode::Truncated;
        out << "bundles " << (bundles_equal ? "identical" : "DIFFER") << " (" << a.size() << " bytes), outputs "
            << (outputs_equal ? "identical" : "DIFFER") << ", fcnw round trip " << fcnw_round_trip << ", fab round trip "
            << fab_round_trip << ", corruption codes " << (codes ? "as specified" : "WRONG");
        return bundles_equal && outputs_equal && fcnw_round_trip && fab_round_trip && codes;
    });

    criterion(8, "bench report", [&](std::ostream& out) {
        if (!detector) throw std::runtime_error("no trained bundle (criterion 6 failed to train)");
        MemorySource src(fixture->test[0].frames);
        const BenchReport r = bench(*detector, src);
        const auto j = r.to_json()["seconds_per_frame"];
        const bool keys = j.contains("Pre-processing") && j.contains("Representation") && j.contains("Classifying") &&
                          j.contains("Total");
        const double ratio = r.stage_sum() / r.total;
        out << "Pre-processing " << r.preprocessing << " s, Representation " << r.representation << " s, Classifying "
            << r.classifying << " s, Total " << r.total << " s, sum/total " << ratio << ", " << r.fps << " fps";
        return keys && std::abs(ratio - 1.0) <= 0.05;
    });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
