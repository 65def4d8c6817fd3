#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "fcnad/image_io.hpp"
#include "fcnad/preproc.hpp"
#include "fcnad/random.hpp"

using namespace fcnad;

namespace {

Frame random_frame(Rng& rng, std::size_t h, std::size_t w) {
    Frame f(h, w);
    for (auto& v : f.data) v = static_cast<float>(uniform01(rng));
    return f;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fcnad_preproc_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST(TemporalAverage, Arithmetic) {
    Frame a(1, 2, std::vector<float>{0.4f, 1.0f});
    Frame b(1, 2, std::vector<float>{0.6f, 0.0f});
    const auto avg = temporal_average(a, b).frame;
    EXPECT_FLOAT_EQ(avg.at(0, 0), 0.5f);
    EXPECT_FLOAT_EQ(avg.at(0, 1), 0.5f);
}

TEST(TemporalAverage, IdempotentOnEqualInputs) {
    Rng rng(3);
    const Frame f = random_frame(rng, 7, 5);
    EXPECT_EQ(temporal_average(f, f).frame, f);
}

TEST(TemporalAverage, RejectsMismatchedDims) {
    try {
        temporal_average(Frame(2, 3), Frame(3, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Shape);
    }
}

TEST(BuildInput, IdenticalFramesGiveEqualChannels) {
    Rng rng(5);
    const Frame f = random_frame(rng, 6, 9);
    const std::vector<Frame> history(6, f);
    const auto in = build_input(history, 5);
    ASSERT_EQ(in.tensor.channels(), 3u);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < f.height; ++y) {
            for (std::size_t x = 0; x < f.width; ++x) EXPECT_EQ(in.tensor(c, y, x), f.at(y, x));
        }
    }
}

TEST(BuildInput, StepInLastFrame) {
    std::vector<Frame> history;
    for (float v : {0.f, 0.f, 0.f, 0.f, 0.f, 1.f}) history.emplace_back(2, 2, v);
    const auto in = build_input(history, 5);
    EXPECT_FLOAT_EQ(in.tensor(0, 1, 1), 0.0f);
    EXPECT_FLOAT_EQ(in.tensor(1, 1, 1), 0.0f);
    EXPECT_FLOAT_EQ(in.tensor(2, 1, 1), 0.5f);
    EXPECT_EQ(in.frame_index, 5);
}

TEST(BuildInput, MatchesPerPixelOracle) {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Frame> history;
        for (int k = 0; k < 6; ++k) history.push_back(random_frame(rng, 8, 11));
        const auto in = build_input(history, 42);
        // channel c is I'(t-4+2c) = (I(t-4+2c) + I(t-5+2c)) / 2 with history[5] = I(t)
        for (std::size_t c = 0; c < 3; ++c) {
            const Frame& newer = history[2 * c + 1];
            const Frame& older = history[2 * c];
            for (std::size_t y = 0; y < 8; ++y) {
                for (std::size_t x = 0; x < 11; ++x) {
                    const float expect = (newer.at(y, x) + older.at(y, x)) / 2.0f;
                    EXPECT_NEAR(in.tensor(c, y, x), expect, 1e-7);
                }
            }
        }
    }
}

TEST(BuildInput, UsesLastSixFrames) {
    std::vector<Frame> history;
    for (int k = 0; k < 9; ++k) history.emplace_back(1, 1, static_cast<float>(k) / 10.0f);
    const auto in = build_input(history, 8);
    EXPECT_NEAR(in.tensor(0, 0, 0), 0.35f, 1e-6);
    EXPECT_NEAR(in.tensor(2, 0, 0), 0.75f, 1e-6);
}

TEST(BuildInput, InsufficientHistory) {
    const std::vector<Frame> history(5, Frame(2, 2));
    try {
        build_input(history, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientHistory);
    }
}

TEST(BuildInput, ChannelMeanIsSubtracted) {
    const std::vector<Frame> history(6, Frame(1, 1, 0.5f));
    PreprocOptions opts;
    opts.channel_mean = {0.1f, 0.2f, 0.3f};
    const auto in = build_input(history, 5, opts);
    EXPECT_NEAR(in.tensor(0, 0, 0), 0.4f, 1e-6);
    EXPECT_NEAR(in.tensor(2, 0, 0), 0.2f, 1e-6);
}

TEST(FrameWindow, WarmupThenSliding) {
    FrameWindow window;
    std::vector<Frame> all;
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        all.push_back(random_frame(rng, 3, 4));
        window.push(all.back());
        EXPECT_EQ(window.ready(), t >= 5);
        if (t < 5) {
            EXPECT_THROW(window.build(), Error);
            continue;
        }
        const auto in = window.build();
        EXPECT_EQ(in.frame_index, t);
        const auto expect = build_input(std::span<const Frame>(all.data(), all.size()), t);
        EXPECT_EQ(in.tensor, expect.tensor);
    }
    EXPECT_EQ(window.peak_size(), kHistoryFrames);
}

TEST(FrameWindow, RejectsSizeChange) {
    FrameWindow window;
    window.push(Frame(3, 3));
    EXPECT_THROW(window.push(Frame(3, 4)), Error);
}

TEST(Pgm, ByteScaling) {
    GrayImage img{1, 3, {255, 0, 128}};
    const Frame f = decode_frame(encode_pgm(img));
    EXPECT_EQ(f.at(0, 0), 1.0f);
    EXPECT_EQ(f.at(0, 1), 0.0f);
    EXPECT_FLOAT_EQ(f.at(0, 2), 128.0f / 255.0f);
}

TEST(Pgm, RoundTripWithinQuantization) {
    Rng rng(9);
    const Frame f = random_frame(rng, 13, 17);
    const Frame back = decode_frame(encode_pgm(to_gray(f)));
    ASSERT_TRUE(back.same_dims(f));
    for (std::size_t i = 0; i < f.data.size(); ++i) EXPECT_LE(std::abs(back.data[i] - f.data[i]), 1.0f / 255.0f);
}

TEST(Pgm, HeaderWithComments) {
    const std::string text = "P5\n# a comment\n2 1\n# another\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back(10);
    bytes.push_back(20);
    const GrayImage img = parse_pgm(bytes);
    EXPECT_EQ(img.width, 2u);
    EXPECT_EQ(img.height, 1u);
    EXPECT_EQ(img.pixels[1], 20);
}

TEST(Pgm, RejectsBadInput) {
    const std::string ascii = "P2\n1 1\n255\n0\n";
    try {
        parse_pgm(std::vector<std::uint8_t>(ascii.begin(), ascii.end()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Decode);
    }
    const std::string truncated = "P5\n4 4\n255\n";
    try {
        parse_pgm(std::vector<std::uint8_t>(truncated.begin(), truncated.end()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Decode);
    }
}

TEST(Sources, DirectoryIsLexicographic) {
    const auto dir = scratch_dir("order");
    for (int v : {2, 0, 1}) {
        write_pgm(dir / ("f" + std::to_string(v) + ".pgm"), GrayImage{1, 1, {static_cast<std::uint8_t>(v * 100)}});
    }
    PgmDirectorySource src(dir);
    std::vector<float> got;
    while (auto f = src.next()) got.push_back(f->at(0, 0));
    ASSERT_EQ(got.size(), 3u);
    EXPECT_FLOAT_EQ(got[0], 0.0f);
    EXPECT_FLOAT_EQ(got[2], 200.0f / 255.0f);
}

TEST(Sources, RawFramesAndTruncation) {
    const auto dir = scratch_dir("raw");
    const auto path = dir / "video.raw";
    {
        std::ofstream out(path, std::ios::binary);
        for (int i = 0; i < 2 * 6 + 3; ++i) out.put(static_cast<char>(i));
    }
    RawSource src(path, 3, 2);
    ASSERT_TRUE(src.next().has_value());
    const auto second = src.next();
    ASSERT_TRUE(second.has_value());
    EXPECT_FLOAT_EQ(second->at(0, 0), 6.0f / 255.0f);
    try {
        src.next();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Decode);
    }
}

TEST(Resize, IdentityAndConstant) {
    Rng rng(4);
    const Frame f = random_frame(rng, 5, 6);
    EXPECT_EQ(resize_bilinear(f, 5, 6), f);
    const Frame c = resize_bilinear(Frame(4, 4, 0.25f), 9, 3);
    for (float v : c.data) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Luma, Weights) {
    EXPECT_FLOAT_EQ(luma601(255, 255, 255), 1.0f);
    EXPECT_NEAR(luma601(255, 0, 0), 0.299f, 1e-6);
}
