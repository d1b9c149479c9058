#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "detkit/codec.hpp"
#include "detkit/rng.hpp"
#include "fixtures.hpp"

using namespace detkit;
namespace fx = detkit::fixtures;

namespace {

const ImageRecord kImg = fx::image(7, 640, 480);

std::vector<Detection> random_dets(Rng& rng, std::size_t n) {
    std::vector<Detection> dets;
    for (std::size_t i = 0; i < n; ++i)
        dets.push_back({kImg.id, 3, fx::random_box(rng, kImg.width, kImg.height),
                        rng.next_double()});
    return dets;
}

}  // namespace

TEST_CASE("encode renders the full-image box exactly") {
    const std::vector<Detection> dets = {{7, 1, BBox{0, 0, 640, 480}, 1.0}};
    CHECK(encode_answer(dets, kImg, {}) == "[0.000, 0.000, 1.000, 1.000, 1.000]");
}

TEST_CASE("empty list encodes to the no-objects sentence") {
    CHECK(encode_answer({}, kImg, {}) == std::string(kNoObjectsSentence));
}

TEST_CASE("encode rejects out-of-range values") {
    CHECK_THROWS_AS(encode_answer({{7, 1, BBox{0, 0, 700, 480}, 1.0}}, kImg, {}),
                    std::domain_error);
    CHECK_THROWS_AS(encode_answer({{7, 1, BBox{0, 0, 640, 480}, 1.5}}, kImg, {}),
                    std::domain_error);
}

TEST_CASE("parse inverts encode on the full-image box") {
    const auto outcome = parse_answer("[0.000, 0.000, 1.000, 1.000, 1.000]", kImg, 5, {});
    CHECK(outcome.errors.empty());
    REQUIRE(outcome.detections.size() == 1);
    CHECK(outcome.detections[0].bbox == BBox{0, 0, 640, 480});
    CHECK(outcome.detections[0].score == 1.0);
    CHECK(outcome.detections[0].category_id == 5);
    CHECK(outcome.detections[0].image_id == 7);
}

TEST_CASE("negative sentence parses to nothing with no errors") {
    const auto outcome = parse_answer(std::string(kNoObjectsSentence), kImg, 1, {});
    CHECK(outcome.detections.empty());
    CHECK(outcome.errors.empty());
}

TEST_CASE("one valid group plus one truncated group") {
    const auto outcome = parse_answer(
        "sure: [0.100, 0.200, 0.900, 0.800, 0.500] and [0.1, 0.2, 0.9", kImg, 1, {});
    REQUIRE(outcome.detections.size() == 1);
    REQUIRE(outcome.errors.size() == 1);
    CHECK(outcome.errors[0].reason == "expected ',' after field 3");
    CHECK(outcome.detections[0].bbox.x1 == doctest::Approx(64.0));
}

TEST_CASE("inverted corners are reordered and scores are clamped") {
    const auto outcome = parse_answer("[0.9, 0.8, 0.1, 0.2, 7]", kImg, 1, {});
    REQUIRE(outcome.detections.size() == 1);
    const auto& d = outcome.detections[0];
    CHECK(d.bbox.x1 == doctest::Approx(0.1 * 640));
    CHECK(d.bbox.x2 == doctest::Approx(0.9 * 640));
    CHECK(d.bbox.y1 == doctest::Approx(0.2 * 480));
    CHECK(d.bbox.y2 == doctest::Approx(0.8 * 480));
    CHECK(d.score == 1.0);
}

TEST_CASE("degenerate group is reported, not returned") {
    const auto outcome = parse_answer("[0.5, 0.2, 0.5, 0.8, 0.9]", kImg, 1, {});
    CHECK(outcome.detections.empty());
    REQUIRE(outcome.errors.size() == 1);
    CHECK(outcome.errors[0].reason == "degenerate box");
}

TEST_CASE("a bracket inside a failed group can still start a valid group") {
    const auto outcome = parse_answer("[[0.1, 0.1, 0.9, 0.9, 0.5]", kImg, 1, {});
    CHECK(outcome.detections.size() == 1);
    CHECK(outcome.errors.size() == 1);
}

TEST_CASE("plain round trip stays within the quantization half-step") {
    Rng rng(11);
    TokenCodecConfig cfg;  // plain, precision 3
    for (int trial = 0; trial < 100; ++trial) {
        const auto dets = random_dets(rng, 1 + rng.next_index(5));
        const auto outcome = parse_answer(encode_answer(dets, kImg, cfg), kImg, 3, cfg);
        CHECK(outcome.errors.empty());
        REQUIRE(outcome.detections.size() == dets.size());
        for (std::size_t i = 0; i < dets.size(); ++i) {
            const auto& in = dets[i];
            const auto& out = outcome.detections[i];  // order preserved
            CHECK(std::abs(in.bbox.x1 - out.bbox.x1) / kImg.width <= 0.0005 + 1e-12);
            CHECK(std::abs(in.bbox.y1 - out.bbox.y1) / kImg.height <= 0.0005 + 1e-12);
            CHECK(std::abs(in.bbox.x2 - out.bbox.x2) / kImg.width <= 0.0005 + 1e-12);
            CHECK(std::abs(in.bbox.y2 - out.bbox.y2) / kImg.height <= 0.0005 + 1e-12);
            CHECK(std::abs(in.score - out.score) <= 0.0005 + 1e-12);
        }
    }
}

TEST_CASE("extra_vocab round trip stays within half a bin width") {
    Rng rng(12);
    TokenCodecConfig cfg;
    cfg.mode = TokenCodecConfig::Mode::kExtraVocab;
    const double coord_tol = 0.5 / (cfg.coord_bins - 1) + 1e-12;
    const double score_tol = 0.5 / (cfg.score_bins - 1) + 1e-12;
    for (int trial = 0; trial < 100; ++trial) {
        const auto dets = random_dets(rng, 1 + rng.next_index(5));
        const auto encoded = encode_answer(dets, kImg, cfg);
        const auto outcome = parse_answer(encoded, kImg, 3, cfg);
        CHECK(outcome.errors.empty());
        REQUIRE(outcome.detections.size() == dets.size());
        for (std::size_t i = 0; i < dets.size(); ++i) {
            CHECK(std::abs(dets[i].bbox.x1 - outcome.detections[i].bbox.x1) / kImg.width <=
                  coord_tol);
            CHECK(std::abs(dets[i].bbox.y2 - outcome.detections[i].bbox.y2) / kImg.height <=
                  coord_tol);
            CHECK(std::abs(dets[i].score - outcome.detections[i].score) <= score_tol);
        }
    }
}

TEST_CASE("encoded plain output stays inside the documented alphabet") {
    Rng rng(13);
    const std::string allowed = "0123456789.,; []";
    for (int trial = 0; trial < 20; ++trial) {
        const auto text = encode_answer(random_dets(rng, 3), kImg, {});
        for (char c : text) CHECK(allowed.find(c) != std::string::npos);
    }
}

TEST_CASE("vocab_tokens enumerates both codebooks") {
    TokenCodecConfig cfg;
    cfg.mode = TokenCodecConfig::Mode::kExtraVocab;
    const auto tokens = vocab_tokens(cfg);
    CHECK(tokens.size() == 1100);
    CHECK(tokens.front() == "<coord_0>");
    CHECK(tokens[999] == "<coord_999>");
    CHECK(tokens.back() == "<score_99>");

    cfg.coord_bins = 2;
    cfg.score_bins = 2;
    const auto tiny = vocab_tokens(cfg);
    REQUIRE(tiny.size() == 4);
    // bins=2 tokens land exactly on the {0, 1} endpoints
    const auto outcome = parse_answer("[<coord_0>, <coord_0>, <coord_1>, <coord_1>, <score_1>]",
                                      kImg, 1, cfg);
    REQUIRE(outcome.detections.size() == 1);
    CHECK(outcome.detections[0].bbox == BBox{0, 0, 640, 480});
    CHECK(outcome.detections[0].score == 1.0);
}

TEST_CASE("vocab_tokens rejects plain mode") {
    CHECK_THROWS_AS(vocab_tokens({}), std::domain_error);
}

TEST_CASE("mixed-up codebooks are parse errors") {
    TokenCodecConfig cfg;
    cfg.mode = TokenCodecConfig::Mode::kExtraVocab;
    const auto outcome = parse_answer("[<score_1>, <coord_0>, <coord_9>, <coord_9>, <score_1>]",
                                      kImg, 1, cfg);
    CHECK(outcome.detections.empty());
    CHECK(outcome.errors.size() == 1);
}

TEST_CASE("parser survives garbage input") {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        std::string garbage;
        const std::size_t len = rng.next_index(120);
        static const std::string alphabet = "[]0123456789.,; <>cords_ab\n\t\"{}-+e";
        for (std::size_t i = 0; i < len; ++i)
            garbage += alphabet[rng.next_index(alphabet.size())];
        const auto outcome = parse_answer(garbage, kImg, 1, {});
        for (const auto& d : outcome.detections) {
            CHECK(d.bbox.valid());
            CHECK(d.score >= 0.0);
            CHECK(d.score <= 1.0);
        }
    }
}
