#include <doctest.h>

#include <json.hpp>

#include "detkit/dataset.hpp"
#include "detkit/errors.hpp"
#include "detkit/geometry.hpp"
#include "detkit/merge.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace detkit;
namespace fx = detkit::fixtures;

namespace {

bool same_annotation(const ScoredAnnotation& a, const ScoredAnnotation& b) {
    return a.image_id == b.image_id && a.category_id == b.category_id && a.bbox == b.bbox &&
           a.score == b.score && a.origin == b.origin && a.iscrowd == b.iscrowd;
}

}  // namespace

TEST_CASE("a pseudo duplicate of a GT box is suppressed, GT survives") {
    const std::vector<GroundTruthAnnotation> gt = {fx::gt(1, 1, 1, 10, 10, 100, 100)};
    const std::vector<Detection> pseudo = {fx::det(1, 1, 10, 10, 100, 100, 0.8)};
    const auto merged = merge_image(gt, pseudo, 0.5);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].origin == AnnotationOrigin::kGroundTruth);
    CHECK(merged[0].score == 1.0);
}

TEST_CASE("a disjoint same-class pseudo box is kept with the detector score") {
    const std::vector<GroundTruthAnnotation> gt = {fx::gt(1, 1, 1, 10, 10, 100, 100)};
    const std::vector<Detection> pseudo = {fx::det(1, 1, 300, 300, 400, 400, 0.8)};
    const auto merged = merge_image(gt, pseudo, 0.5);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].origin == AnnotationOrigin::kGroundTruth);
    CHECK(merged[1].origin == AnnotationOrigin::kPseudo);
    CHECK(merged[1].score == 0.8);
}

TEST_CASE("score-1.0 pseudo ties resolve toward the GT record") {
    const std::vector<GroundTruthAnnotation> gt = {fx::gt(1, 1, 1, 10, 10, 100, 100)};
    const std::vector<Detection> pseudo = {fx::det(1, 1, 12, 12, 100, 100, 1.0)};
    const auto merged = merge_image(gt, pseudo, 0.5);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].origin == AnnotationOrigin::kGroundTruth);
}

TEST_CASE("merge equals brute-force suppression of the scored union") {
    Rng rng(505);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<GroundTruthAnnotation> gt;
        for (int g = 0; g < 5; ++g) {
            const BBox box = fx::random_box(rng, 300, 300);
            gt.push_back(fx::gt(g + 1, 1, static_cast<CategoryId>(1 + rng.next_index(2)),
                                box.x1, box.y1, box.x2, box.y2));
        }
        std::vector<Detection> pseudo;
        for (int p = 0; p < 40; ++p)
            pseudo.push_back({1, static_cast<CategoryId>(1 + rng.next_index(2)),
                              fx::random_box(rng, 300, 300), rng.next_double()});

        // Oracle: rank the union directly (GT first, origin precedence).
        std::vector<oracle::RankedBox> ranked;
        for (std::size_t i = 0; i < gt.size(); ++i)
            ranked.push_back({gt[i].bbox, 1.0, gt[i].category_id, true, i});
        for (std::size_t i = 0; i < pseudo.size(); ++i)
            ranked.push_back({pseudo[i].bbox, pseudo[i].score, pseudo[i].category_id, false,
                              gt.size() + i});
        auto expected = oracle::brute_force_nms(ranked, 0.5, true);
        std::sort(expected.begin(), expected.end());

        const auto merged = merge_image(gt, pseudo, 0.5);
        REQUIRE(merged.size() == expected.size());
        for (std::size_t i = 0; i < merged.size(); ++i) {
            const std::size_t src = expected[i];  // merge preserves union order
            if (src < gt.size()) {
                CHECK(merged[i].origin == AnnotationOrigin::kGroundTruth);
                CHECK(merged[i].bbox == gt[src].bbox);
            } else {
                CHECK(merged[i].origin == AnnotationOrigin::kPseudo);
                CHECK(merged[i].bbox == pseudo[src - gt.size()].bbox);
            }
        }
    }
}

TEST_CASE("merge invariants on random fixtures") {
    Rng rng(606);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<GroundTruthAnnotation> gt;
        const std::size_t n_gt = rng.next_index(6);
        for (std::size_t g = 0; g < n_gt; ++g) {
            const BBox box = fx::random_box(rng, 200, 200);
            gt.push_back(fx::gt(static_cast<std::int64_t>(g + 1), 1,
                                static_cast<CategoryId>(1 + rng.next_index(3)), box.x1, box.y1,
                                box.x2, box.y2));
        }
        std::vector<Detection> pseudo;
        const std::size_t n_pseudo = rng.next_index(25);
        for (std::size_t p = 0; p < n_pseudo; ++p)
            pseudo.push_back({1, static_cast<CategoryId>(1 + rng.next_index(3)),
                              fx::random_box(rng, 200, 200), rng.next_double()});

        const auto merged = merge_image(gt, pseudo, 0.5);

        // every GT survives
        std::size_t gt_kept = 0;
        for (const auto& m : merged)
            if (m.origin == AnnotationOrigin::kGroundTruth) ++gt_kept;
        CHECK(gt_kept == gt.size());
        CHECK(merged.size() >= gt.size());

        // no kept box overlaps a strictly higher-scored kept box of its class
        for (std::size_t i = 0; i < merged.size(); ++i)
            for (std::size_t j = 0; j < merged.size(); ++j) {
                if (i == j || merged[i].category_id != merged[j].category_id) continue;
                if (merged[j].score > merged[i].score)
                    CHECK(iou(merged[j].bbox, merged[i].bbox) <= 0.5);
            }

        // idempotence
        const auto again = merge_image(merged, {}, 0.5);
        REQUIRE(again.size() == merged.size());
        for (std::size_t i = 0; i < merged.size(); ++i)
            CHECK(same_annotation(again[i], merged[i]));
    }
}

TEST_CASE("crowd annotations pass through untouched and suppress nothing") {
    std::vector<GroundTruthAnnotation> gt = {fx::gt(1, 1, 1, 10, 10, 100, 100, /*iscrowd=*/true)};
    const std::vector<Detection> pseudo = {fx::det(1, 1, 10, 10, 100, 100, 0.9)};
    const auto merged = merge_image(gt, pseudo, 0.5);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].iscrowd);
    CHECK(merged[1].origin == AnnotationOrigin::kPseudo);
}

TEST_CASE("adjust_dataset with no pseudo labels is the scored identity") {
    Rng rng(707);
    const auto ds = fx::random_dataset(rng, 6, 5, 3);
    const auto adjusted = adjust_dataset(ds, {}, 0.5);
    REQUIRE(adjusted.annotations.size() == ds.annotations.size());
    for (const auto& a : adjusted.annotations) {
        CHECK(a.score == 1.0);
        CHECK(a.origin == AnnotationOrigin::kGroundTruth);
    }
}

TEST_CASE("two disjoint pseudo boxes per image raise the mean by exactly 2") {
    DetectionDataset ds;
    ds.categories = fx::categories(1);
    std::vector<Detection> pseudo;
    for (int i = 1; i <= 10; ++i) {
        ds.images.push_back(fx::image(i));
        ds.annotations.push_back(fx::gt(i, i, 1, 10, 10, 60, 60));
        pseudo.push_back(fx::det(i, 1, 200, 200, 260, 260, 0.7));
        pseudo.push_back(fx::det(i, 1, 400, 300, 460, 360, 0.6));
    }
    const auto before = dataset_stats(ds);
    const auto adjusted = adjust_dataset(ds, pseudo, 0.5);
    const auto report = distribution_shift_report(before, dataset_stats(adjusted));
    CHECK(report.mean_delta == doctest::Approx(2.0));
    for (const auto& im : ds.images) {
        std::size_t count = 0;
        for (const auto& a : adjusted.annotations)
            if (a.image_id == im.id) ++count;
        CHECK(count == 3);
    }
}

TEST_CASE("adjust_dataset output is independent of parallelism") {
    Rng rng(808);
    const auto ds = fx::random_dataset(rng, 8, 6, 3);
    std::vector<Detection> pseudo;
    for (const auto& im : ds.images)
        for (int i = 0; i < 10; ++i)
            pseudo.push_back({im.id, static_cast<CategoryId>(1 + rng.next_index(3)),
                              fx::random_box(rng, im.width, im.height), rng.next_double()});

    const auto serial = adjust_dataset(ds, pseudo, 0.5, true, 1);
    const auto parallel = adjust_dataset(ds, pseudo, 0.5, true, 4);
    REQUIRE(serial.annotations.size() == parallel.annotations.size());
    for (std::size_t i = 0; i < serial.annotations.size(); ++i)
        CHECK(same_annotation(serial.annotations[i], parallel.annotations[i]));
}

TEST_CASE("distribution_shift_report rejects mismatched image counts") {
    BoxDistributionStats a, b;
    a.total_images = 5;
    b.total_images = 6;
    CHECK_THROWS_AS(distribution_shift_report(a, b), std::domain_error);

    b.total_images = 5;
    const auto report = distribution_shift_report(a, b);
    CHECK(report.mean_delta == 0.0);
}

TEST_CASE("a 7.3 to 31.0 mean shift reports delta +23.7") {
    BoxDistributionStats before, after;
    before.total_images = after.total_images = 100;
    before.mean_boxes_per_image = 7.3;
    after.mean_boxes_per_image = 31.0;
    CHECK(distribution_shift_report(before, after).mean_delta == doctest::Approx(23.7));
}
