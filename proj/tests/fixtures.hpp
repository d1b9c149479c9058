#pragma once

// Synthetic dataset builders shared by the unit and acceptance suites.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "detkit/rng.hpp"
#include "detkit/types.hpp"

namespace detkit::fixtures {

// Fresh scratch directory per call, shared temp root per process.
inline std::filesystem::path tmp_dir() {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("detkit_test_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path,
                                        const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

inline ImageRecord image(ImageId id, double w = 640, double h = 480) {
    return {id, w, h, "img_" + std::to_string(id) + ".jpg"};
}

inline GroundTruthAnnotation gt(std::int64_t id, ImageId image_id, CategoryId cat, double x1,
                                double y1, double x2, double y2, bool iscrowd = false) {
    BBox box{x1, y1, x2, y2};
    return {id, image_id, cat, box, box.area(), iscrowd};
}

inline Detection det(ImageId image_id, CategoryId cat, double x1, double y1, double x2, double y2,
                     double score) {
    return {image_id, cat, BBox{x1, y1, x2, y2}, score};
}

inline CategorySet categories(std::size_t n) {
    std::vector<Category> cats;
    for (std::size_t i = 0; i < n; ++i)
        cats.push_back({static_cast<CategoryId>(i + 1), "cat_" + std::to_string(i + 1)});
    return CategorySet(std::move(cats));
}

// Random box fully inside a w x h frame, side lengths spanning the COCO area
// strata (roughly 4..420 px).
inline BBox random_box(Rng& rng, double w, double h) {
    const double side_w = 4.0 * std::pow(105.0, rng.next_double());
    const double side_h = 4.0 * std::pow(105.0, rng.next_double());
    const double bw = std::min(side_w, w - 1.0);
    const double bh = std::min(side_h, h - 1.0);
    const double x1 = rng.uniform(0.0, w - bw);
    const double y1 = rng.uniform(0.0, h - bh);
    return {x1, y1, x1 + bw, y1 + bh};
}

// Small random instance for oracle-equivalence checks.
inline DetectionDataset random_dataset(Rng& rng, std::size_t max_images, std::size_t max_boxes,
                                       std::size_t max_categories) {
    DetectionDataset ds;
    const std::size_t n_images = 1 + rng.next_index(max_images);
    const std::size_t n_cats = 1 + rng.next_index(max_categories);
    ds.categories = categories(n_cats);
    std::int64_t ann_id = 1;
    for (std::size_t i = 0; i < n_images; ++i) {
        const ImageRecord im = image(static_cast<ImageId>(i + 1));
        ds.images.push_back(im);
        const std::size_t n_boxes = rng.next_index(max_boxes + 1);
        for (std::size_t b = 0; b < n_boxes; ++b) {
            const BBox box = random_box(rng, im.width, im.height);
            const auto cat = static_cast<CategoryId>(1 + rng.next_index(n_cats));
            ds.annotations.push_back({ann_id++, im.id, cat, box, box.area(), false});
        }
    }
    return ds;
}

// Prediction mix for a dataset: jittered copies of most GT boxes plus
// spurious boxes, some with deliberately tied scores.
inline std::vector<Detection> random_predictions(Rng& rng, const DetectionDataset& ds) {
    std::vector<Detection> preds;
    auto score = [&rng] {
        const double s = rng.next_double();
        return rng.bernoulli(0.5) ? std::round(s * 10.0) / 10.0 : s;  // force ties half the time
    };
    for (const auto& a : ds.annotations) {
        if (rng.bernoulli(0.25)) continue;  // miss
        const ImageRecord* im = ds.find_image(a.image_id);
        const double jitter = rng.uniform(0.0, 0.3);
        const double dx = rng.normal(0.0, jitter) * a.bbox.width();
        const double dy = rng.normal(0.0, jitter) * a.bbox.height();
        BBox box = BBox{a.bbox.x1 + dx, a.bbox.y1 + dy, a.bbox.x2 + dx, a.bbox.y2 + dy}.clamped(
            im->width, im->height);
        if (!box.valid()) continue;
        CategoryId cat = a.category_id;
        if (rng.bernoulli(0.15))  // label noise
            cat = static_cast<CategoryId>(1 + rng.next_index(ds.categories.size()));
        preds.push_back({a.image_id, cat, box, score()});
        if (rng.bernoulli(0.2)) preds.push_back({a.image_id, cat, box, score()});  // duplicate
    }
    for (const auto& im : ds.images) {
        const std::size_t extra = rng.next_index(3);
        for (std::size_t i = 0; i < extra; ++i)
            preds.push_back({im.id, static_cast<CategoryId>(1 + rng.next_index(ds.categories.size())),
                             random_box(rng, im.width, im.height), score()});
    }
    return preds;
}

// Images of disjoint grid-cell boxes, one category per image. Cross-box IoU
// is always zero, so recall under a proposal cap is exactly a prefix
// property; counts go up to 45 to leave mass beyond every cap in {3,...,31}.
inline DetectionDataset grid_fixture(std::size_t n_images, std::size_t n_categories,
                                     std::uint64_t seed) {
    constexpr std::size_t kGrid = 7;            // 7x7 = 49 cells
    constexpr double kCell = 640.0 / kGrid;
    DetectionDataset ds;
    ds.categories = categories(n_categories);
    Rng rng(derive_seed(seed, 0xF1));
    std::int64_t ann_id = 1;
    for (std::size_t i = 0; i < n_images; ++i) {
        const ImageRecord im = image(static_cast<ImageId>(i + 1), 640, 640);
        ds.images.push_back(im);
        const auto cat = static_cast<CategoryId>(1 + i % n_categories);
        const std::size_t count = 1 + rng.next_index(45);

        std::vector<std::size_t> cells(kGrid * kGrid);
        for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = c;
        rng.shuffle(cells);
        for (std::size_t b = 0; b < count; ++b) {
            const std::size_t cell = cells[b];
            const double cx = (static_cast<double>(cell % kGrid) + 0.5) * kCell;
            const double cy = (static_cast<double>(cell / kGrid) + 0.5) * kCell;
            const double half = kCell * 0.35;
            const BBox box{cx - half, cy - half, cx + half, cy + half};
            ds.annotations.push_back({ann_id++, im.id, cat, box, box.area(), false});
        }
    }
    return ds;
}

}  // namespace detkit::fixtures
