#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace detkit {

using ImageId = std::int64_t;
using CategoryId = std::int64_t;

// Axis-aligned box in absolute pixel corner coordinates. Valid boxes have
// strictly positive width and height.
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const { return x2 > x1 && y2 > y1; }

    // Clamps to [0,w]x[0,h]. Idempotent. May produce a degenerate box; the
    // caller decides whether to drop it.
    BBox clamped(double image_width, double image_height) const {
        BBox b;
        b.x1 = std::clamp(x1, 0.0, image_width);
        b.y1 = std::clamp(y1, 0.0, image_height);
        b.x2 = std::clamp(x2, 0.0, image_width);
        b.y2 = std::clamp(y2, 0.0, image_height);
        return b;
    }

    bool operator==(const BBox& o) const = default;
};

struct ImageRecord {
    ImageId id = 0;
    double width = 0.0;
    double height = 0.0;
    std::string file_name;
};

struct GroundTruthAnnotation {
    std::int64_t id = 0;  // annotation id from the source file; used in reports
    ImageId image_id = 0;
    CategoryId category_id = 0;
    BBox bbox;
    double area = 0.0;
    bool iscrowd = false;
};

struct Detection {
    ImageId image_id = 0;
    CategoryId category_id = 0;
    BBox bbox;
    double score = 0.0;

    bool operator==(const Detection& o) const = default;
};

// Where a merged annotation came from. Ground-truth records always carry
// score 1.0; pseudo records keep the detector's score.
enum class AnnotationOrigin { kGroundTruth, kPseudo };

struct ScoredAnnotation {
    ImageId image_id = 0;
    CategoryId category_id = 0;
    BBox bbox;
    double area = 0.0;
    bool iscrowd = false;
    double score = 1.0;
    AnnotationOrigin origin = AnnotationOrigin::kGroundTruth;
};

struct Category {
    CategoryId id = 0;
    std::string name;
};

// Ordered label set. Order follows the source file and is stable across runs.
class CategorySet {
public:
    CategorySet() = default;
    explicit CategorySet(std::vector<Category> cats) : cats_(std::move(cats)) {
        for (std::size_t i = 0; i < cats_.size(); ++i) index_[cats_[i].id] = i;
    }

    std::size_t size() const { return cats_.size(); }
    bool empty() const { return cats_.empty(); }
    bool contains(CategoryId id) const { return index_.count(id) > 0; }

    const Category& at(std::size_t pos) const { return cats_[pos]; }
    const std::vector<Category>& items() const { return cats_; }

    std::optional<std::size_t> index_of(CategoryId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string* name_of(CategoryId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return nullptr;
        return &cats_[it->second].name;
    }

    auto begin() const { return cats_.begin(); }
    auto end() const { return cats_.end(); }

private:
    std::vector<Category> cats_;
    std::map<CategoryId, std::size_t> index_;
};

// Images + ground-truth annotations + label set. Immutable after load; safe
// to share across concurrent readers.
struct DetectionDataset {
    std::vector<ImageRecord> images;
    std::vector<GroundTruthAnnotation> annotations;
    CategorySet categories;

    const ImageRecord* find_image(ImageId id) const {
        for (const auto& im : images)
            if (im.id == id) return &im;
        return nullptr;
    }
};

// Same shape as DetectionDataset but annotations carry scores and origins
// (the output of pseudo-label merging).
struct ScoredDataset {
    std::vector<ImageRecord> images;
    std::vector<ScoredAnnotation> annotations;
    CategorySet categories;
};

// Boxes-per-image distribution. histogram maps a box-count bucket to the
// number of images with exactly that many boxes; images with zero boxes are
// included.
struct BoxDistributionStats {
    std::size_t total_images = 0;
    std::size_t total_boxes = 0;
    double mean_boxes_per_image = 0.0;
    std::map<std::size_t, std::size_t> histogram;
};

}  // namespace detkit
