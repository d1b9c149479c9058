#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

// Non-fatal load events: rejected records and their reasons.
struct LoadReport {
    std::size_t dropped_degenerate_boxes = 0;
    std::size_t rejected_records = 0;
    std::vector<std::string> warnings;
};

// Loads a COCO-style annotation document (images / annotations / categories,
// boxes in [x, y, w, h]). Boxes are converted to two-corner form and clamped
// to their image; records degenerate after clamping are dropped and counted
// in `report`. Throws ParseError (with byte offset) on malformed documents
// and ValidationError listing offenders on dangling ids.
DetectionDataset load_coco_json(const std::filesystem::path& path,
                                LoadReport* report = nullptr);

// Same document shape plus optional per-annotation "score" and "origin"
// extension fields (the adjusted-dataset output format). Plain ground-truth
// files load with score 1.0 and ground_truth origin everywhere.
ScoredDataset load_scored_json(const std::filesystem::path& path,
                               LoadReport* report = nullptr);

// Writes a ScoredDataset back out in the annotation format with the score
// and origin extension fields.
void write_scored_json(const std::filesystem::path& path, const ScoredDataset& ds);

// Loads a COCO results document (flat list of {image_id, category_id,
// bbox:[x,y,w,h], score}) and validates it against `ds`: unresolvable image
// ids raise ValidationError, out-of-range scores and unknown categories are
// rejected with a warning. Boxes are clamped like ground truth.
std::vector<Detection> load_detections_json(const std::filesystem::path& path,
                                            const DetectionDataset& ds,
                                            LoadReport* report = nullptr);

void write_detections_json(const std::filesystem::path& path,
                           const std::vector<Detection>& dets);

// Boxes-per-image distribution over all images, zero-box images included.
// Throws ValidationError on an empty (0 images) dataset.
BoxDistributionStats dataset_stats(const DetectionDataset& ds);
BoxDistributionStats dataset_stats(const ScoredDataset& ds);

// Same distribution for a prediction set over a fixed image list.
BoxDistributionStats prediction_stats(const std::vector<ImageRecord>& images,
                                      const std::vector<Detection>& preds);

struct ValidationIssue {
    enum class Kind {
        kDanglingImage,
        kDanglingCategory,
        kDegenerateBox,
        kNonPositiveArea,
        kDuplicateImageId,
        kDuplicateCategory,
        kScoreOutOfRange,
    };
    Kind kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

// Structural invariant check; the report is empty iff the dataset is valid.
ValidationReport validate(const DetectionDataset& ds);

}  // namespace detkit
