#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "detkit/dataset.hpp"
#include "detkit/types.hpp"

namespace detkit {

// Specialist-detector output in COCO results format, validated and clamped
// against ds. Records with scores outside [0,1] or categories outside the
// dataset label set are rejected with a warning; unresolvable image ids
// raise ValidationError.
std::vector<Detection> load_pseudo_labels(const std::filesystem::path& path,
                                          const DetectionDataset& ds,
                                          LoadReport* report = nullptr);

// Ground truth as scored annotations: score 1.0, ground_truth origin.
std::vector<ScoredAnnotation> to_scored(const std::vector<GroundTruthAnnotation>& gt);

// Merges one image's annotations with pseudo-labels by class-wise greedy
// suppression over the scored union. Existing annotations are the reference
// set: every one of them survives unconditionally. Pseudo labels are
// visited in (score desc, input index asc) order and dropped when any kept
// same-class box overlaps them above the threshold, so a pseudo duplicate
// of ground truth always loses, score ties included. Crowd annotations pass
// through and suppress nothing. Output preserves input order (existing
// annotations first, kept pseudo boxes after), which makes merging
// idempotent: merging a merged list with no pseudo labels is the identity.
std::vector<ScoredAnnotation> merge_image(const std::vector<ScoredAnnotation>& anns,
                                          const std::vector<Detection>& pseudo,
                                          double iou_threshold, bool class_wise = true);

std::vector<ScoredAnnotation> merge_image(const std::vector<GroundTruthAnnotation>& gt,
                                          const std::vector<Detection>& pseudo,
                                          double iou_threshold, bool class_wise = true);

// Applies merge_image per image; the result is assembled in ascending
// image-id order regardless of `parallelism`. Per-image box counts never
// decrease relative to the ground truth alone.
ScoredDataset adjust_dataset(const DetectionDataset& ds, const std::vector<Detection>& pseudo,
                             double iou_threshold = 0.5, bool class_wise = true,
                             std::size_t parallelism = 1);

// Before/after distribution comparison. Throws std::domain_error when the
// two sides cover different image counts.
struct ShiftReport {
    BoxDistributionStats before;
    BoxDistributionStats after;
    double mean_delta = 0.0;
};

ShiftReport distribution_shift_report(const BoxDistributionStats& before,
                                      const BoxDistributionStats& after);

}  // namespace detkit
