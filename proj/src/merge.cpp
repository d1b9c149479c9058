#include "detkit/merge.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "detkit/geometry.hpp"
#include "detkit/parallel.hpp"

namespace detkit {

std::vector<Detection> load_pseudo_labels(const std::filesystem::path& path,
                                          const DetectionDataset& ds, LoadReport* report) {
    return load_detections_json(path, ds, report);
}

std::vector<ScoredAnnotation> to_scored(const std::vector<GroundTruthAnnotation>& gt) {
    std::vector<ScoredAnnotation> out;
    out.reserve(gt.size());
    for (const auto& g : gt)
        out.push_back({g.image_id, g.category_id, g.bbox, g.area, g.iscrowd, 1.0,
                       AnnotationOrigin::kGroundTruth});
    return out;
}

std::vector<ScoredAnnotation> merge_image(const std::vector<ScoredAnnotation>& anns,
                                          const std::vector<Detection>& pseudo,
                                          double iou_threshold, bool class_wise) {
    // Existing annotations are the reference set: they are all kept (a
    // ground-truth box is never suppressed, whatever overlaps it) and crowds
    // additionally never suppress anything. Incoming pseudo labels compete
    // in (score desc, input index asc) order against every kept non-crowd
    // box of their class.
    std::vector<std::size_t> order(pseudo.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pseudo[a].score > pseudo[b].score;
    });

    std::vector<ScoredBox> kept_boxes;
    for (const auto& a : anns)
        if (!a.iscrowd) kept_boxes.push_back({a.bbox, a.score, a.category_id});

    std::vector<bool> pseudo_kept(pseudo.size(), false);
    for (std::size_t idx : order) {
        const Detection& cand = pseudo[idx];
        bool suppressed = false;
        for (const auto& k : kept_boxes) {
            if (class_wise && k.category_id != cand.category_id) continue;
            if (iou(k.box, cand.bbox) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            pseudo_kept[idx] = true;
            kept_boxes.push_back({cand.bbox, cand.score, cand.category_id});
        }
    }

    std::vector<ScoredAnnotation> out;
    out.reserve(anns.size());
    for (const auto& a : anns) out.push_back(a);
    for (std::size_t i = 0; i < pseudo.size(); ++i)
        if (pseudo_kept[i])
            out.push_back({pseudo[i].image_id, pseudo[i].category_id, pseudo[i].bbox,
                           pseudo[i].bbox.area(), false, pseudo[i].score,
                           AnnotationOrigin::kPseudo});
    return out;
}

std::vector<ScoredAnnotation> merge_image(const std::vector<GroundTruthAnnotation>& gt,
                                          const std::vector<Detection>& pseudo,
                                          double iou_threshold, bool class_wise) {
    return merge_image(to_scored(gt), pseudo, iou_threshold, class_wise);
}

ScoredDataset adjust_dataset(const DetectionDataset& ds, const std::vector<Detection>& pseudo,
                             double iou_threshold, bool class_wise, std::size_t parallelism) {
    std::vector<ImageId> ids;
    ids.reserve(ds.images.size());
    for (const auto& im : ds.images) ids.push_back(im.id);
    std::sort(ids.begin(), ids.end());

    std::map<ImageId, std::vector<GroundTruthAnnotation>> gt_by_image;
    for (const auto& a : ds.annotations) gt_by_image[a.image_id].push_back(a);
    std::map<ImageId, std::vector<Detection>> pseudo_by_image;
    for (const auto& p : pseudo) pseudo_by_image[p.image_id].push_back(p);

    static const std::vector<GroundTruthAnnotation> kNoGt;
    static const std::vector<Detection> kNoPseudo;

    std::vector<std::vector<ScoredAnnotation>> merged(ids.size());
    parallel_for(ids.size(), parallelism, [&](std::size_t i) {
        const auto git = gt_by_image.find(ids[i]);
        const auto pit = pseudo_by_image.find(ids[i]);
        merged[i] = merge_image(git == gt_by_image.end() ? kNoGt : git->second,
                                pit == pseudo_by_image.end() ? kNoPseudo : pit->second,
                                iou_threshold, class_wise);
    });

    ScoredDataset out;
    out.images = ds.images;
    out.categories = ds.categories;
    for (auto& m : merged)
        out.annotations.insert(out.annotations.end(), m.begin(), m.end());
    return out;
}

ShiftReport distribution_shift_report(const BoxDistributionStats& before,
                                      const BoxDistributionStats& after) {
    if (before.total_images != after.total_images)
        throw std::domain_error("distribution_shift_report: image counts differ");
    ShiftReport report;
    report.before = before;
    report.after = after;
    report.mean_delta = after.mean_boxes_per_image - before.mean_boxes_per_image;
    return report;
}

}  // namespace detkit
