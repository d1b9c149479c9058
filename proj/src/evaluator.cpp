#include "detkit/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "detkit/dataset.hpp"
#include "detkit/errors.hpp"
#include "detkit/geometry.hpp"
#include "detkit/parallel.hpp"

namespace detkit {

namespace {

constexpr double kInfArea = 1e18;
constexpr std::size_t kNone = static_cast<std::size_t>(-1);

enum class DtStatus { kTruePositive, kFalsePositive, kIgnored };

// Per (image, category) slice with the IoU matrix precomputed once;
// detections are rank-sorted and truncated to max_detections up front.
struct Cell {
    std::vector<const GroundTruthAnnotation*> gts;
    std::vector<const Detection*> dts;
    std::vector<std::vector<double>> iou;  // [dt][gt]
};

// Greedy per-image matching for one (threshold, area stratum): each
// detection takes the max-IoU unmatched non-ignored GT at or above thr
// (lower GT index on ties), falling back to an ignored GT; a match there
// parks the detection as ignored. Unmatched detections outside the area
// range are ignored rather than counted as false positives.
void match_cell(const Cell& cell, double thr, double area_lo, double area_hi,
                std::vector<DtStatus>& dt_status, std::size_t& npig,
                std::vector<bool>* gt_matched = nullptr) {
    const std::size_t n_gt = cell.gts.size();
    std::vector<bool> gt_ignored(n_gt);
    std::vector<bool> taken(n_gt, false);
    for (std::size_t g = 0; g < n_gt; ++g) {
        const double a = cell.gts[g]->area;
        gt_ignored[g] = a < area_lo || a > area_hi;
        if (!gt_ignored[g]) ++npig;
    }
    if (gt_matched) gt_matched->assign(n_gt, false);

    dt_status.assign(cell.dts.size(), DtStatus::kFalsePositive);
    for (std::size_t d = 0; d < cell.dts.size(); ++d) {
        std::size_t best = kNone;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < n_gt; ++g) {
            if (taken[g] || gt_ignored[g]) continue;
            const double v = cell.iou[d][g];
            if (v >= thr && v > best_iou) {
                best_iou = v;
                best = g;
            }
        }
        if (best != kNone) {
            taken[best] = true;
            dt_status[d] = DtStatus::kTruePositive;
            if (gt_matched) (*gt_matched)[best] = true;
            continue;
        }
        best_iou = 0.0;
        for (std::size_t g = 0; g < n_gt; ++g) {
            if (taken[g] || !gt_ignored[g]) continue;
            const double v = cell.iou[d][g];
            if (v >= thr && v > best_iou) {
                best_iou = v;
                best = g;
            }
        }
        if (best != kNone) {
            taken[best] = true;
            dt_status[d] = DtStatus::kIgnored;
            continue;
        }
        const double area = cell.dts[d]->bbox.area();
        if (area < area_lo || area > area_hi) dt_status[d] = DtStatus::kIgnored;
    }
}

struct CellOutcome {
    bool defined = false;
    double ap = 0.0;
    double final_recall = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t npig = 0;
};

struct CategoryData {
    std::vector<Cell> cells;           // one per image, ascending image id
    std::vector<double> scores;        // concatenated detection scores
    std::vector<std::size_t> order;    // rank order into `scores`
    std::vector<std::size_t> offsets;  // per-cell start into `scores`
};

// Accumulates one (category, area, threshold) PR cell: cumulative tp/fp in
// rank order, precision envelope, then the sampled recall grid.
CellOutcome accumulate(const CategoryData& cat, double thr, double area_lo, double area_hi,
                       std::size_t recall_points,
                       std::vector<std::pair<double, double>>* staircase = nullptr) {
    CellOutcome out;
    std::vector<DtStatus> statuses(cat.scores.size());
    std::size_t npig = 0;
    std::vector<DtStatus> cell_status;
    for (std::size_t c = 0; c < cat.cells.size(); ++c) {
        match_cell(cat.cells[c], thr, area_lo, area_hi, cell_status, npig);
        std::copy(cell_status.begin(), cell_status.end(), statuses.begin() + cat.offsets[c]);
    }
    out.npig = npig;
    if (npig == 0) return out;
    out.defined = true;

    std::vector<double> recalls, precisions;
    std::size_t tp = 0, fp = 0;
    for (std::size_t idx : cat.order) {
        if (statuses[idx] == DtStatus::kIgnored) continue;
        if (statuses[idx] == DtStatus::kTruePositive) ++tp;
        else ++fp;
        recalls.push_back(static_cast<double>(tp) / static_cast<double>(npig));
        precisions.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        if (staircase) staircase->emplace_back(recalls.back(), precisions.back());
    }
    out.tp = tp;
    out.fp = fp;
    out.final_recall = recalls.empty() ? 0.0 : recalls.back();

    // Precision envelope: max over all points at or beyond each recall.
    for (std::size_t i = precisions.size(); i > 1; --i)
        precisions[i - 2] = std::max(precisions[i - 2], precisions[i - 1]);

    double sum = 0.0;
    for (std::size_t r = 0; r < recall_points; ++r) {
        const double target = static_cast<double>(r) / static_cast<double>(recall_points - 1);
        const auto it = std::lower_bound(recalls.begin(), recalls.end(), target);
        if (it != recalls.end())
            sum += precisions[static_cast<std::size_t>(it - recalls.begin())];
    }
    out.ap = sum / static_cast<double>(recall_points);
    return out;
}

std::vector<ImageId> sorted_image_ids(const DetectionDataset& ds) {
    std::vector<ImageId> ids;
    ids.reserve(ds.images.size());
    for (const auto& im : ds.images) ids.push_back(im.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void check_predictions(const std::vector<Detection>& preds, const DetectionDataset& ds) {
    std::unordered_set<ImageId> image_ids;
    for (const auto& im : ds.images) image_ids.insert(im.id);
    for (const auto& p : preds) {
        if (!image_ids.count(p.image_id))
            throw ValidationError("prediction references missing image " +
                                  std::to_string(p.image_id));
        if (!ds.categories.contains(p.category_id))
            throw ValidationError("prediction references missing category " +
                                  std::to_string(p.category_id));
    }
}

CategoryData build_category(const std::vector<Detection>& preds, const DetectionDataset& ds,
                            const std::vector<ImageId>& image_ids, CategoryId cat,
                            std::size_t max_dets) {
    CategoryData data;
    std::unordered_map<ImageId, std::size_t> pos;
    for (std::size_t i = 0; i < image_ids.size(); ++i) pos[image_ids[i]] = i;
    data.cells.resize(image_ids.size());

    for (const auto& a : ds.annotations)
        if (a.category_id == cat && !a.iscrowd) data.cells[pos.at(a.image_id)].gts.push_back(&a);
    for (const auto& p : preds)
        if (p.category_id == cat) data.cells[pos.at(p.image_id)].dts.push_back(&p);

    for (auto& cell : data.cells) {
        std::stable_sort(cell.dts.begin(), cell.dts.end(),
                         [](const Detection* a, const Detection* b) { return a->score > b->score; });
        if (cell.dts.size() > max_dets) cell.dts.resize(max_dets);
        cell.iou.assign(cell.dts.size(), std::vector<double>(cell.gts.size(), 0.0));
        for (std::size_t d = 0; d < cell.dts.size(); ++d)
            for (std::size_t g = 0; g < cell.gts.size(); ++g)
                cell.iou[d][g] = iou(cell.dts[d]->bbox, cell.gts[g]->bbox);

        data.offsets.push_back(data.scores.size());
        for (const Detection* d : cell.dts) data.scores.push_back(d->score);
    }

    data.order.resize(data.scores.size());
    std::iota(data.order.begin(), data.order.end(), std::size_t{0});
    std::stable_sort(data.order.begin(), data.order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[a] > data.scores[b];
    });
    return data;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<Detection> apply_score_threshold(const std::vector<Detection>& preds,
                                             const EvalConfig& cfg) {
    if (!cfg.score_threshold) return preds;
    std::vector<Detection> kept;
    for (const auto& p : preds)
        if (p.score >= *cfg.score_threshold) kept.push_back(p);
    return kept;
}

}  // namespace

void EvalConfig::check() const {
    if (iou_thresholds.empty()) throw ConfigError("eval: iou_thresholds must be non-empty");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
        if (iou_thresholds[i] <= 0.0 || iou_thresholds[i] > 1.0)
            throw ConfigError("eval: iou thresholds must lie in (0,1]");
        if (i > 0 && iou_thresholds[i] <= iou_thresholds[i - 1])
            throw ConfigError("eval: iou thresholds must be strictly increasing");
    }
    if (recall_points < 2) throw ConfigError("eval: recall_points must be >= 2");
}

EvalResult evaluate(const std::vector<Detection>& preds_in, const DetectionDataset& ds,
                    const EvalConfig& cfg) {
    cfg.check();
    check_predictions(preds_in, ds);
    const std::vector<Detection> preds = apply_score_threshold(preds_in, cfg);

    const auto image_ids = sorted_image_ids(ds);
    const double strata[4][2] = {{0.0, kInfArea},
                                 {0.0, cfg.small_area_max},
                                 {cfg.small_area_max, cfg.medium_area_max},
                                 {cfg.medium_area_max, kInfArea}};

    // Per-category cells are independent; compute them in parallel and fold
    // sequentially in category order so results never depend on scheduling.
    struct CategoryEval {
        std::vector<CellOutcome> by_stratum[4];  // indexed by threshold
    };
    const std::size_t n_cats = ds.categories.size();
    std::vector<CategoryEval> cat_eval(n_cats);
    parallel_for(n_cats, std::thread::hardware_concurrency(), [&](std::size_t ci) {
        const CategoryData data =
            build_category(preds, ds, image_ids, ds.categories.at(ci).id, cfg.max_detections);
        for (int s = 0; s < 4; ++s)
            for (double t : cfg.iou_thresholds)
                cat_eval[ci].by_stratum[s].push_back(
                    accumulate(data, t, strata[s][0], strata[s][1], cfg.recall_points));
    });

    EvalResult result;
    std::vector<double> all_ap, ap50, ap75, small_ap, medium_ap, large_ap, recalls;
    for (std::size_t ci = 0; ci < n_cats; ++ci) {
        std::vector<double> cat_aps;
        for (std::size_t ti = 0; ti < cfg.iou_thresholds.size(); ++ti) {
            const double t = cfg.iou_thresholds[ti];
            const CellOutcome& all = cat_eval[ci].by_stratum[0][ti];
            if (all.defined) {
                all_ap.push_back(all.ap);
                cat_aps.push_back(all.ap);
                recalls.push_back(all.final_recall);
                if (std::abs(t - 0.50) < 1e-12) {
                    ap50.push_back(all.ap);
                    result.counts.matched_detections += all.tp;
                    result.counts.unmatched_detections += all.fp;
                    result.counts.matched_gts += all.tp;
                    result.counts.missed_gts += all.npig - all.tp;
                }
                if (std::abs(t - 0.75) < 1e-12) ap75.push_back(all.ap);
            }
            if (cat_eval[ci].by_stratum[1][ti].defined)
                small_ap.push_back(cat_eval[ci].by_stratum[1][ti].ap);
            if (cat_eval[ci].by_stratum[2][ti].defined)
                medium_ap.push_back(cat_eval[ci].by_stratum[2][ti].ap);
            if (cat_eval[ci].by_stratum[3][ti].defined)
                large_ap.push_back(cat_eval[ci].by_stratum[3][ti].ap);
        }
        result.per_category[ds.categories.at(ci).id] = mean_of(cat_aps);
    }

    result.ap = mean_of(all_ap);
    result.ap50 = mean_of(ap50);
    result.ap75 = mean_of(ap75);
    result.ap_small = mean_of(small_ap);
    result.ap_medium = mean_of(medium_ap);
    result.ap_large = mean_of(large_ap);
    result.ar_at_100 = mean_of(recalls);
    return result;
}

PRCurve pr_curve(const std::vector<Detection>& preds_in, const DetectionDataset& ds,
                 CategoryId category, double iou_threshold, const EvalConfig& cfg) {
    cfg.check();
    check_predictions(preds_in, ds);
    if (!ds.categories.contains(category))
        throw ValidationError("pr_curve: unknown category " + std::to_string(category));
    const std::vector<Detection> preds = apply_score_threshold(preds_in, cfg);

    PRCurve curve;
    curve.category_id = category;
    curve.iou_threshold = iou_threshold;

    const CategoryData data =
        build_category(preds, ds, sorted_image_ids(ds), category, cfg.max_detections);
    const auto outcome =
        accumulate(data, iou_threshold, 0.0, kInfArea, cfg.recall_points, &curve.staircase);
    if (!outcome.defined) {
        curve.staircase.clear();
        return curve;  // no ground truth: undefined sentinel
    }
    curve.defined = true;

    // Envelope + sampling for the interpolated view.
    std::vector<double> recalls, precisions;
    for (const auto& [r, p] : curve.staircase) {
        recalls.push_back(r);
        precisions.push_back(p);
    }
    for (std::size_t i = precisions.size(); i > 1; --i)
        precisions[i - 2] = std::max(precisions[i - 2], precisions[i - 1]);
    for (std::size_t r = 0; r < cfg.recall_points; ++r) {
        const double target = static_cast<double>(r) / static_cast<double>(cfg.recall_points - 1);
        const auto it = std::lower_bound(recalls.begin(), recalls.end(), target);
        const double q =
            it != recalls.end() ? precisions[static_cast<std::size_t>(it - recalls.begin())] : 0.0;
        curve.interpolated.emplace_back(target, q);
    }
    return curve;
}

CorrectnessFlags correctness_flags(const std::vector<Detection>& preds,
                                   const DetectionDataset& ds) {
    check_predictions(preds, ds);
    constexpr double kIouRule = 0.5;  // correct iff IoU strictly above 0.5 and label equal

    CorrectnessFlags flags;
    flags.per_detection.assign(preds.size(), DetectionFlag::kWrongBox);
    flags.per_gt.assign(ds.annotations.size(), GtFlag::kMissed);

    std::map<ImageId, std::vector<std::size_t>> gt_by_image;
    for (std::size_t g = 0; g < ds.annotations.size(); ++g) {
        if (ds.annotations[g].iscrowd) {
            flags.per_gt[g] = GtFlag::kIgnoredCrowd;
            continue;
        }
        gt_by_image[ds.annotations[g].image_id].push_back(g);
    }

    std::map<std::pair<ImageId, CategoryId>, std::vector<std::size_t>> dt_groups;
    for (std::size_t d = 0; d < preds.size(); ++d)
        dt_groups[{preds[d].image_id, preds[d].category_id}].push_back(d);

    std::vector<bool> gt_taken(ds.annotations.size(), false);
    for (auto& [key, group] : dt_groups) {
        std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) {
            return preds[a].score > preds[b].score;
        });
        const auto git = gt_by_image.find(key.first);
        if (git == gt_by_image.end()) continue;
        for (std::size_t d : group) {
            std::size_t best = kNone;
            double best_iou = kIouRule;
            for (std::size_t g : git->second) {
                if (gt_taken[g] || ds.annotations[g].category_id != key.second) continue;
                const double v = iou(preds[d].bbox, ds.annotations[g].bbox);
                if (v > best_iou) {
                    best_iou = v;
                    best = g;
                }
            }
            if (best != kNone) {
                gt_taken[best] = true;
                flags.per_detection[d] = DetectionFlag::kCorrect;
                flags.per_gt[best] = GtFlag::kFound;
            }
        }
    }

    // Unmatched detections overlapping a GT of another category are label
    // errors rather than localization errors.
    for (std::size_t d = 0; d < preds.size(); ++d) {
        if (flags.per_detection[d] == DetectionFlag::kCorrect) continue;
        const auto git = gt_by_image.find(preds[d].image_id);
        if (git == gt_by_image.end()) continue;
        for (std::size_t g : git->second) {
            if (ds.annotations[g].category_id == preds[d].category_id) continue;
            if (iou(preds[d].bbox, ds.annotations[g].bbox) > kIouRule) {
                flags.per_detection[d] = DetectionFlag::kWrongLabel;
                break;
            }
        }
    }

    for (auto f : flags.per_detection) {
        if (f == DetectionFlag::kCorrect) ++flags.correct;
        else if (f == DetectionFlag::kWrongBox) ++flags.wrong_box;
        else ++flags.wrong_label;
    }
    for (auto f : flags.per_gt)
        if (f == GtFlag::kMissed) ++flags.missed;
    return flags;
}

std::vector<Detection> postprocess_for_visualization(const std::vector<Detection>& preds) {
    std::map<ImageId, std::vector<Detection>> by_image;
    for (const auto& p : preds)
        if (p.score >= 0.5) by_image[p.image_id].push_back(p);

    std::vector<Detection> out;
    for (auto& [id, dets] : by_image) {
        auto kept = nms(dets, 0.5, /*class_wise=*/true);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

}  // namespace detkit
