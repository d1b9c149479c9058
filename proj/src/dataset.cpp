#include "detkit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "detkit/errors.hpp"

namespace detkit {

using nlohmann::json;

namespace {

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

void add_warning(LoadReport* report, const std::string& msg) {
    if (!report) return;
    report->rejected_records++;
    report->warnings.push_back(msg);
}

struct RawAnnotation {
    std::int64_t id = 0;
    ImageId image_id = 0;
    CategoryId category_id = 0;
    BBox bbox;
    double area = 0.0;
    bool iscrowd = false;
    double score = 1.0;
    AnnotationOrigin origin = AnnotationOrigin::kGroundTruth;
};

struct RawDataset {
    std::vector<ImageRecord> images;
    std::vector<RawAnnotation> annotations;
    CategorySet categories;
};

BBox xywh_to_corners(const json& arr) {
    if (!arr.is_array() || arr.size() != 4)
        throw ParseError("bbox must be a [x, y, w, h] array");
    const double x = arr[0].get<double>();
    const double y = arr[1].get<double>();
    const double w = arr[2].get<double>();
    const double h = arr[3].get<double>();
    return BBox{x, y, x + w, y + h};
}

RawDataset load_raw(const std::filesystem::path& path, LoadReport* report) {
    const json doc = parse_file(path);
    if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") ||
        !doc.contains("categories"))
        throw ParseError(path.string() + ": expected object with images/annotations/categories");

    RawDataset ds;

    std::vector<Category> cats;
    for (const auto& c : doc.at("categories"))
        cats.push_back({c.at("id").get<CategoryId>(), c.at("name").get<std::string>()});
    ds.categories = CategorySet(std::move(cats));

    std::unordered_map<ImageId, const ImageRecord*> by_id;
    for (const auto& im : doc.at("images")) {
        ImageRecord rec;
        rec.id = im.at("id").get<ImageId>();
        rec.width = im.at("width").get<double>();
        rec.height = im.at("height").get<double>();
        rec.file_name = im.value("file_name", std::string{});
        if (rec.width <= 0 || rec.height <= 0)
            throw ValidationError("image " + std::to_string(rec.id) + " has non-positive size");
        ds.images.push_back(rec);
    }
    for (const auto& im : ds.images) by_id[im.id] = &im;

    std::vector<std::string> dangling;
    for (const auto& a : doc.at("annotations")) {
        RawAnnotation ann;
        ann.id = a.value("id", std::int64_t{0});
        ann.image_id = a.at("image_id").get<ImageId>();
        ann.category_id = a.at("category_id").get<CategoryId>();
        ann.iscrowd = a.value("iscrowd", 0) != 0;
        ann.score = a.value("score", 1.0);
        ann.origin = a.value("origin", std::string{"ground_truth"}) == "pseudo"
                         ? AnnotationOrigin::kPseudo
                         : AnnotationOrigin::kGroundTruth;

        auto img_it = by_id.find(ann.image_id);
        if (img_it == by_id.end()) {
            dangling.push_back("annotation " + std::to_string(ann.id) + " -> image " +
                               std::to_string(ann.image_id));
            continue;
        }
        if (!ds.categories.contains(ann.category_id)) {
            dangling.push_back("annotation " + std::to_string(ann.id) + " -> category " +
                               std::to_string(ann.category_id));
            continue;
        }

        const ImageRecord& img = *img_it->second;
        ann.bbox = xywh_to_corners(a.at("bbox")).clamped(img.width, img.height);
        if (!ann.bbox.valid()) {
            if (report) report->dropped_degenerate_boxes++;
            add_warning(report, "annotation " + std::to_string(ann.id) +
                                    ": degenerate box after clamping, dropped");
            continue;
        }
        ann.area = a.value("area", 0.0);
        if (ann.area <= 0.0) ann.area = ann.bbox.area();
        ds.annotations.push_back(std::move(ann));
    }

    if (!dangling.empty()) {
        std::ostringstream msg;
        msg << path.string() << ": " << dangling.size() << " dangling reference(s):";
        for (const auto& d : dangling) msg << " [" << d << "]";
        throw ValidationError(msg.str());
    }
    return ds;
}

template <typename Count>
BoxDistributionStats make_stats(const std::vector<Count>& per_image_counts) {
    if (per_image_counts.empty()) throw ValidationError("dataset_stats: dataset has no images");
    BoxDistributionStats stats;
    stats.total_images = per_image_counts.size();
    for (auto c : per_image_counts) {
        stats.total_boxes += c;
        stats.histogram[c]++;
    }
    stats.mean_boxes_per_image =
        static_cast<double>(stats.total_boxes) / static_cast<double>(stats.total_images);
    return stats;
}

template <typename Ann>
BoxDistributionStats stats_impl(const std::vector<ImageRecord>& images,
                                const std::vector<Ann>& annotations) {
    std::unordered_map<ImageId, std::size_t> counts;
    for (const auto& im : images) counts[im.id] = 0;
    for (const auto& a : annotations) counts[a.image_id]++;
    std::vector<std::size_t> per_image;
    per_image.reserve(images.size());
    for (const auto& im : images) per_image.push_back(counts[im.id]);
    return make_stats(per_image);
}

}  // namespace

DetectionDataset load_coco_json(const std::filesystem::path& path, LoadReport* report) {
    RawDataset raw = load_raw(path, report);
    DetectionDataset ds;
    ds.images = std::move(raw.images);
    ds.categories = std::move(raw.categories);
    ds.annotations.reserve(raw.annotations.size());
    for (const auto& a : raw.annotations)
        ds.annotations.push_back({a.id, a.image_id, a.category_id, a.bbox, a.area, a.iscrowd});
    return ds;
}

ScoredDataset load_scored_json(const std::filesystem::path& path, LoadReport* report) {
    RawDataset raw = load_raw(path, report);
    ScoredDataset ds;
    ds.images = std::move(raw.images);
    ds.categories = std::move(raw.categories);
    ds.annotations.reserve(raw.annotations.size());
    for (const auto& a : raw.annotations)
        ds.annotations.push_back(
            {a.image_id, a.category_id, a.bbox, a.area, a.iscrowd, a.score, a.origin});
    return ds;
}

void write_scored_json(const std::filesystem::path& path, const ScoredDataset& ds) {
    json doc;
    doc["images"] = json::array();
    for (const auto& im : ds.images)
        doc["images"].push_back({{"id", im.id},
                                 {"width", im.width},
                                 {"height", im.height},
                                 {"file_name", im.file_name}});
    doc["categories"] = json::array();
    for (const auto& c : ds.categories)
        doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
    doc["annotations"] = json::array();
    std::int64_t next_id = 1;
    for (const auto& a : ds.annotations) {
        doc["annotations"].push_back(
            {{"id", next_id++},
             {"image_id", a.image_id},
             {"category_id", a.category_id},
             {"bbox", {a.bbox.x1, a.bbox.y1, a.bbox.width(), a.bbox.height()}},
             {"area", a.area},
             {"iscrowd", a.iscrowd ? 1 : 0},
             {"score", a.score},
             {"origin", a.origin == AnnotationOrigin::kPseudo ? "pseudo" : "ground_truth"}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump();
}

std::vector<Detection> load_detections_json(const std::filesystem::path& path,
                                            const DetectionDataset& ds, LoadReport* report) {
    const json doc = parse_file(path);
    if (!doc.is_array()) throw ParseError(path.string() + ": expected a results array");

    std::unordered_set<ImageId> image_ids;
    for (const auto& im : ds.images) image_ids.insert(im.id);
    std::unordered_map<ImageId, const ImageRecord*> by_id;
    for (const auto& im : ds.images) by_id[im.id] = &im;

    std::vector<Detection> dets;
    std::vector<std::string> dangling;
    std::size_t index = 0;
    for (const auto& r : doc) {
        Detection d;
        d.image_id = r.at("image_id").get<ImageId>();
        d.category_id = r.at("category_id").get<CategoryId>();
        d.score = r.at("score").get<double>();

        if (!image_ids.count(d.image_id)) {
            dangling.push_back("result " + std::to_string(index) + " -> image " +
                               std::to_string(d.image_id));
            ++index;
            continue;
        }
        if (!ds.categories.contains(d.category_id)) {
            add_warning(report, "result " + std::to_string(index) + ": unknown category " +
                                    std::to_string(d.category_id) + ", dropped");
            ++index;
            continue;
        }
        if (d.score < 0.0 || d.score > 1.0) {
            add_warning(report, "result " + std::to_string(index) + ": score " +
                                    std::to_string(d.score) + " outside [0,1], rejected");
            ++index;
            continue;
        }
        const ImageRecord& img = *by_id.at(d.image_id);
        d.bbox = xywh_to_corners(r.at("bbox")).clamped(img.width, img.height);
        if (!d.bbox.valid()) {
            if (report) report->dropped_degenerate_boxes++;
            add_warning(report, "result " + std::to_string(index) + ": degenerate box, dropped");
            ++index;
            continue;
        }
        dets.push_back(std::move(d));
        ++index;
    }

    if (!dangling.empty()) {
        std::ostringstream msg;
        msg << path.string() << ": " << dangling.size() << " dangling reference(s):";
        for (const auto& d : dangling) msg << " [" << d << "]";
        throw ValidationError(msg.str());
    }
    return dets;
}

void write_detections_json(const std::filesystem::path& path,
                           const std::vector<Detection>& dets) {
    json doc = json::array();
    for (const auto& d : dets)
        doc.push_back({{"image_id", d.image_id},
                       {"category_id", d.category_id},
                       {"bbox", {d.bbox.x1, d.bbox.y1, d.bbox.width(), d.bbox.height()}},
                       {"score", d.score}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump();
}

BoxDistributionStats dataset_stats(const DetectionDataset& ds) {
    return stats_impl(ds.images, ds.annotations);
}

BoxDistributionStats dataset_stats(const ScoredDataset& ds) {
    return stats_impl(ds.images, ds.annotations);
}

BoxDistributionStats prediction_stats(const std::vector<ImageRecord>& images,
                                      const std::vector<Detection>& preds) {
    return stats_impl(images, preds);
}

ValidationReport validate(const DetectionDataset& ds) {
    ValidationReport report;
    using Kind = ValidationIssue::Kind;

    std::unordered_set<ImageId> image_ids;
    for (const auto& im : ds.images) {
        if (!image_ids.insert(im.id).second)
            report.issues.push_back({Kind::kDuplicateImageId,
                                     "duplicate image id " + std::to_string(im.id)});
    }

    std::set<std::string> names;
    std::set<CategoryId> cat_ids;
    for (const auto& c : ds.categories) {
        if (!cat_ids.insert(c.id).second)
            report.issues.push_back(
                {Kind::kDuplicateCategory, "duplicate category id " + std::to_string(c.id)});
        if (!names.insert(c.name).second)
            report.issues.push_back({Kind::kDuplicateCategory, "duplicate category name " + c.name});
    }

    for (const auto& a : ds.annotations) {
        const std::string who = "annotation " + std::to_string(a.id);
        if (!image_ids.count(a.image_id))
            report.issues.push_back(
                {Kind::kDanglingImage, who + " references missing image " +
                                           std::to_string(a.image_id)});
        if (!ds.categories.contains(a.category_id))
            report.issues.push_back(
                {Kind::kDanglingCategory, who + " references missing category " +
                                              std::to_string(a.category_id)});
        if (!a.bbox.valid())
            report.issues.push_back({Kind::kDegenerateBox, who + " has a degenerate box"});
        if (a.area <= 0.0)
            report.issues.push_back({Kind::kNonPositiveArea, who + " has non-positive area"});
    }
    return report;
}

}  // namespace detkit
