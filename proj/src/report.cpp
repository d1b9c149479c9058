#include "detkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string fixed(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string metric(const std::optional<double>& v) { return v ? fixed(*v) : "undefined"; }

}  // namespace

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_stats_csv(const std::filesystem::path& path, const BoxDistributionStats& stats) {
    auto out = open_out(path);
    out << "# total_images=" << stats.total_images << '\n';
    out << "# total_boxes=" << stats.total_boxes << '\n';
    out << "# mean_boxes_per_image=" << fixed(stats.mean_boxes_per_image) << '\n';
    out << "bucket,count\n";
    for (const auto& [bucket, count] : stats.histogram) out << bucket << ',' << count << '\n';
}

void write_histogram_pair_csv(const std::filesystem::path& path, const HistogramSeries& a,
                              const HistogramSeries& b,
                              const std::vector<std::pair<std::string, std::string>>& header_kv) {
    auto out = open_out(path);
    for (const auto& [key, value] : header_kv) out << "# " << key << '=' << value << '\n';
    out << "bucket," << a.label << "_count," << b.label << "_count\n";

    std::map<std::size_t, std::pair<std::size_t, std::size_t>> rows;
    for (const auto& [bucket, count] : a.histogram) rows[bucket].first = count;
    for (const auto& [bucket, count] : b.histogram) rows[bucket].second = count;
    for (const auto& [bucket, counts] : rows)
        out << bucket << ',' << counts.first << ',' << counts.second << '\n';
}

void write_shift_csv(const std::filesystem::path& path, const ShiftReport& report) {
    write_histogram_pair_csv(
        path, {"before", report.before.histogram}, {"after", report.after.histogram},
        {{"before_mean", fixed(report.before.mean_boxes_per_image)},
         {"after_mean", fixed(report.after.mean_boxes_per_image)},
         {"mean_delta", fixed(report.mean_delta)}});
}

void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<HistogramSeries>& series) {
    static const char* kColors[] = {"#4c78a8", "#f58518", "#54a24b"};

    std::size_t max_bucket = 0;
    std::size_t max_count = 1;
    for (const auto& s : series) {
        for (const auto& [bucket, count] : s.histogram) {
            max_bucket = std::max(max_bucket, bucket);
            max_count = std::max(max_count, count);
        }
    }

    const double width = 720.0, height = 440.0;
    const double left = 60.0, right = 20.0, top = 50.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const std::size_t n_buckets = max_bucket + 1;
    const double slot_w = plot_w / static_cast<double>(n_buckets);
    const double bar_w = slot_w / static_cast<double>(series.size() + 1);

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << title << "</text>\n";

    // axes
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kColors[si % 3];
        for (const auto& [bucket, count] : series[si].histogram) {
            if (count == 0) continue;
            const double h = plot_h * static_cast<double>(count) / static_cast<double>(max_count);
            const double x = left + slot_w * static_cast<double>(bucket) +
                             bar_w * static_cast<double>(si);
            out << "<rect x=\"" << fixed(x, 2) << "\" y=\"" << fixed(top + plot_h - h, 2)
                << "\" width=\"" << fixed(bar_w, 2) << "\" height=\"" << fixed(h, 2)
                << "\" fill=\"" << color << "\"/>\n";
        }
        // legend
        const double ly = top - 18.0 + 0.0;
        const double lx = left + 140.0 * static_cast<double>(si);
        out << "<rect x=\"" << lx << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\""
            << color << "\"/>\n";
        out << "<text x=\"" << lx + 18 << "\" y=\"" << ly << "\" font-family=\"sans-serif\" "
               "font-size=\"12\">"
            << series[si].label << "</text>\n";
    }

    // x tick labels: every ceil(n/16) buckets
    const std::size_t step = std::max<std::size_t>(1, n_buckets / 16);
    for (std::size_t b = 0; b < n_buckets; b += step) {
        const double x = left + slot_w * (static_cast<double>(b) + 0.5);
        out << "<text x=\"" << fixed(x, 2) << "\" y=\"" << top + plot_h + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << b
            << "</text>\n";
    }
    // y tick labels: 0, max/2, max
    for (int i = 0; i <= 2; ++i) {
        const double frac = static_cast<double>(i) / 2.0;
        const double y = top + plot_h * (1.0 - frac);
        out << "<text x=\"" << left - 8 << "\" y=\"" << fixed(y + 4, 2)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << static_cast<std::size_t>(frac * static_cast<double>(max_count)) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
           "boxes per image</text>\n";
    out << "</svg>\n";
}

void write_metrics_text(std::ostream& out, const EvalResult& result) {
    out << "AP        " << metric(result.ap) << '\n';
    out << "AP50      " << metric(result.ap50) << '\n';
    out << "AP75      " << metric(result.ap75) << '\n';
    out << "APsmall   " << metric(result.ap_small) << '\n';
    out << "APmedium  " << metric(result.ap_medium) << '\n';
    out << "APlarge   " << metric(result.ap_large) << '\n';
    out << "AR@100    " << metric(result.ar_at_100) << '\n';
    out << "matched_detections    " << result.counts.matched_detections << '\n';
    out << "unmatched_detections  " << result.counts.unmatched_detections << '\n';
    out << "matched_gts           " << result.counts.matched_gts << '\n';
    out << "missed_gts            " << result.counts.missed_gts << '\n';
}

void write_metrics_text(const std::filesystem::path& path, const EvalResult& result) {
    auto out = open_out(path);
    write_metrics_text(out, result);
}

void write_per_category_csv(const std::filesystem::path& path, const EvalResult& result,
                            const CategorySet& categories) {
    auto out = open_out(path);
    out << "category_id,category,ap\n";
    for (const auto& cat : categories) {
        const auto it = result.per_category.find(cat.id);
        const std::string value =
            it == result.per_category.end() ? "undefined" : metric(it->second);
        out << cat.id << ',' << csv_escape(cat.name) << ',' << value << '\n';
    }
}

void write_pr_csv(const std::filesystem::path& path, const std::vector<PRCurve>& curves,
                  const CategorySet& categories) {
    auto out = open_out(path);
    out << "category_id,category,iou_threshold,recall,precision\n";
    for (const auto& curve : curves) {
        if (!curve.defined) continue;
        const std::string* name = categories.name_of(curve.category_id);
        for (const auto& [recall, precision] : curve.interpolated)
            out << curve.category_id << ',' << csv_escape(name ? *name : "?") << ','
                << fixed(curve.iou_threshold, 2) << ',' << fixed(recall) << ','
                << fixed(precision) << '\n';
    }
}

}  // namespace detkit
