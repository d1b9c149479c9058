#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "detkit/evaluator.hpp"
#include "detkit/merge.hpp"
#include "detkit/types.hpp"

namespace detkit {

std::string csv_escape(const std::string& s);

// Summary header (commented key=value lines) followed by bucket,count rows.
void write_stats_csv(const std::filesystem::path& path, const BoxDistributionStats& stats);

// Side-by-side histogram table plus a mean-delta summary header.
void write_shift_csv(const std::filesystem::path& path, const ShiftReport& report);

struct HistogramSeries {
    std::string label;
    std::map<std::size_t, std::size_t> histogram;
};

// Two histograms side by side, with arbitrary summary header lines.
void write_histogram_pair_csv(const std::filesystem::path& path, const HistogramSeries& a,
                              const HistogramSeries& b,
                              const std::vector<std::pair<std::string, std::string>>& header_kv);

// Self-contained grouped bar chart; output depends only on the data.
void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<HistogramSeries>& series);

void write_metrics_text(std::ostream& out, const EvalResult& result);
void write_metrics_text(const std::filesystem::path& path, const EvalResult& result);

void write_per_category_csv(const std::filesystem::path& path, const EvalResult& result,
                            const CategorySet& categories);

// Long-format interpolated curves: category_id,category,iou_threshold,recall,precision.
void write_pr_csv(const std::filesystem::path& path, const std::vector<PRCurve>& curves,
                  const CategorySet& categories);

}  // namespace detkit
