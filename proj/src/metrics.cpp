#include "wbsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wbsr/error.hpp"

namespace wbsr {

double iou(const TimeFreqBox& a, const TimeFreqBox& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) throw Error(ErrorKind::parameter, "iou: zero-area box");
  const double dt = std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start);
  const double df = std::min(a.f_high, b.f_high) - std::max(a.f_low, b.f_low);
  if (dt <= 0.0 || df <= 0.0) return 0.0;
  const double inter = dt * df;
  return inter / (a.area() + b.area() - inter);
}

MatchResult match(std::span<const Detection> dets, std::span<const Truth> truths, double iou_threshold, bool class_aware) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw Error(ErrorKind::parameter, "match: threshold must be in (0, 1]");
  std::vector<MatchPair> candidates;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (class_aware && (!dets[d].label || *dets[d].label != truths[t].label)) continue;
      const double v = iou(dets[d].box, truths[t].box);
      if (v >= iou_threshold) candidates.push_back({d, t, v});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const MatchPair& a, const MatchPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    const double sa = dets[a.detection].score;
    const double sb = dets[b.detection].score;
    if (sa != sb) return sa > sb;
    if (a.detection != b.detection) return a.detection < b.detection;
    return a.truth < b.truth;
  });

  MatchResult out;
  out.iou_threshold = iou_threshold;
  std::vector<bool> det_used(dets.size(), false);
  std::vector<bool> truth_used(truths.size(), false);
  for (const auto& c : candidates) {
    if (det_used[c.detection] || truth_used[c.truth]) continue;
    det_used[c.detection] = true;
    truth_used[c.truth] = true;
    out.pairs.push_back(c);
  }
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (!det_used[d]) out.unmatched_detections.push_back(d);
  }
  for (std::size_t t = 0; t < truths.size(); ++t) {
    if (!truth_used[t]) out.unmatched_truths.push_back(t);
  }
  return out;
}

ScoreRow finish_row(ScoreRow row) noexcept {
  row.precision = row.tp + row.fp == 0 ? 1.0 : static_cast<double>(row.tp) / static_cast<double>(row.tp + row.fp);
  row.recall = row.tp + row.fn == 0 ? 1.0 : static_cast<double>(row.tp) / static_cast<double>(row.tp + row.fn);
  const double sum = row.precision + row.recall;
  row.f1 = sum == 0.0 ? 0.0 : 2.0 * row.precision * row.recall / sum;
  return row;
}

ScoreRow score(const MatchResult& result) {
  ScoreRow row;
  row.iou_threshold = result.iou_threshold;
  row.tp = result.pairs.size();
  row.fp = result.unmatched_detections.size();
  row.fn = result.unmatched_truths.size();
  return finish_row(row);
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out.push_back(0.5 + 0.05 * i);
  return out;
}

void finalize_report(ScoreReport& report) {
  report.mean_precision = report.mean_recall = report.mean_f1 = 0.0;
  if (report.rows.empty()) return;
  for (const auto& r : report.rows) {
    report.mean_precision += r.precision;
    report.mean_recall += r.recall;
    report.mean_f1 += r.f1;
  }
  const auto n = static_cast<double>(report.rows.size());
  report.mean_precision /= n;
  report.mean_recall /= n;
  report.mean_f1 /= n;
}

ScoreReport sweep_score(std::span<const Detection> dets, std::span<const Truth> truths, std::span<const double> thresholds,
                        bool class_aware) {
  ScoreReport report;
  report.class_aware = class_aware;
  for (double t : thresholds) report.rows.push_back(score(match(dets, truths, t, class_aware)));
  finalize_report(report);
  return report;
}

nlohmann::ordered_json report_to_json(const ScoreReport& report) {
  nlohmann::ordered_json j;
  j["class_aware"] = report.class_aware;
  j["mean"] = {{"precision", report.mean_precision}, {"recall", report.mean_recall}, {"f1", report.mean_f1}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["snr_db"] = r.snr_db ? nlohmann::ordered_json(*r.snr_db) : nlohmann::ordered_json(nullptr);
    row["iou_threshold"] = r.iou_threshold;
    row["precision"] = r.precision;
    row["recall"] = r.recall;
    row["f1"] = r.f1;
    row["tp"] = r.tp;
    row["fp"] = r.fp;
    row["fn"] = r.fn;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string report_to_csv(const ScoreReport& report) {
  std::ostringstream out;
  out.precision(10);
  out << kScoreCsvHeader << '\n';
  for (const auto& r : report.rows) {
    if (r.snr_db) out << *r.snr_db;
    out << ',' << r.iou_threshold << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.tp << ','
        << r.fp << ',' << r.fn << '\n';
  }
  return out.str();
}

}  // namespace wbsr
