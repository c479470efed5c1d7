#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/box.hpp"
#include "wbsr/detectors.hpp"

namespace wbsr {

/// Ground-truth object: box plus its class label.
struct Truth {
  TimeFreqBox box;
  std::string label;
};

/// Intersection over union in samples x normalized-frequency units.
/// Throws ErrorKind::parameter on a zero-area box.
double iou(const TimeFreqBox& a, const TimeFreqBox& b);

struct MatchPair {
  std::size_t detection = 0;
  std::size_t truth = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_truths;
  double iou_threshold = 0.5;
};

/// Greedy one-to-one matching: candidates with IoU >= threshold (and equal
/// labels when class_aware) are taken by IoU descending, then detection
/// score descending, then detection index, then truth index.
MatchResult match(std::span<const Detection> dets, std::span<const Truth> truths, double iou_threshold,
                  bool class_aware = false);

struct ScoreRow {
  double iou_threshold = 0.5;
  std::optional<double> snr_db;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  bool class_aware = false;
};

/// Fills precision/recall/f1 from tp/fp/fn. precision is 1 when nothing
/// was detected; f1 is 0 when precision and recall are both 0. Recall of
/// an empty truth set is 1.
ScoreRow finish_row(ScoreRow row) noexcept;

ScoreRow score(const MatchResult& result);

/// COCO-style thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> default_iou_thresholds();

ScoreReport sweep_score(std::span<const Detection> dets, std::span<const Truth> truths,
                        std::span<const double> thresholds, bool class_aware = false);

/// Recomputes the means over rows.
void finalize_report(ScoreReport& report);

inline constexpr const char* kScoreCsvHeader = "snr_db,iou_threshold,precision,recall,f1,tp,fp,fn";

nlohmann::ordered_json report_to_json(const ScoreReport& report);
std::string report_to_csv(const ScoreReport& report);

}  // namespace wbsr
