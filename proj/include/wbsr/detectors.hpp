#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/box.hpp"
#include "wbsr/grid.hpp"

namespace wbsr {

struct Detection {
  TimeFreqBox box;
  double score = 0.0;  // mean normalized value over the cluster cells
  std::size_t cells = 0;  // cluster size; 0 when unknown (external input)
  std::optional<std::string> label;
};

enum class ThresholdMode { absolute, noise_relative };
enum class ClusterMode { connected_components, density };

struct DetectorConfig {
  ThresholdMode threshold_mode = ThresholdMode::noise_relative;
  /// dB over the noise floor (noise_relative) or a raw normalized value
  /// (absolute).
  double threshold = 11.0;
  int connectivity = 8;
  std::size_t min_cluster_cells = 32;
  bool merge_contained = false;
  ClusterMode cluster_mode = ClusterMode::connected_components;
  int density_min_points = 3;
};

void validate_config(const DetectorConfig& config);
DetectorConfig config_from_json(const nlohmann::ordered_json& doc);
nlohmann::ordered_json config_to_json(const DetectorConfig& config);
DetectorConfig load_config(const std::filesystem::path& path);

/// Cell coordinates (frame, bin) of one cluster in raster order.
using Cluster = std::vector<std::pair<std::size_t, std::size_t>>;

/// Median of all cells.
double estimate_noise_floor(const SpectralGrid& grid);

/// Converts a dB offset on |X|^2 into normalized log-magnitude units for
/// this grid.
double db_to_grid_units(double db, const SpectralGrid& grid) noexcept;

BinaryMask threshold_mask(const SpectralGrid& grid, const DetectorConfig& config);

/// Maximal 4- or 8-connected clusters, ordered by their first cell in
/// raster order.
std::vector<Cluster> connected_components(const BinaryMask& mask, int connectivity);

/// DBSCAN on set cells with a one-cell Chebyshev radius: cells with at
/// least `min_points` set cells in their 3x3 neighborhood (self included)
/// are cores; cores chain through 8-adjacency, non-core neighbors join as
/// border cells, the rest is dropped.
std::vector<Cluster> density_clusters(const BinaryMask& mask, int min_points);

std::vector<Detection> clusters_to_detections(const std::vector<Cluster>& clusters, const SpectralGrid& grid);

/// Drops clusters smaller than min_cluster_cells and, optionally, every
/// detection whose box lies inside another detection's box.
std::vector<Detection> post_filter(const std::vector<Detection>& dets, const DetectorConfig& config);

/// Spectrogram -> threshold -> clustering -> boxes -> post_filter.
std::vector<Detection> channelized_radiometer(const ComplexBuffer& buf, std::size_t fft_size, const DetectorConfig& config);

/// Same back half of the pipeline for an externally produced mask.
std::vector<Detection> detect_from_mask(const BinaryMask& mask, const SpectralGrid& grid, const DetectorConfig& config);

/// JSON-lines detection files.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);
nlohmann::ordered_json detection_to_json(const Detection& det);
Detection detection_from_json(const nlohmann::ordered_json& j);

}  // namespace wbsr
