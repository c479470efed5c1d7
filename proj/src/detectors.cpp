#include "wbsr/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "wbsr/error.hpp"

namespace wbsr {

using nlohmann::ordered_json;

void validate_config(const DetectorConfig& c) {
  if (std::isnan(c.threshold)) throw Error(ErrorKind::parameter, "detector: threshold must not be NaN");
  if (c.connectivity != 4 && c.connectivity != 8) throw Error(ErrorKind::parameter, "detector: connectivity must be 4 or 8");
  if (c.min_cluster_cells < 1) throw Error(ErrorKind::parameter, "detector: min_cluster_cells must be >= 1");
  if (c.density_min_points < 1) throw Error(ErrorKind::parameter, "detector: density_min_points must be >= 1");
}

DetectorConfig config_from_json(const ordered_json& doc) {
  DetectorConfig c;
  try {
    const std::string mode = doc.value("threshold_mode", "noise_relative");
    if (mode == "noise_relative") {
      c.threshold_mode = ThresholdMode::noise_relative;
    } else if (mode == "absolute") {
      c.threshold_mode = ThresholdMode::absolute;
    } else {
      throw Error(ErrorKind::parameter, "detector: unknown threshold_mode '" + mode + "'");
    }
    c.threshold = doc.value("threshold", c.threshold);
    c.connectivity = doc.value("connectivity", c.connectivity);
    c.min_cluster_cells = doc.value("min_cluster_cells", c.min_cluster_cells);
    c.merge_contained = doc.value("merge_contained", c.merge_contained);
    const std::string cluster = doc.value("cluster_mode", "connected_components");
    if (cluster == "connected_components") {
      c.cluster_mode = ClusterMode::connected_components;
    } else if (cluster == "density") {
      c.cluster_mode = ClusterMode::density;
    } else {
      throw Error(ErrorKind::parameter, "detector: unknown cluster_mode '" + cluster + "'");
    }
    c.density_min_points = doc.value("density_min_points", c.density_min_points);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parameter, std::string("detector config: ") + e.what());
  }
  validate_config(c);
  return c;
}

ordered_json config_to_json(const DetectorConfig& c) {
  ordered_json j;
  j["threshold_mode"] = c.threshold_mode == ThresholdMode::noise_relative ? "noise_relative" : "absolute";
  j["threshold"] = c.threshold;
  j["connectivity"] = c.connectivity;
  j["min_cluster_cells"] = c.min_cluster_cells;
  j["merge_contained"] = c.merge_contained;
  j["cluster_mode"] = c.cluster_mode == ClusterMode::density ? "density" : "connected_components";
  j["density_min_points"] = c.density_min_points;
  return j;
}

DetectorConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open detector config " + path.string());
  try {
    return config_from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parameter, path.string() + ": " + e.what());
  }
}

double estimate_noise_floor(const SpectralGrid& grid) {
  if (grid.values.empty()) throw Error(ErrorKind::empty_input, "estimate_noise_floor: empty grid");
  std::vector<double> v = grid.values;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double db_to_grid_units(double db, const SpectralGrid& grid) noexcept {
  // 10*log10|X|^2 = (20 / ln 10) * ln|X|
  return db * std::log(10.0) / 20.0 / grid.std;
}

BinaryMask threshold_mask(const SpectralGrid& grid, const DetectorConfig& config) {
  validate_config(config);
  BinaryMask mask(grid.geometry);
  double level = config.threshold;
  if (config.threshold_mode == ThresholdMode::noise_relative && std::isfinite(config.threshold)) {
    level = estimate_noise_floor(grid) + db_to_grid_units(config.threshold, grid);
  }
  for (std::size_t i = 0; i < grid.values.size(); ++i) mask.cells[i] = grid.values[i] > level ? 1 : 0;
  return mask;
}

std::vector<Cluster> connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw Error(ErrorKind::parameter, "connected_components: connectivity must be 4 or 8");
  const auto frames = static_cast<std::ptrdiff_t>(mask.geometry.frames);
  const auto bins = static_cast<std::ptrdiff_t>(mask.geometry.bins);
  std::vector<std::uint8_t> seen(mask.cells.size(), 0);
  std::vector<Cluster> clusters;
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> stack;

  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    for (std::ptrdiff_t b = 0; b < bins; ++b) {
      const auto idx = static_cast<std::size_t>(f * bins + b);
      if (!mask.cells[idx] || seen[idx]) continue;
      Cluster cluster;
      seen[idx] = 1;
      stack.assign(1, {f, b});
      while (!stack.empty()) {
        const auto [cf, cb] = stack.back();
        stack.pop_back();
        cluster.emplace_back(static_cast<std::size_t>(cf), static_cast<std::size_t>(cb));
        for (std::ptrdiff_t df = -1; df <= 1; ++df) {
          for (std::ptrdiff_t db = -1; db <= 1; ++db) {
            if (df == 0 && db == 0) continue;
            if (connectivity == 4 && df != 0 && db != 0) continue;
            const std::ptrdiff_t nf = cf + df;
            const std::ptrdiff_t nb = cb + db;
            if (nf < 0 || nf >= frames || nb < 0 || nb >= bins) continue;
            const auto nidx = static_cast<std::size_t>(nf * bins + nb);
            if (mask.cells[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.emplace_back(nf, nb);
            }
          }
        }
      }
      std::sort(cluster.begin(), cluster.end());
      clusters.push_back(std::move(cluster));
    }
  }
  return clusters;
}

std::vector<Cluster> density_clusters(const BinaryMask& mask, int min_points) {
  const auto frames = static_cast<std::ptrdiff_t>(mask.geometry.frames);
  const auto bins = static_cast<std::ptrdiff_t>(mask.geometry.bins);
  auto set_at = [&](std::ptrdiff_t f, std::ptrdiff_t b) {
    return f >= 0 && f < frames && b >= 0 && b < bins && mask.cells[static_cast<std::size_t>(f * bins + b)];
  };
  BinaryMask core(mask.geometry);
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    for (std::ptrdiff_t b = 0; b < bins; ++b) {
      if (!set_at(f, b)) continue;
      int n = 0;
      for (std::ptrdiff_t df = -1; df <= 1; ++df) {
        for (std::ptrdiff_t db = -1; db <= 1; ++db) n += set_at(f + df, b + db) ? 1 : 0;
      }
      if (n >= min_points) core.set(static_cast<std::size_t>(f), static_cast<std::size_t>(b));
    }
  }
  std::vector<Cluster> clusters = connected_components(core, 8);

  // Border cells join the first cluster (in cluster order) with an adjacent core.
  std::vector<std::ptrdiff_t> owner(mask.cells.size(), -1);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (const auto& [f, b] : clusters[c]) owner[f * mask.geometry.bins + b] = static_cast<std::ptrdiff_t>(c);
  }
  for (std::ptrdiff_t f = 0; f < frames; ++f) {
    for (std::ptrdiff_t b = 0; b < bins; ++b) {
      const auto idx = static_cast<std::size_t>(f * bins + b);
      if (!mask.cells[idx] || core.cells[idx]) continue;
      std::ptrdiff_t best = -1;
      for (std::ptrdiff_t df = -1; df <= 1; ++df) {
        for (std::ptrdiff_t db = -1; db <= 1; ++db) {
          const std::ptrdiff_t nf = f + df;
          const std::ptrdiff_t nb = b + db;
          if (nf < 0 || nf >= frames || nb < 0 || nb >= bins) continue;
          const auto o = owner[static_cast<std::size_t>(nf * bins + nb)];
          if (o >= 0 && core.cells[static_cast<std::size_t>(nf * bins + nb)] && (best < 0 || o < best)) best = o;
        }
      }
      if (best >= 0) clusters[static_cast<std::size_t>(best)].emplace_back(static_cast<std::size_t>(f), static_cast<std::size_t>(b));
    }
  }
  for (auto& c : clusters) std::sort(c.begin(), c.end());
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.front() < b.front(); });
  return clusters;
}

std::vector<Detection> clusters_to_detections(const std::vector<Cluster>& clusters, const SpectralGrid& grid) {
  std::vector<Detection> out;
  out.reserve(clusters.size());
  for (const auto& cluster : clusters) {
    if (cluster.empty()) continue;
    std::size_t f_lo = std::numeric_limits<std::size_t>::max(), f_hi = 0;
    std::size_t b_lo = std::numeric_limits<std::size_t>::max(), b_hi = 0;
    double sum = 0.0;
    for (const auto& [f, b] : cluster) {
      f_lo = std::min(f_lo, f);
      f_hi = std::max(f_hi, f);
      b_lo = std::min(b_lo, b);
      b_hi = std::max(b_hi, b);
      sum += grid.at(f, b);
    }
    const TimeFreqBox first = cell_to_box(f_lo, b_lo, grid.geometry);
    const TimeFreqBox last = cell_to_box(f_hi, b_hi, grid.geometry);
    Detection d;
    d.box = TimeFreqBox{first.t_start, last.t_end, first.f_low, last.f_high};
    d.score = sum / static_cast<double>(cluster.size());
    d.cells = cluster.size();
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> post_filter(const std::vector<Detection>& dets, const DetectorConfig& config) {
  std::vector<Detection> sized;
  for (const auto& d : dets) {
    if (d.cells == 0 || d.cells >= config.min_cluster_cells) sized.push_back(d);
  }
  if (!config.merge_contained) return sized;
  std::vector<Detection> out;
  for (std::size_t i = 0; i < sized.size(); ++i) {
    bool inside = false;
    for (std::size_t j = 0; j < sized.size() && !inside; ++j) {
      if (i == j || !sized[j].box.contains(sized[i].box)) continue;
      // Identical boxes: keep the earliest.
      inside = !(sized[j].box == sized[i].box) || j < i;
    }
    if (!inside) out.push_back(sized[i]);
  }
  return out;
}

std::vector<Detection> detect_from_mask(const BinaryMask& mask, const SpectralGrid& grid, const DetectorConfig& config) {
  validate_config(config);
  if (!(mask.geometry == grid.geometry)) {
    throw Error(ErrorKind::geometry_mismatch, "mask geometry " + std::to_string(mask.geometry.frames) + "x" +
                                                  std::to_string(mask.geometry.bins) + " does not match grid " +
                                                  std::to_string(grid.geometry.frames) + "x" + std::to_string(grid.geometry.bins));
  }
  const auto clusters = config.cluster_mode == ClusterMode::density ? density_clusters(mask, config.density_min_points)
                                                                    : connected_components(mask, config.connectivity);
  return post_filter(clusters_to_detections(clusters, grid), config);
}

std::vector<Detection> channelized_radiometer(const ComplexBuffer& buf, std::size_t fft_size, const DetectorConfig& config) {
  const SpectralGrid grid = spectrogram(buf, fft_size);
  return detect_from_mask(threshold_mask(grid, config), grid, config);
}

ordered_json detection_to_json(const Detection& d) {
  ordered_json j;
  j["t_start"] = d.box.t_start;
  j["t_end"] = d.box.t_end;
  j["f_low"] = d.box.f_low;
  j["f_high"] = d.box.f_high;
  j["score"] = d.score;
  if (d.cells > 0) j["cells"] = d.cells;
  if (d.label) j["label"] = *d.label;
  return j;
}

Detection detection_from_json(const ordered_json& j) {
  Detection d;
  try {
    d.box = TimeFreqBox{j.at("t_start").get<double>(), j.at("t_end").get<double>(), j.at("f_low").get<double>(),
                        j.at("f_high").get<double>()};
    d.score = j.value("score", 0.0);
    d.cells = j.value("cells", std::size_t{0});
    if (j.contains("label") && !j.at("label").is_null()) d.label = j.at("label").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_metadata, std::string("bad detection record: ") + e.what());
  }
  if (!d.box.valid()) throw Error(ErrorKind::invariant, "detection with empty box: " + j.dump());
  return d;
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write detections file " + path.string());
  for (const auto& d : dets) out << detection_to_json(d).dump() << '\n';
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open detections file " + path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(detection_from_json(ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::malformed_metadata, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wbsr
