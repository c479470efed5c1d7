#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/detectors.hpp"
#include "wbsr/metrics.hpp"
#include "wbsr/modulators.hpp"
#include "wbsr/scene.hpp"

namespace wbsr::cli {

/// Worker count from WBSR_WORKERS, else hardware concurrency (>= 1).
std::size_t default_workers();

struct GenerateOptions {
  std::vector<std::filesystem::path> profiles;  // used round-robin
  std::size_t count = 1;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::size_t record_length = std::size_t{1} << 21;
  double sample_rate = 100e6;
};

struct GeneratedRecord {
  std::string name;
  std::uint64_t seed = 0;
  std::string profile;
  std::size_t bursts = 0;
};

/// Writes `count` SigMF records plus manifest.json. Record i uses profile
/// i % profiles.size() and seed Rng::derive_seed(seed, i).
std::vector<GeneratedRecord> cmd_generate(const GenerateOptions& opts);

struct DetectOptions {
  std::filesystem::path record;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> mask;
  std::filesystem::path out;
  double noise_sigma = 0.0;  // AWGN added before detection
  std::uint64_t seed = 0;
  std::size_t fft_size = 512;
};

std::vector<Detection> cmd_detect(const DetectOptions& opts);

struct ScoreOptions {
  std::filesystem::path detections;
  std::filesystem::path record;
  std::vector<double> thresholds = {0.5};
  bool class_aware = false;
  std::filesystem::path out_prefix;  // writes <prefix>.json and <prefix>.csv
};

ScoreReport cmd_score(const ScoreOptions& opts);

struct SweepSpec {
  std::vector<double> snr_points_db;
  std::size_t repeats = 5;
  double oversampling = 5.0;
  ModulationClass modulation = ModulationClass::PSK4;
  double rrc_beta = 0.35;
  std::size_t record_length = std::size_t{1} << 21;
  std::uint64_t seed = 1;
  std::vector<double> iou_thresholds = {0.5};
  std::size_t fft_size = 512;
  DetectorConfig detector;
};

void validate_sweep(const SweepSpec& spec);
SweepSpec sweep_from_json(const nlohmann::ordered_json& doc);
SweepSpec load_sweep(const std::filesystem::path& path);

/// Normalized bandwidth of a sweep burst: (1+beta)/oversampling for RRC
/// classes, 1/oversampling otherwise.
double sweep_bandwidth(const SweepSpec& spec) noexcept;

/// Sweep test scene for one repeat: the record is split into equal time
/// slots, each holding one unit-amplitude burst of the sweep modulation.
Scene sweep_scene(const SweepSpec& spec, std::size_t repeat);

/// In-band SNR: 10*log10(signal_power / (sigma^2 * bandwidth)).
double in_band_snr_db(double signal_power, double sigma, double bandwidth) noexcept;
double sigma_for_snr(double snr_db, double signal_power, double bandwidth) noexcept;

struct SweepPoint {
  double snr_db = 0.0;
  double sigma = 0.0;
};

struct SweepResult {
  ScoreReport report;  // rows sorted by (snr_db, iou_threshold)
  std::vector<SweepPoint> points;
};

SweepResult run_sweep(const SweepSpec& spec, std::size_t workers = default_workers());

/// Writes the CSV and a <out>.json sidecar with the sigma used per point.
void write_sweep(const SweepResult& result, const std::filesystem::path& out);

struct ExportGridOptions {
  std::filesystem::path record;
  std::filesystem::path out_prefix;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t fft_size = 512;
};

/// Golden files for the learned-baseline tooling: <prefix>.grid.f32
/// (row-major float32 LE normalized values), <prefix>.grid.json
/// (geometry + normalization stats) and <prefix>.truth.wbmask.
void cmd_export_grid(const ExportGridOptions& opts);

}  // namespace wbsr::cli
