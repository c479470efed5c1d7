#include "wbsr/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "wbsr/error.hpp"
#include "wbsr/grid.hpp"
#include "wbsr/sigmf.hpp"

namespace wbsr::cli {

using nlohmann::ordered_json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
  std::filesystem::path out = p;
  out += suffix;
  return out;
}

// Runs task(i) for i in [0, n) on up to `workers` threads.
template <typename Task>
void parallel_for(std::size_t n, std::size_t workers, Task&& task) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ComplexBuffer maybe_add_noise(ComplexBuffer samples, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return samples;
  Rng rng(seed);
  return add_awgn(samples, sigma, rng);
}

}  // namespace

std::size_t default_workers() {
  if (const char* env = std::getenv("WBSR_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<GeneratedRecord> cmd_generate(const GenerateOptions& opts) {
  if (opts.profiles.empty()) throw Error(ErrorKind::parameter, "generate: at least one profile is required");
  std::vector<BandLayoutProfile> profiles;
  for (const auto& p : opts.profiles) profiles.push_back(load_profile(p));

  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec || !std::filesystem::is_directory(opts.out_dir)) {
    throw Error(ErrorKind::io, "generate: cannot create output directory " + opts.out_dir.string());
  }

  std::vector<GeneratedRecord> records(opts.count);
  for (std::size_t i = 0; i < opts.count; ++i) {
    const auto& profile = profiles[i % profiles.size()];
    std::ostringstream name;
    name << "record_" << std::setw(4) << std::setfill('0') << i;
    GeneratedRecord& rec = records[i];
    rec.name = name.str();
    rec.seed = Rng::derive_seed(opts.seed, i);
    rec.profile = profile.name;
    const Scene scene = generate_scene(profile, opts.record_length, rec.seed);
    rec.bursts = scene.bursts.size();
    sigmf::write_record(scene, opts.sample_rate, opts.out_dir / rec.name);
  }

  ordered_json manifest;
  manifest["seed"] = opts.seed;
  manifest["record_length"] = opts.record_length;
  manifest["sample_rate"] = opts.sample_rate;
  auto list = ordered_json::array();
  for (const auto& r : records) {
    list.push_back({{"name", r.name}, {"seed", r.seed}, {"profile", r.profile}, {"bursts", r.bursts}});
  }
  manifest["records"] = std::move(list);
  write_text(opts.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return records;
}

std::vector<Detection> cmd_detect(const DetectOptions& opts) {
  const DetectorConfig config = opts.config ? load_config(*opts.config) : DetectorConfig{};
  const sigmf::ReadResult rec = sigmf::read_record(opts.record);
  const ComplexBuffer samples = maybe_add_noise(rec.samples, opts.noise_sigma, opts.seed);
  const SpectralGrid grid = spectrogram(samples, opts.fft_size);

  std::vector<Detection> dets;
  if (opts.mask) {
    const MaskFile mf = read_mask_file(*opts.mask);
    if (!(mf.mask.geometry == grid.geometry)) {
      throw Error(ErrorKind::geometry_mismatch,
                  "detect: mask " + opts.mask->string() + " is " + std::to_string(mf.mask.geometry.frames) + "x" +
                      std::to_string(mf.mask.geometry.bins) + " (fft " + std::to_string(mf.mask.geometry.fft_size) +
                      ") but the record grid is " + std::to_string(grid.geometry.frames) + "x" +
                      std::to_string(grid.geometry.bins) + " (fft " + std::to_string(grid.geometry.fft_size) + ")");
    }
    dets = detect_from_mask(mf.mask, grid, config);
  } else {
    dets = detect_from_mask(threshold_mask(grid, config), grid, config);
  }
  write_detections(opts.out, dets);
  return dets;
}

ScoreReport cmd_score(const ScoreOptions& opts) {
  const std::vector<Detection> dets = read_detections(opts.detections);
  const sigmf::ReadResult rec = sigmf::read_record(opts.record);
  const ScoreReport report = sweep_score(dets, rec.truths, opts.thresholds, opts.class_aware);
  write_text(with_suffix(opts.out_prefix, ".json"), report_to_json(report).dump(2) + "\n");
  write_text(with_suffix(opts.out_prefix, ".csv"), report_to_csv(report));
  return report;
}

void validate_sweep(const SweepSpec& s) {
  if (s.snr_points_db.empty()) throw Error(ErrorKind::parameter, "sweep: snr_points_db is empty");
  if (s.repeats < 1) throw Error(ErrorKind::parameter, "sweep: repeats must be >= 1");
  if (s.record_length < 10 * s.fft_size) throw Error(ErrorKind::parameter, "sweep: record_length must be >= 10 * fft_size");
  if (!(s.oversampling >= 1.0)) throw Error(ErrorKind::parameter, "sweep: oversampling must be >= 1");
  if (!(s.rrc_beta >= 0.0 && s.rrc_beta <= 1.0)) throw Error(ErrorKind::parameter, "sweep: rrc_beta must be in [0, 1]");
  if (s.iou_thresholds.empty()) throw Error(ErrorKind::parameter, "sweep: iou_thresholds is empty");
  for (double t : s.iou_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorKind::parameter, "sweep: IoU thresholds must lie in (0, 1]");
  }
  if (sweep_bandwidth(s) > 0.96) throw Error(ErrorKind::parameter, "sweep: burst bandwidth exceeds the band");
  validate_config(s.detector);
}

SweepSpec sweep_from_json(const ordered_json& doc) {
  SweepSpec s;
  try {
    s.snr_points_db = doc.at("snr_points_db").get<std::vector<double>>();
    s.repeats = doc.value("repeats", s.repeats);
    s.oversampling = doc.value("oversampling", s.oversampling);
    if (doc.contains("modulation")) {
      const std::string name = doc.at("modulation").get<std::string>();
      const auto m = modulation_from_string(name);
      if (!m) throw Error(ErrorKind::parameter, "sweep: unknown modulation '" + name + "'");
      s.modulation = *m;
    }
    s.rrc_beta = doc.value("rrc_beta", s.rrc_beta);
    s.record_length = doc.value("record_length", s.record_length);
    s.seed = doc.value("seed", s.seed);
    if (doc.contains("iou_thresholds")) s.iou_thresholds = doc.at("iou_thresholds").get<std::vector<double>>();
    s.fft_size = doc.value("fft_size", s.fft_size);
    if (doc.contains("detector")) s.detector = config_from_json(doc.at("detector"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parameter, std::string("sweep spec: ") + e.what());
  }
  validate_sweep(s);
  return s;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open sweep spec " + path.string());
  try {
    return sweep_from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parameter, path.string() + ": " + e.what());
  }
}

double sweep_bandwidth(const SweepSpec& spec) noexcept {
  return is_rrc_shaped(spec.modulation) ? (1.0 + spec.rrc_beta) / spec.oversampling : 1.0 / spec.oversampling;
}

Scene sweep_scene(const SweepSpec& spec, std::size_t repeat) {
  const std::uint64_t scene_seed = Rng::derive_seed(spec.seed, repeat);
  Rng rng(scene_seed);
  const std::size_t frames = spec.record_length / spec.fft_size;
  const std::size_t slots = std::max<std::size_t>(1, frames / 512);
  const std::size_t slot_len = spec.record_length / slots;
  const double bw = sweep_bandwidth(spec);

  std::vector<SignalBurst> bursts;
  for (std::size_t s = 0; s < slots; ++s) {
    SignalBurst b;
    b.label = spec.modulation;
    if (is_rrc_shaped(spec.modulation)) b.rrc_beta = spec.rrc_beta;
    b.bandwidth = bw;
    const auto min_dur = static_cast<std::size_t>(std::ceil(kMinTimeBandwidth / bw));
    b.duration_samples = std::clamp(static_cast<std::size_t>(rng.uniform(0.4, 0.8) * static_cast<double>(slot_len)), min_dur, slot_len);
    const std::size_t room = slot_len - b.duration_samples;
    b.start_sample = s * slot_len + static_cast<std::size_t>(rng.uniform(0.0, 1.0) * static_cast<double>(room));
    const double edge = 0.48 - bw / 2.0;
    b.center_freq = edge > 0.0 ? rng.uniform(-edge, edge) : 0.0;
    b.amplitude = 1.0;
    b.burst_seed = Rng::derive_seed(scene_seed, s);
    bursts.push_back(b);
  }
  Scene scene = render_scene(bursts, spec.record_length);
  scene.master_seed = scene_seed;
  scene.profile_name = "sweep";
  return scene;
}

double in_band_snr_db(double signal_power, double sigma, double bandwidth) noexcept {
  return 10.0 * std::log10(signal_power / (sigma * sigma * bandwidth));
}

double sigma_for_snr(double snr_db, double signal_power, double bandwidth) noexcept {
  return std::sqrt(signal_power / (bandwidth * std::pow(10.0, snr_db / 10.0)));
}

SweepResult run_sweep(const SweepSpec& spec, std::size_t workers) {
  validate_sweep(spec);
  std::vector<double> snrs = spec.snr_points_db;
  std::sort(snrs.begin(), snrs.end());
  const double bw = sweep_bandwidth(spec);

  std::vector<Scene> scenes(spec.repeats);
  parallel_for(spec.repeats, workers, [&](std::size_t r) { scenes[r] = sweep_scene(spec, r); });
  std::vector<std::vector<Truth>> truths(spec.repeats);
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    for (const auto& b : scenes[r].bursts) truths[r].push_back({burst_to_box(b), std::string(to_string(b.label))});
  }

  const std::size_t nthr = spec.iou_thresholds.size();
  // counts[(snr_idx * repeats + repeat) * nthr + thr] = (tp, fp, fn)
  std::vector<std::array<std::size_t, 3>> counts(snrs.size() * spec.repeats * nthr);
  parallel_for(snrs.size() * spec.repeats, workers, [&](std::size_t task) {
    const std::size_t si = task / spec.repeats;
    const std::size_t r = task % spec.repeats;
    const double sigma = sigma_for_snr(snrs[si], 1.0, bw);
    Rng noise_rng(Rng::derive_seed(Rng::derive_seed(spec.seed, 0x5eed0000ULL + si), r));
    const ComplexBuffer noisy = add_awgn(scenes[r].samples, sigma, noise_rng);
    const std::vector<Detection> dets = channelized_radiometer(noisy, spec.fft_size, spec.detector);
    for (std::size_t t = 0; t < nthr; ++t) {
      const ScoreRow row = score(match(dets, truths[r], spec.iou_thresholds[t]));
      counts[task * nthr + t] = {row.tp, row.fp, row.fn};
    }
  });

  SweepResult result;
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    result.points.push_back({snrs[si], sigma_for_snr(snrs[si], 1.0, bw)});
    for (std::size_t t = 0; t < nthr; ++t) {
      ScoreRow row;
      row.snr_db = snrs[si];
      row.iou_threshold = spec.iou_thresholds[t];
      for (std::size_t r = 0; r < spec.repeats; ++r) {
        const auto& c = counts[(si * spec.repeats + r) * nthr + t];
        row.tp += c[0];
        row.fp += c[1];
        row.fn += c[2];
      }
      result.report.rows.push_back(finish_row(row));
    }
  }
  finalize_report(result.report);
  return result;
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out) {
  write_text(out, report_to_csv(result.report));
  ordered_json side = report_to_json(result.report);
  auto pts = ordered_json::array();
  for (const auto& p : result.points) pts.push_back({{"snr_db", p.snr_db}, {"sigma", p.sigma}});
  side["points"] = std::move(pts);
  write_text(with_suffix(out, ".json"), side.dump(2) + "\n");
}

void cmd_export_grid(const ExportGridOptions& opts) {
  const sigmf::ReadResult rec = sigmf::read_record(opts.record);
  const ComplexBuffer samples = maybe_add_noise(rec.samples, opts.noise_sigma, opts.seed);
  const SpectralGrid grid = spectrogram(samples, opts.fft_size);

  std::vector<std::uint8_t> bytes;
  bytes.reserve(grid.values.size() * 4);
  for (double v : grid.values) {
    const auto f = static_cast<float>(v);
    std::uint32_t u = 0;
    std::memcpy(&u, &f, sizeof u);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  {
    const auto path = with_suffix(opts.out_prefix, ".grid.f32");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  ordered_json meta;
  meta["geometry"] = {{"fft_size", grid.geometry.fft_size},
                      {"hop", grid.geometry.hop},
                      {"frames", grid.geometry.frames},
                      {"bins", grid.geometry.bins}};
  meta["norm_stats"] = {{"mean", grid.mean}, {"std", grid.std}};
  meta["record"] = opts.record.string();
  meta["noise_sigma"] = opts.noise_sigma;
  meta["seed"] = opts.seed;
  write_text(with_suffix(opts.out_prefix, ".grid.json"), meta.dump(2) + "\n");

  std::vector<TimeFreqBox> boxes;
  for (const auto& t : rec.truths) boxes.push_back(t.box);
  write_mask_file(with_suffix(opts.out_prefix, ".truth.wbmask"), rasterize(boxes, grid.geometry),
                  {{"source", "truth"}, {"record", opts.record.string()}});
}

}  // namespace wbsr::cli
