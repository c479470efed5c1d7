#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "wbsr/commands.hpp"
#include "wbsr/error.hpp"
#include "wbsr/scene.hpp"

#ifndef WBSR_PROFILE_DIR
#define WBSR_PROFILE_DIR "data/profiles"
#endif

namespace {

std::vector<double> parse_thresholds(const std::string& text) {
  if (text == "coco") return wbsr::default_iou_thresholds();
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<std::filesystem::path> profile_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wideband signal recognition benchmark: synthesis, detection and scoring"};
  app.require_subcommand(1);

  // generate
  wbsr::cli::GenerateOptions gen;
  std::string profiles_dir = WBSR_PROFILE_DIR;
  auto* generate = app.add_subcommand("generate", "Synthesize SigMF records from band layout profiles");
  generate->add_option("--profile", gen.profiles, "Profile file(s); default: every built-in profile, round-robin");
  generate->add_option("--profiles-dir", profiles_dir, "Directory of built-in profiles")->capture_default_str();
  generate->add_option("--count", gen.count, "Number of records")->capture_default_str();
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  generate->add_option("--record-length", gen.record_length, "Samples per record")->capture_default_str();
  generate->add_option("--sample-rate", gen.sample_rate, "Sample rate metadata in Hz")->capture_default_str();

  // detect
  wbsr::cli::DetectOptions det;
  std::string det_config, det_mask;
  auto* detect = app.add_subcommand("detect", "Run the channelized radiometer (or ingest a mask) on a record");
  detect->add_option("--record", det.record, "SigMF record base path")->required();
  detect->add_option("--config", det_config, "Detector config JSON");
  detect->add_option("--mask", det_mask, "External WBMASK01 mask file; replaces thresholding");
  detect->add_option("--out", det.out, "Detections JSON-lines output")->required();
  detect->add_option("--noise-sigma", det.noise_sigma, "AWGN sigma added before detection")->capture_default_str();
  detect->add_option("--seed", det.seed, "Noise seed")->capture_default_str();
  detect->add_option("--fft-size", det.fft_size, "DFT size")->capture_default_str();

  // score
  wbsr::cli::ScoreOptions sc;
  std::string thresholds = "0.5";
  auto* score = app.add_subcommand("score", "Score detections against a record's annotations");
  score->add_option("--detections", sc.detections, "Detections JSON-lines file")->required();
  score->add_option("--record", sc.record, "SigMF record base path")->required();
  score->add_option("--thresholds", thresholds, "Comma-separated IoU thresholds or 'coco'")->capture_default_str();
  score->add_flag("--class-aware", sc.class_aware, "Require label equality for a match");
  score->add_option("--out", sc.out_prefix, "Output prefix (<prefix>.json, <prefix>.csv)")->required();

  // sweep
  std::string sweep_spec, sweep_out;
  std::size_t workers = wbsr::cli::default_workers();
  auto* sweep = app.add_subcommand("sweep", "Precision/recall versus in-band SNR");
  sweep->add_option("--spec", sweep_spec, "Sweep spec JSON")->required();
  sweep->add_option("--out", sweep_out, "CSV output")->required();
  sweep->add_option("--workers", workers, "Worker threads (default: WBSR_WORKERS or CPU count)");

  // export-grid
  wbsr::cli::ExportGridOptions ex;
  auto* export_grid = app.add_subcommand("export-grid", "Write normalized spectrogram and truth mask golden files");
  export_grid->add_option("--record", ex.record, "SigMF record base path")->required();
  export_grid->add_option("--out", ex.out_prefix, "Output prefix")->required();
  export_grid->add_option("--noise-sigma", ex.noise_sigma, "AWGN sigma added first")->capture_default_str();
  export_grid->add_option("--seed", ex.seed, "Noise seed")->capture_default_str();
  export_grid->add_option("--fft-size", ex.fft_size, "DFT size")->capture_default_str();

  // profiles list
  auto* profiles = app.add_subcommand("profiles", "Band layout profile utilities");
  profiles->require_subcommand(1);
  std::string list_dir = WBSR_PROFILE_DIR;
  auto* list = profiles->add_subcommand("list", "List profiles in a directory");
  list->add_option("--dir", list_dir, "Profile directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      if (gen.profiles.empty()) gen.profiles = profile_files(profiles_dir);
      const auto records = wbsr::cli::cmd_generate(gen);
      std::size_t bursts = 0;
      for (const auto& r : records) bursts += r.bursts;
      std::cout << "wrote " << records.size() << " records (" << bursts << " bursts) to " << gen.out_dir.string() << "\n";
    } else if (detect->parsed()) {
      if (!det_config.empty()) det.config = det_config;
      if (!det_mask.empty()) det.mask = det_mask;
      const auto dets = wbsr::cli::cmd_detect(det);
      std::cout << dets.size() << " detections -> " << det.out.string() << "\n";
    } else if (score->parsed()) {
      sc.thresholds = parse_thresholds(thresholds);
      const auto report = wbsr::cli::cmd_score(sc);
      std::cout << "precision " << report.mean_precision << " recall " << report.mean_recall << " f1 " << report.mean_f1
                << "\n";
    } else if (sweep->parsed()) {
      const auto spec = wbsr::cli::load_sweep(sweep_spec);
      const auto result = wbsr::cli::run_sweep(spec, workers);
      wbsr::cli::write_sweep(result, sweep_out);
      for (const auto& p : result.points) std::cout << "snr " << p.snr_db << " dB: sigma " << p.sigma << "\n";
    } else if (export_grid->parsed()) {
      wbsr::cli::cmd_export_grid(ex);
    } else if (list->parsed()) {
      for (const auto& p : wbsr::load_profile_dir(list_dir)) {
        std::cout << p.name << "\toccupancy " << p.occupancy << "\t" << p.description << "\n";
      }
    }
  } catch (const wbsr::Error& e) {
    std::cerr << "error (" << wbsr::to_string(e.kind()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
