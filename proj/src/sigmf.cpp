#include "wbsr/sigmf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "wbsr/error.hpp"

namespace wbsr::sigmf {

using nlohmann::ordered_json;

namespace {

std::int16_t to_int16(double v) {
  const double r = std::round(v);  // half away from zero
  return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

[[noreturn]] void malformed(const std::string& msg) { throw Error(ErrorKind::malformed_metadata, "sigmf metadata: " + msg); }

ordered_json annotation_json(const SignalBurst& b, double fs) {
  const TimeFreqBox box = burst_to_box(b);
  ordered_json a;
  a["core:sample_start"] = b.start_sample;
  a["core:sample_count"] = b.duration_samples;
  a["core:freq_lower_edge"] = box.f_low * fs;
  a["core:freq_upper_edge"] = box.f_high * fs;
  a["core:label"] = std::string(to_string(b.label));
  a["wbsr:amplitude"] = b.amplitude;
  if (b.rrc_beta) a["wbsr:rrc_beta"] = *b.rrc_beta;
  a["wbsr:burst_seed"] = b.burst_seed;
  return a;
}

}  // namespace

RecordPaths RecordPaths::from_base(const std::filesystem::path& base) {
  std::filesystem::path stem = base;
  const auto ext = base.extension().string();
  if (ext == ".sigmf-data" || ext == ".sigmf-meta" || ext == ".sigmf") stem.replace_extension();
  RecordPaths p;
  p.data = stem;
  p.data += ".sigmf-data";
  p.meta = stem;
  p.meta += ".sigmf-meta";
  return p;
}

double full_scale_factor(const ComplexBuffer& samples) noexcept {
  double peak = 0.0;
  for (const auto& v : samples.samples) peak = std::max({peak, std::abs(v.real()), std::abs(v.imag())});
  return peak > 0.0 ? kFullScale / peak : 1.0;
}

std::vector<std::uint8_t> quantize(const ComplexBuffer& samples, double scale) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * 4);
  auto put = [&out](std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  };
  for (const auto& v : samples.samples) {
    put(to_int16(v.real() * scale));
    put(to_int16(v.imag() * scale));
  }
  return out;
}

ComplexBuffer dequantize(const std::vector<std::uint8_t>& bytes, double scale, double sample_rate) {
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorKind::truncated_data, "sigmf data: " + std::to_string(bytes.size()) +
                                               " bytes is not a whole number of ci16 samples; partial sample at byte offset " +
                                               std::to_string(bytes.size() - bytes.size() % 4));
  }
  ComplexBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(bytes.size() / 4);
  auto get = [&bytes](std::size_t i) {
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[i] | (bytes[i + 1] << 8)));
  };
  const double inv = 1.0 / scale;
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    out.samples[n] = {get(4 * n) * inv, get(4 * n + 2) * inv};
  }
  return out;
}

Record parse_metadata(const ordered_json& meta) {
  Record r;
  r.meta = meta;
  try {
    if (!meta.is_object() || !meta.contains("global") || !meta.at("global").is_object()) malformed("missing global object");
    const auto& g = meta.at("global");
    if (!g.contains("core:datatype")) malformed("missing core:datatype");
    r.datatype = g.at("core:datatype").get<std::string>();
    if (!g.contains("core:sample_rate")) malformed("missing core:sample_rate");
    r.sample_rate = g.at("core:sample_rate").get<double>();
    if (!(r.sample_rate > 0.0)) malformed("core:sample_rate must be positive");
    r.version = g.value("core:version", std::string(kVersion));
    r.description = g.value("core:description", std::string());
    r.scale = g.value("wbsr:scale", 1.0);
    if (!(r.scale > 0.0) || !std::isfinite(r.scale)) malformed("wbsr:scale must be positive");
    if (g.contains("wbsr:master_seed")) r.master_seed = g.at("wbsr:master_seed").get<std::uint64_t>();
    r.profile = g.value("wbsr:profile", std::string());
    if (meta.contains("annotations")) {
      for (const auto& a : meta.at("annotations")) {
        Annotation ann;
        ann.sample_start = a.at("core:sample_start").get<std::size_t>();
        ann.sample_count = a.value("core:sample_count", std::size_t{0});
        ann.freq_lower_edge = a.at("core:freq_lower_edge").get<double>();
        ann.freq_upper_edge = a.at("core:freq_upper_edge").get<double>();
        ann.label = a.value("core:label", std::string());
        r.annotations.push_back(std::move(ann));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return r;
}

Record write_record(const Scene& scene, double sample_rate_hz, const std::filesystem::path& base, const std::string& description) {
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorKind::parameter, "write_record: sample rate must be positive");
  std::vector<SignalBurst> bursts = scene.bursts;
  std::stable_sort(bursts.begin(), bursts.end(),
                   [](const SignalBurst& a, const SignalBurst& b) { return a.start_sample < b.start_sample; });

  const double scale = full_scale_factor(scene.samples);
  ordered_json meta;
  auto& g = meta["global"];
  g["core:datatype"] = kDatatype;
  g["core:sample_rate"] = sample_rate_hz;
  g["core:version"] = kVersion;
  g["core:description"] = description.empty() ? "synthetic wideband signal recognition record" : description;
  g["core:extensions"] = ordered_json::array({{{"name", "wbsr"}, {"version", "1.0.0"}, {"optional", true}}});
  g["wbsr:scale"] = scale;
  g["wbsr:master_seed"] = scene.master_seed;
  g["wbsr:profile"] = scene.profile_name;
  g["wbsr:record_length"] = scene.record_length;
  meta["captures"] = ordered_json::array({{{"core:sample_start", 0}, {"core:frequency", 0.0}}});
  auto annotations = ordered_json::array();
  for (const auto& b : bursts) annotations.push_back(annotation_json(b, sample_rate_hz));
  meta["annotations"] = std::move(annotations);

  Record rec = parse_metadata(meta);
  rec.paths = RecordPaths::from_base(base);
  write_bytes(rec.paths.data, quantize(scene.samples, scale));
  write_text(rec.paths.meta, meta.dump(2) + "\n");
  return rec;
}

void write_record(const Record& record, const ComplexBuffer& samples, const std::filesystem::path& base) {
  const RecordPaths paths = RecordPaths::from_base(base);
  ordered_json meta = record.meta;
  if (!meta.is_object()) meta = ordered_json::object();
  meta["global"]["core:datatype"] = kDatatype;
  meta["global"]["core:sample_rate"] = record.sample_rate;
  meta["global"]["wbsr:scale"] = record.scale;
  write_bytes(paths.data, quantize(samples, record.scale));
  write_text(paths.meta, meta.dump(2) + "\n");
}

ReadResult read_record(const std::filesystem::path& base) {
  ReadResult out;
  const RecordPaths paths = RecordPaths::from_base(base);
  const auto meta_bytes = read_bytes(paths.meta);
  ordered_json meta;
  try {
    meta = ordered_json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    malformed(paths.meta.string() + ": " + e.what());
  }
  out.record = parse_metadata(meta);
  out.record.paths = paths;
  if (out.record.datatype != kDatatype) {
    throw Error(ErrorKind::datatype_mismatch,
                "sigmf: datatype '" + out.record.datatype + "' is not supported (expected " + kDatatype + ")");
  }
  out.samples = dequantize(read_bytes(paths.data), out.record.scale, out.record.sample_rate);

  const double fs = out.record.sample_rate;
  const auto total = out.samples.size();
  for (auto& a : out.record.annotations) {
    if (!(a.freq_lower_edge < a.freq_upper_edge)) malformed("annotation with freq_lower_edge >= freq_upper_edge");
    if (a.freq_lower_edge < -fs / 2 || a.freq_upper_edge > fs / 2) {
      out.warnings.push_back("annotation at sample " + std::to_string(a.sample_start) + " has edges [" +
                             std::to_string(a.freq_lower_edge) + ", " + std::to_string(a.freq_upper_edge) +
                             "] Hz outside +/- sample_rate/2; clamped");
    }
    if (a.sample_start + a.sample_count > total) {
      out.warnings.push_back("annotation at sample " + std::to_string(a.sample_start) + " runs past the data; clamped");
    }
    const double f_low = std::clamp(a.freq_lower_edge / fs, -0.5, 0.5);
    const double f_high = std::clamp(a.freq_upper_edge / fs, -0.5, 0.5);
    const double t0 = static_cast<double>(std::min(a.sample_start, total));
    const double t1 = static_cast<double>(std::min(a.sample_start + a.sample_count, total));
    const TimeFreqBox box{t0, t1, f_low, f_high};
    if (!box.valid()) {
      out.warnings.push_back("annotation at sample " + std::to_string(a.sample_start) + " is empty after clamping; skipped");
      continue;
    }
    out.truths.push_back(Truth{box, a.label});
  }
  return out;
}

}  // namespace wbsr::sigmf
