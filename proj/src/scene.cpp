#include "wbsr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "wbsr/error.hpp"

namespace wbsr {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void profile_error(const std::string& profile, const std::string& msg) {
  throw Error(ErrorKind::profile, "profile '" + profile + "': " + msg);
}

void check_support(const std::string& profile, const char* what, const Distribution& d, double lo, double hi) {
  if (d.kind == Distribution::Kind::choice) {
    if (d.values.empty()) profile_error(profile, std::string(what) + ": choice needs at least one value");
    if (!d.weights.empty()) {
      if (d.weights.size() != d.values.size()) profile_error(profile, std::string(what) + ": weights/values size mismatch");
      for (double w : d.weights) {
        if (!(w > 0.0)) profile_error(profile, std::string(what) + ": weights must be positive");
      }
    }
  } else {
    if (!(d.low <= d.high)) profile_error(profile, std::string(what) + ": low must not exceed high");
    if (d.kind == Distribution::Kind::log_uniform && !(d.low > 0.0)) {
      profile_error(profile, std::string(what) + ": log_uniform needs a positive lower bound");
    }
  }
  if (!(d.min() >= lo && d.max() <= hi)) {
    profile_error(profile, std::string(what) + ": support [" + std::to_string(d.min()) + ", " + std::to_string(d.max()) +
                               "] outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

Distribution distribution_from_json(const ordered_json& j) {
  Distribution d;
  const std::string kind = j.at("dist").get<std::string>();
  if (kind == "uniform" || kind == "log_uniform") {
    d.kind = kind == "uniform" ? Distribution::Kind::uniform : Distribution::Kind::log_uniform;
    d.low = j.at("low").get<double>();
    d.high = j.at("high").get<double>();
  } else if (kind == "choice") {
    d.kind = Distribution::Kind::choice;
    d.values = j.at("values").get<std::vector<double>>();
    if (j.contains("weights")) d.weights = j.at("weights").get<std::vector<double>>();
  } else {
    throw Error(ErrorKind::profile, "unknown distribution kind '" + kind + "'");
  }
  return d;
}

ordered_json distribution_to_json(const Distribution& d) {
  ordered_json j;
  switch (d.kind) {
    case Distribution::Kind::uniform:
    case Distribution::Kind::log_uniform:
      j["dist"] = d.kind == Distribution::Kind::uniform ? "uniform" : "log_uniform";
      j["low"] = d.low;
      j["high"] = d.high;
      break;
    case Distribution::Kind::choice:
      j["dist"] = "choice";
      j["values"] = d.values;
      if (!d.weights.empty()) j["weights"] = d.weights;
      break;
  }
  return j;
}

// Guard samples generated on each side of the canonical waveform so the
// resampler's start-up transient falls outside the burst.
constexpr std::size_t kCanonicalGuard = 32;
constexpr std::size_t kProbeSamples = 1 << 16;

struct Canonical {
  Band band;
  ComplexBuffer waveform;  // empty unless produced while measuring
};

Canonical measure_canonical(const SignalBurst& burst) {
  const double beta = burst.rrc_beta.value_or(0.35);
  if (auto nominal = nominal_band(burst.label, beta)) return {*nominal, {}};
  BurstSpec probe{burst.label, kProbeSamples, beta, burst.burst_seed};
  Canonical out;
  out.waveform = modulate(probe);
  out.band = measure_occupied_band(out.waveform.samples);
  return out;
}

}  // namespace

double Distribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return low == high ? low : rng.uniform(low, high);
    case Kind::log_uniform:
      return low == high ? low : std::exp(rng.uniform(std::log(low), std::log(high)));
    case Kind::choice: {
      if (weights.empty()) return values[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(values.size()) - 1))];
      std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
      return values[pick(rng.engine())];
    }
  }
  return low;
}

double Distribution::min() const {
  if (kind == Kind::choice) return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
  return low;
}

double Distribution::max() const {
  if (kind == Kind::choice) return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  return high;
}

void validate_profile(const BandLayoutProfile& p) {
  if (p.name.empty()) profile_error("<unnamed>", "name is required");
  if (!(p.occupancy >= 0.0) || !std::isfinite(p.occupancy)) profile_error(p.name, "occupancy must be finite and >= 0");
  check_support(p.name, "bandwidth", p.bandwidth, 1e-9, 0.5);
  check_support(p.name, "duration", p.duration, 1e-12, 1.0);
  check_support(p.name, "start", p.start, 0.0, 1.0);
  check_support(p.name, "amplitude_db", p.amplitude_db, -50.0, 0.0);
  check_support(p.name, "rrc_beta", p.rrc_beta, 0.0, 1.0);
  if (p.channel_grid) {
    if (!(p.channel_grid->spacing > 0.0)) profile_error(p.name, "channel_grid.spacing must be positive");
    if (!(std::abs(p.channel_grid->first_center) < 0.5)) profile_error(p.name, "channel_grid.first_center must lie in (-0.5, 0.5)");
  }
  if (p.occupancy > 0.0 && p.modulations.empty()) profile_error(p.name, "modulation pool is empty");
  for (const auto& m : p.modulations) {
    if (!(m.weight > 0.0)) profile_error(p.name, "modulation weights must be positive");
  }
}

BandLayoutProfile profile_from_json(const ordered_json& doc) {
  BandLayoutProfile p;
  try {
    p.name = doc.at("name").get<std::string>();
    p.description = doc.value("description", "");
    p.occupancy = doc.at("occupancy").get<double>();
    if (doc.contains("channel_grid")) {
      const auto& g = doc.at("channel_grid");
      p.channel_grid = ChannelGrid{g.at("first_center").get<double>(), g.at("spacing").get<double>()};
    }
    p.bandwidth = distribution_from_json(doc.at("bandwidth"));
    p.duration = distribution_from_json(doc.at("duration"));
    if (doc.contains("start")) p.start = distribution_from_json(doc.at("start"));
    if (doc.contains("amplitude_db")) p.amplitude_db = distribution_from_json(doc.at("amplitude_db"));
    if (doc.contains("rrc_beta")) p.rrc_beta = distribution_from_json(doc.at("rrc_beta"));
    for (const auto& entry : doc.at("modulations")) {
      const std::string cls = entry.at("class").get<std::string>();
      const auto mod = modulation_from_string(cls);
      if (!mod) throw Error(ErrorKind::profile, "unknown modulation class '" + cls + "'");
      p.modulations.push_back({*mod, entry.value("weight", 1.0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::profile, std::string("malformed profile: ") + e.what());
  }
  validate_profile(p);
  return p;
}

ordered_json profile_to_json(const BandLayoutProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  if (!p.description.empty()) j["description"] = p.description;
  j["occupancy"] = p.occupancy;
  if (p.channel_grid) j["channel_grid"] = {{"first_center", p.channel_grid->first_center}, {"spacing", p.channel_grid->spacing}};
  j["bandwidth"] = distribution_to_json(p.bandwidth);
  j["duration"] = distribution_to_json(p.duration);
  j["start"] = distribution_to_json(p.start);
  j["amplitude_db"] = distribution_to_json(p.amplitude_db);
  j["rrc_beta"] = distribution_to_json(p.rrc_beta);
  ordered_json mods = ordered_json::array();
  for (const auto& m : p.modulations) mods.push_back({{"class", std::string(to_string(m.modulation))}, {"weight", m.weight}});
  j["modulations"] = std::move(mods);
  return j;
}

BandLayoutProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open profile " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::profile, path.string() + ": " + e.what());
  }
  return profile_from_json(doc);
}

std::vector<BandLayoutProfile> load_profile_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::io, "cannot list profile directory " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<BandLayoutProfile> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_profile(f));
  return out;
}

void validate_burst(const SignalBurst& b, std::size_t record_length) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::invariant, "burst: " + msg); };
  if (!(b.bandwidth > 0.0)) fail("bandwidth must be positive");
  if (!(b.center_freq - b.bandwidth / 2 >= -0.5 - 1e-12 && b.center_freq + b.bandwidth / 2 <= 0.5 + 1e-12)) {
    fail("band [" + std::to_string(b.center_freq - b.bandwidth / 2) + ", " + std::to_string(b.center_freq + b.bandwidth / 2) +
         "] leaves [-0.5, 0.5]");
  }
  if (b.duration_samples == 0) fail("duration must be positive");
  if (b.start_sample + b.duration_samples > record_length) {
    fail("extends to sample " + std::to_string(b.start_sample + b.duration_samples) + " past record end " +
         std::to_string(record_length));
  }
  if (static_cast<double>(b.duration_samples) * b.bandwidth < kMinTimeBandwidth * (1.0 - 1e-9)) {
    fail("time-bandwidth product below minimum");
  }
  if (!(b.amplitude > 0.0) || !std::isfinite(b.amplitude)) fail("amplitude must be positive");
}

std::vector<SignalBurst> draw_layout(const BandLayoutProfile& profile, std::size_t record_length, Rng& rng) {
  validate_profile(profile);
  std::vector<SignalBurst> bursts;
  if (profile.occupancy <= 0.0 || record_length == 0) return bursts;
  if (static_cast<double>(record_length) * 0.5 < kMinTimeBandwidth) {
    throw Error(ErrorKind::profile, "record of " + std::to_string(record_length) + " samples cannot hold any burst");
  }

  // Count is uniform over [occupancy/2, 3*occupancy/2]; mean = occupancy.
  const auto lo = static_cast<std::int64_t>(std::ceil(profile.occupancy / 2.0));
  const auto hi = std::max(lo, static_cast<std::int64_t>(std::floor(1.5 * profile.occupancy)));
  const auto count = static_cast<std::size_t>(rng.uniform_int(lo, hi));

  std::vector<double> weights;
  for (const auto& m : profile.modulations) weights.push_back(m.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  const auto length = static_cast<double>(record_length);
  for (std::size_t i = 0; i < count; ++i) {
    SignalBurst b;
    b.label = profile.modulations[pick(rng.engine())].modulation;
    if (is_rrc_shaped(b.label)) b.rrc_beta = profile.rrc_beta.sample(rng);

    double bw = 0.0;
    std::size_t dur = 0;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      bw = profile.bandwidth.sample(rng);
      dur = static_cast<std::size_t>(std::clamp(std::llround(profile.duration.sample(rng) * length), 1LL,
                                                static_cast<long long>(record_length)));
      ok = static_cast<double>(dur) * bw >= kMinTimeBandwidth;
    }
    if (!ok) {
      dur = std::min(record_length, static_cast<std::size_t>(std::ceil(kMinTimeBandwidth / bw)));
      if (static_cast<double>(dur) * bw < kMinTimeBandwidth) bw = kMinTimeBandwidth / static_cast<double>(dur);
    }
    b.bandwidth = bw;
    b.duration_samples = dur;

    const double half = bw / 2.0;
    bool placed = false;
    if (profile.channel_grid) {
      const auto& g = *profile.channel_grid;
      const auto k_lo = static_cast<std::int64_t>(std::ceil((-0.5 + half - g.first_center) / g.spacing - 1e-9));
      const auto k_hi = static_cast<std::int64_t>(std::floor((0.5 - half - g.first_center) / g.spacing + 1e-9));
      if (k_lo <= k_hi) {
        b.center_freq = g.first_center + static_cast<double>(rng.uniform_int(k_lo, k_hi)) * g.spacing;
        placed = true;
      }
    }
    if (!placed) b.center_freq = half >= 0.5 ? 0.0 : rng.uniform(-0.5 + half, 0.5 - half);

    const double room = static_cast<double>(record_length - dur);
    b.start_sample = std::min(record_length - dur, static_cast<std::size_t>(std::floor(profile.start.sample(rng) * room)));
    b.amplitude = std::pow(10.0, profile.amplitude_db.sample(rng) / 20.0);
    b.burst_seed = Rng::derive_seed(rng.seed(), i);
    validate_burst(b, record_length);
    bursts.push_back(b);
  }
  return bursts;
}

Band canonical_band(const SignalBurst& burst) { return measure_canonical(burst).band; }

ComplexBuffer render_burst(const SignalBurst& burst) {
  Canonical canon = measure_canonical(burst);
  const double ratio = canon.band.width() / burst.bandwidth;
  const auto needed = static_cast<std::size_t>(std::ceil(static_cast<double>(burst.duration_samples) / ratio)) + 2 * kCanonicalGuard;

  ComplexBuffer waveform;
  if (canon.waveform.size() >= needed) {
    waveform.samples.assign(canon.waveform.samples.begin(), canon.waveform.samples.begin() + static_cast<std::ptrdiff_t>(needed));
  } else {
    waveform = modulate(BurstSpec{burst.label, needed, burst.rrc_beta.value_or(0.35), burst.burst_seed});
  }
  frequency_shift(waveform.samples, -canon.band.center());

  const ComplexBuffer scaled = resample_any(waveform, ratio);
  const auto skip = static_cast<std::size_t>(std::llround(static_cast<double>(kCanonicalGuard) * ratio));
  ComplexBuffer out;
  out.samples.assign(burst.duration_samples, cf64{});
  const std::size_t avail = scaled.size() > skip ? std::min(burst.duration_samples, scaled.size() - skip) : 0;
  std::copy_n(scaled.samples.begin() + static_cast<std::ptrdiff_t>(skip), avail, out.samples.begin());

  const double p = mean_power(out.samples);
  const double gain = p > 0.0 ? burst.amplitude / std::sqrt(p) : 0.0;
  for (auto& v : out.samples) v *= gain;
  frequency_shift(out.samples, burst.center_freq, static_cast<double>(burst.start_sample));
  return out;
}

Scene render_scene(const std::vector<SignalBurst>& bursts, std::size_t record_length) {
  Scene scene;
  scene.record_length = record_length;
  scene.bursts = bursts;
  scene.samples.samples.assign(record_length, cf64{});
  for (const auto& b : bursts) {
    validate_burst(b, record_length);
    const ComplexBuffer rendered = render_burst(b);
    for (std::size_t n = 0; n < rendered.size(); ++n) scene.samples.samples[b.start_sample + n] += rendered.samples[n];
  }
  return scene;
}

Scene generate_scene(const BandLayoutProfile& profile, std::size_t record_length, std::uint64_t master_seed) {
  Rng rng(master_seed);
  Scene scene = render_scene(draw_layout(profile, record_length, rng), record_length);
  scene.profile_name = profile.name;
  scene.master_seed = master_seed;
  return scene;
}

TimeFreqBox burst_to_box(const SignalBurst& b) noexcept {
  const double start = static_cast<double>(b.start_sample);
  return TimeFreqBox{start, start + static_cast<double>(b.duration_samples), b.center_freq - b.bandwidth / 2.0,
                     b.center_freq + b.bandwidth / 2.0};
}

}  // namespace wbsr
