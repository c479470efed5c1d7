#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/box.hpp"
#include "wbsr/dsp.hpp"
#include "wbsr/modulators.hpp"

namespace wbsr {

/// Minimum duration_samples * normalized bandwidth for any burst.
inline constexpr double kMinTimeBandwidth = 512.0;

/// Scalar distribution used by band layout profiles.
struct Distribution {
  enum class Kind { uniform, log_uniform, choice };

  Kind kind = Kind::uniform;
  double low = 0.0;
  double high = 0.0;
  std::vector<double> values;   // choice only
  std::vector<double> weights;  // choice only; empty means equal weights

  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi, {}, {}}; }
  static Distribution log_uniform(double lo, double hi) { return {Kind::log_uniform, lo, hi, {}, {}}; }
  static Distribution choice(std::vector<double> vals) { return {Kind::choice, 0.0, 0.0, std::move(vals), {}}; }

  double sample(Rng& rng) const;
  double min() const;
  double max() const;
};

struct ChannelGrid {
  double first_center = 0.0;
  double spacing = 0.0;
};

struct WeightedModulation {
  ModulationClass modulation = ModulationClass::PSK4;
  double weight = 1.0;
};

/// Parametric description of how bursts populate a record. Durations are
/// fractions of the record length; `start` is the fractional position of
/// the burst within the room left after its duration.
struct BandLayoutProfile {
  std::string name;
  std::string description;
  double occupancy = 0.0;
  std::optional<ChannelGrid> channel_grid;
  Distribution bandwidth = Distribution::log_uniform(0.01, 0.1);
  Distribution duration = Distribution::uniform(0.05, 0.3);
  Distribution start = Distribution::uniform(0.0, 1.0);
  Distribution amplitude_db = Distribution::uniform(-30.0, 0.0);
  Distribution rrc_beta = Distribution::uniform(0.05, 1.0);
  std::vector<WeightedModulation> modulations;
};

/// Throws ErrorKind::profile describing the first violated constraint.
void validate_profile(const BandLayoutProfile& profile);

BandLayoutProfile profile_from_json(const nlohmann::ordered_json& doc);
nlohmann::ordered_json profile_to_json(const BandLayoutProfile& profile);
BandLayoutProfile load_profile(const std::filesystem::path& path);
/// Every *.json profile in a directory, ordered by file name.
std::vector<BandLayoutProfile> load_profile_dir(const std::filesystem::path& dir);

struct SignalBurst {
  ModulationClass label = ModulationClass::PSK4;
  double center_freq = 0.0;
  double bandwidth = 0.0;
  std::size_t start_sample = 0;
  std::size_t duration_samples = 0;
  double amplitude = 1.0;
  std::optional<double> rrc_beta;
  std::uint64_t burst_seed = 0;
};

/// Throws ErrorKind::invariant when the burst does not fit the record or
/// the band, or falls below the minimum time-bandwidth product.
void validate_burst(const SignalBurst& burst, std::size_t record_length);

struct Scene {
  std::size_t record_length = 0;
  std::vector<SignalBurst> bursts;
  ComplexBuffer samples;
  std::string profile_name;
  std::uint64_t master_seed = 0;
};

/// Draws a burst list from a profile. Burst seeds depend only on the
/// generator seed and the burst index.
std::vector<SignalBurst> draw_layout(const BandLayoutProfile& profile, std::size_t record_length, Rng& rng);

/// One burst at scene rate: `duration_samples` long, already shifted to
/// its center frequency and scaled to its amplitude. Sample 0 corresponds
/// to `start_sample` in the record.
ComplexBuffer render_burst(const SignalBurst& burst);

/// Sum of all rendered bursts; no noise.
Scene render_scene(const std::vector<SignalBurst>& bursts, std::size_t record_length);

/// draw_layout + render_scene from (profile, master_seed).
Scene generate_scene(const BandLayoutProfile& profile, std::size_t record_length, std::uint64_t master_seed);

/// [start, start + duration] x [center - bw/2, center + bw/2].
TimeFreqBox burst_to_box(const SignalBurst& burst) noexcept;

/// The canonical-rate band a burst's waveform occupies before resampling.
/// Analytic for RRC and OFDM; measured (99% energy) otherwise.
Band canonical_band(const SignalBurst& burst);

}  // namespace wbsr
