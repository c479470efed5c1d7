#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "wbsr/dsp.hpp"

namespace wbsr {

enum class ModulationClass {
  PSK2,
  PSK4,
  PSK8,
  QAM16,
  QAM64,
  QAM256,
  OFDM512,
  FSK2,
  FSK4,
  GMSK,
  OOK,
  AM_DSB,
  AM_SSB,
  FM,
};

inline constexpr std::array<ModulationClass, 14> kAllModulations = {
    ModulationClass::PSK2,  ModulationClass::PSK4,   ModulationClass::PSK8,    ModulationClass::QAM16,
    ModulationClass::QAM64, ModulationClass::QAM256, ModulationClass::OFDM512, ModulationClass::FSK2,
    ModulationClass::FSK4,  ModulationClass::GMSK,   ModulationClass::OOK,     ModulationClass::AM_DSB,
    ModulationClass::AM_SSB, ModulationClass::FM,
};

std::string_view to_string(ModulationClass m) noexcept;
/// Accepts the enum spelling ("PSK4"). Returns nullopt for unknown names.
std::optional<ModulationClass> modulation_from_string(std::string_view name) noexcept;

bool is_analog(ModulationClass m) noexcept;
/// Linear single-carrier classes shaped by the RRC filter.
bool is_rrc_shaped(ModulationClass m) noexcept;

/// Samples per symbol of the canonical waveform. Linear classes run at 2;
/// the frequency-domain classes (FSK, GMSK) need 8 to keep every tone
/// below Nyquist; analog and OFDM report 1.
int canonical_sps(ModulationClass m) noexcept;

inline constexpr int kRrcSpanSymbols = 32;
inline constexpr double kGmskBt = 0.3;
inline constexpr double kGmskIndex = 0.5;
inline constexpr double kFskIndex = 1.0;
inline constexpr std::size_t kOfdmFftSize = 640;
inline constexpr std::size_t kOfdmSubcarriers = 512;
inline constexpr std::size_t kOfdmCyclicPrefix = kOfdmFftSize / 8;
inline constexpr double kAmIndex = 0.5;
inline constexpr double kFmDeviation = 0.05;
inline constexpr double kAudioBandLimit = 0.1;

struct BurstSpec {
  ModulationClass modulation = ModulationClass::PSK4;
  std::size_t samples = 0;   // canonical-rate length of the output
  double rrc_beta = 0.35;    // single-carrier RRC classes only
  std::uint64_t seed = 0;
};

enum class AudioKind { music, talk };

struct AudioSource {
  AudioKind kind = AudioKind::music;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Real audio in [-1, 1], bandlimited to kAudioBandLimit cycles/sample.
std::vector<double> synthesize_audio(const AudioSource& src);

/// Waveform plus the transmitted symbols, for loopback checks.
/// For linear classes, `signal[k * sps] / gain` after matched filtering
/// equals `symbols[k]`.
struct ModulatedBurst {
  ComplexBuffer signal;
  std::vector<cf64> symbols;
  double gain = 1.0;
  int sps = 1;
};

ModulatedBurst modulate_detailed(const BurstSpec& spec);

/// Canonical-rate burst with unit average power.
ComplexBuffer modulate(const BurstSpec& spec);

ComplexBuffer modulate_analog(ModulationClass m, const AudioSource& audio);
ComplexBuffer modulate_analog(ModulationClass m, std::span<const double> audio);

/// Constellation point for a symbol index (unit average energy, Gray
/// coded for QAM). Only for PSK/QAM/OOK.
cf64 constellation_point(ModulationClass m, std::size_t index);
std::size_t constellation_size(ModulationClass m);

/// Closed interval of normalized frequency.
struct Band {
  double low = 0.0;
  double high = 0.0;
  double width() const noexcept { return high - low; }
  double center() const noexcept { return 0.5 * (low + high); }
};

/// Interval holding `fraction` of the energy with equal tails on each side,
/// from a Hann-windowed averaged periodogram.
Band measure_occupied_band(std::span<const cf64> samples, double fraction = 0.99);

/// Occupied band of the canonical waveform when it follows from the
/// generative parameters (RRC classes: (1+beta) * symbol rate; OFDM: the
/// active subcarriers). nullopt for classes that must be measured.
std::optional<Band> nominal_band(ModulationClass m, double rrc_beta) noexcept;

}  // namespace wbsr
