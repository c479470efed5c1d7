#include "wbsr/modulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wbsr/error.hpp"

namespace wbsr {

namespace {

constexpr std::array<std::string_view, 14> kNames = {
    "PSK2", "PSK4", "PSK8", "QAM16", "QAM64", "QAM256", "OFDM512",
    "FSK2", "FSK4", "GMSK", "OOK",   "AM_DSB", "AM_SSB", "FM",
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::size_t gray_to_binary(std::size_t g) {
  std::size_t b = g;
  for (std::size_t shift = 1; shift < 8 * sizeof(std::size_t); shift <<= 1) b ^= b >> shift;
  return b;
}

void normalize_power(ComplexBuffer& buf, double& gain) {
  const double p = mean_power(buf.samples);
  gain = p > 0.0 ? 1.0 / std::sqrt(p) : 1.0;
  for (auto& v : buf.samples) v *= gain;
}

ModulatedBurst linear_burst(const BurstSpec& spec, Rng& rng) {
  constexpr int sps = 2;
  const std::size_t pad = kRrcSpanSymbols / 2;
  const std::size_t visible = ceil_div(spec.samples, sps);
  const std::size_t total = visible + 2 * pad;
  const std::size_t order = constellation_size(spec.modulation);

  std::vector<cf64> symbols(total);
  for (auto& s : symbols) {
    s = constellation_point(spec.modulation, static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(order) - 1)));
  }
  std::vector<cf64> upsampled(total * sps);
  for (std::size_t k = 0; k < total; ++k) upsampled[k * sps] = symbols[k];

  const FilterTaps rrc = design_rrc(spec.rrc_beta, sps, kRrcSpanSymbols);
  const std::vector<cf64> shaped = convolve(upsampled, rrc.taps);

  ModulatedBurst out;
  out.sps = sps;
  const std::size_t first = pad * sps + rrc.delay;
  out.signal.samples.assign(shaped.begin() + static_cast<std::ptrdiff_t>(first),
                            shaped.begin() + static_cast<std::ptrdiff_t>(first + spec.samples));
  out.symbols.assign(symbols.begin() + static_cast<std::ptrdiff_t>(pad),
                     symbols.begin() + static_cast<std::ptrdiff_t>(pad + visible));
  normalize_power(out.signal, out.gain);
  return out;
}

// Continuous-phase modulation from a per-sample instantaneous frequency
// (cycles/sample). Constant envelope by construction.
ComplexBuffer integrate_phase(std::span<const double> freq) {
  ComplexBuffer out;
  out.samples.resize(freq.size());
  double cycles = 0.0;
  for (std::size_t n = 0; n < freq.size(); ++n) {
    const double phase = 2.0 * kPi * cycles;
    out.samples[n] = {std::cos(phase), std::sin(phase)};
    cycles += freq[n];
    cycles -= std::floor(cycles);
  }
  return out;
}

ModulatedBurst fsk_burst(const BurstSpec& spec, Rng& rng) {
  const int sps = canonical_sps(spec.modulation);
  const int order = spec.modulation == ModulationClass::FSK2 ? 2 : 4;
  const std::size_t count = ceil_div(spec.samples, static_cast<std::size_t>(sps));
  ModulatedBurst out;
  out.sps = sps;
  std::vector<double> freq(count * sps);
  for (std::size_t k = 0; k < count; ++k) {
    const auto idx = rng.uniform_int(0, order - 1);
    const double level = 2.0 * static_cast<double>(idx) - (order - 1);  // ±1 or ±1, ±3
    out.symbols.emplace_back(level, 0.0);
    const double f = level * kFskIndex / (2.0 * sps);
    std::fill_n(freq.begin() + static_cast<std::ptrdiff_t>(k * sps), sps, f);
  }
  freq.resize(spec.samples);
  out.signal = integrate_phase(freq);
  return out;
}

ModulatedBurst gmsk_burst(const BurstSpec& spec, Rng& rng) {
  const int sps = canonical_sps(spec.modulation);
  constexpr std::size_t span = 4;
  const std::size_t pad = span;
  const std::size_t visible = ceil_div(spec.samples, static_cast<std::size_t>(sps));
  const std::size_t total = visible + 2 * pad;

  std::vector<cf64> nrz(total * sps);
  ModulatedBurst out;
  out.sps = sps;
  for (std::size_t k = 0; k < total; ++k) {
    const double bit = rng.uniform_int(0, 1) ? 1.0 : -1.0;
    if (k >= pad && k < pad + visible) out.symbols.emplace_back(bit, 0.0);
    std::fill_n(nrz.begin() + static_cast<std::ptrdiff_t>(k * sps), sps, cf64{bit, 0.0});
  }
  const FilterTaps g = design_gaussian(kGmskBt, sps, static_cast<int>(span));
  const std::vector<cf64> shaped = convolve(nrz, g.taps);
  std::vector<double> freq(spec.samples);
  const std::size_t first = pad * sps + g.delay;
  for (std::size_t n = 0; n < spec.samples; ++n) {
    freq[n] = shaped[first + n].real() * kGmskIndex / (2.0 * sps);
  }
  out.signal = integrate_phase(freq);
  return out;
}

ModulatedBurst ofdm_burst(const BurstSpec& spec, Rng& rng) {
  const std::size_t period = kOfdmFftSize + kOfdmCyclicPrefix;
  const std::size_t count = ceil_div(spec.samples, period);
  const double qpsk = 1.0 / std::sqrt(2.0);
  const auto half = static_cast<std::ptrdiff_t>(kOfdmSubcarriers / 2);
  const auto nfft = static_cast<std::ptrdiff_t>(kOfdmFftSize);

  ModulatedBurst out;
  out.signal.samples.reserve(count * period);
  std::vector<cf64> bins;
  for (std::size_t s = 0; s < count; ++s) {
    bins.assign(kOfdmFftSize, cf64{});
    for (std::ptrdiff_t k = -half; k < half; ++k) {
      const cf64 sym{rng.uniform_int(0, 1) ? qpsk : -qpsk, rng.uniform_int(0, 1) ? qpsk : -qpsk};
      bins[static_cast<std::size_t>((k + nfft) % nfft)] = sym;
      out.symbols.push_back(sym);
    }
    fft_inplace(bins, true);
    out.signal.samples.insert(out.signal.samples.end(), bins.end() - static_cast<std::ptrdiff_t>(kOfdmCyclicPrefix), bins.end());
    out.signal.samples.insert(out.signal.samples.end(), bins.begin(), bins.end());
  }
  out.signal.samples.resize(spec.samples);
  return out;
}

std::vector<double> bandpass_taps(double f_lo, double f_hi, int length) {
  std::vector<double> taps(static_cast<std::size_t>(length));
  const double mid = (length - 1) / 2.0;
  auto lowpass = [](double fc, double t) {
    return std::abs(t) < 1e-12 ? 2.0 * fc : std::sin(2.0 * kPi * fc * t) / (kPi * t);
  };
  for (int n = 0; n < length; ++n) {
    const double t = n - mid;
    const double w = 0.54 - 0.46 * std::cos(2.0 * kPi * n / (length - 1));
    taps[static_cast<std::size_t>(n)] = (lowpass(f_hi, t) - lowpass(f_lo, t)) * w;
  }
  return taps;
}

void normalize_peak(std::vector<double>& audio) {
  double peak = 0.0;
  for (double v : audio) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : audio) v /= peak;
  }
}

}  // namespace

std::string_view to_string(ModulationClass m) noexcept { return kNames[static_cast<std::size_t>(m)]; }

std::optional<ModulationClass> modulation_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<ModulationClass>(i);
  }
  return std::nullopt;
}

bool is_analog(ModulationClass m) noexcept {
  return m == ModulationClass::AM_DSB || m == ModulationClass::AM_SSB || m == ModulationClass::FM;
}

bool is_rrc_shaped(ModulationClass m) noexcept {
  switch (m) {
    case ModulationClass::PSK2:
    case ModulationClass::PSK4:
    case ModulationClass::PSK8:
    case ModulationClass::QAM16:
    case ModulationClass::QAM64:
    case ModulationClass::QAM256:
    case ModulationClass::OOK:
      return true;
    default:
      return false;
  }
}

int canonical_sps(ModulationClass m) noexcept {
  if (is_rrc_shaped(m)) return 2;
  if (m == ModulationClass::FSK2 || m == ModulationClass::FSK4 || m == ModulationClass::GMSK) return 8;
  return 1;
}

std::size_t constellation_size(ModulationClass m) {
  switch (m) {
    case ModulationClass::PSK2: return 2;
    case ModulationClass::PSK4: return 4;
    case ModulationClass::PSK8: return 8;
    case ModulationClass::QAM16: return 16;
    case ModulationClass::QAM64: return 64;
    case ModulationClass::QAM256: return 256;
    case ModulationClass::OOK: return 2;
    default:
      throw Error(ErrorKind::parameter, "constellation_size: " + std::string(to_string(m)) + " has no constellation");
  }
}

cf64 constellation_point(ModulationClass m, std::size_t index) {
  const std::size_t order = constellation_size(m);
  if (index >= order) throw Error(ErrorKind::parameter, "constellation_point: index out of range");
  switch (m) {
    case ModulationClass::PSK2:
    case ModulationClass::PSK4:
    case ModulationClass::PSK8: {
      const double offset = m == ModulationClass::PSK4 ? kPi / 4.0 : 0.0;
      const double phase = 2.0 * kPi * static_cast<double>(index) / static_cast<double>(order) + offset;
      return std::polar(1.0, phase);
    }
    case ModulationClass::OOK:
      return index == 0 ? cf64{0.0, 0.0} : cf64{std::sqrt(2.0), 0.0};
    default: {
      const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(order))));
      const std::size_t bits = static_cast<std::size_t>(std::lround(std::log2(static_cast<double>(side))));
      const std::size_t i_level = gray_to_binary(index >> bits);
      const std::size_t q_level = gray_to_binary(index & (side - 1));
      const double norm = std::sqrt(2.0 * (static_cast<double>(order) - 1.0) / 3.0);
      const double offset = static_cast<double>(side) - 1.0;
      return cf64{(2.0 * static_cast<double>(i_level) - offset) / norm, (2.0 * static_cast<double>(q_level) - offset) / norm};
    }
  }
}

std::vector<double> synthesize_audio(const AudioSource& src) {
  Rng rng(src.seed);
  std::vector<double> audio(src.samples, 0.0);
  if (src.samples == 0) return audio;

  if (src.kind == AudioKind::music) {
    const auto voices = rng.uniform_int(3, 8);
    for (std::int64_t v = 0; v < voices; ++v) {
      const double freq = std::exp(rng.uniform(std::log(0.002), std::log(0.08)));
      const double amp = rng.uniform(0.2, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double env_freq = std::exp(rng.uniform(std::log(1e-5), std::log(1e-4)));
      const double env_phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t n = 0; n < src.samples; ++n) {
        const double t = static_cast<double>(n);
        const double env = 1.0 + 0.5 * std::sin(2.0 * kPi * env_freq * t + env_phase);
        audio[n] += amp * env * std::sin(2.0 * kPi * freq * t + phase);
      }
    }
  } else {
    // Voice-band filtered noise gated into utterances and pauses.
    constexpr int kTaps = 255;
    const std::vector<double> bp = bandpass_taps(0.003, 0.06, kTaps);
    std::vector<cf64> noise(src.samples + kTaps - 1);
    for (auto& v : noise) v = {rng.normal(), 0.0};
    const std::vector<cf64> filtered = convolve(noise, bp);
    std::vector<double> gate(src.samples, 0.0);
    constexpr std::size_t kRamp = 200;
    std::size_t pos = 0;
    bool talking = rng.uniform() < 0.7;
    while (pos < src.samples) {
      const auto len = static_cast<std::size_t>(talking ? rng.uniform_int(2000, 20000) : rng.uniform_int(500, 5000));
      const std::size_t end = std::min(src.samples, pos + len);
      if (talking) {
        for (std::size_t n = pos; n < end; ++n) {
          const std::size_t edge = std::min(n - pos, end - 1 - n);
          gate[n] = edge >= kRamp ? 1.0 : 0.5 - 0.5 * std::cos(kPi * static_cast<double>(edge) / kRamp);
        }
      }
      pos = end;
      talking = !talking;
    }
    for (std::size_t n = 0; n < src.samples; ++n) audio[n] = filtered[n + kTaps - 1].real() * gate[n];
  }
  normalize_peak(audio);
  return audio;
}

ComplexBuffer modulate_analog(ModulationClass m, std::span<const double> audio) {
  ComplexBuffer out;
  out.samples.resize(audio.size());
  switch (m) {
    case ModulationClass::AM_DSB:
      for (std::size_t n = 0; n < audio.size(); ++n) out.samples[n] = {1.0 + kAmIndex * audio[n], 0.0};
      break;
    case ModulationClass::AM_SSB: {
      // Analytic signal: keep DC and Nyquist, double positive bins, zero negative.
      std::vector<cf64> spec(audio.begin(), audio.end());
      fft_inplace(spec);
      const std::size_t n = spec.size();
      for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n) {
          spec[k] *= 2.0;
        } else if (2 * k > n) {
          spec[k] = 0.0;
        }
      }
      fft_inplace(spec, true);
      for (std::size_t k = 0; k < n; ++k) out.samples[k] = spec[k] / static_cast<double>(n);
      break;
    }
    case ModulationClass::FM: {
      std::vector<double> freq(audio.begin(), audio.end());
      for (double& f : freq) f *= kFmDeviation;
      out = integrate_phase(freq);
      break;
    }
    default:
      throw Error(ErrorKind::parameter, "modulate_analog: " + std::string(to_string(m)) + " is not an analog class");
  }
  double gain = 1.0;
  normalize_power(out, gain);
  return out;
}

ComplexBuffer modulate_analog(ModulationClass m, const AudioSource& audio) {
  if (!is_analog(m)) {
    throw Error(ErrorKind::parameter, "modulate_analog: " + std::string(to_string(m)) + " is not an analog class");
  }
  return modulate_analog(m, synthesize_audio(audio));
}

ModulatedBurst modulate_detailed(const BurstSpec& spec) {
  if (spec.samples == 0) throw Error(ErrorKind::parameter, "modulate: burst length must be positive");
  Rng rng(spec.seed);
  ModulatedBurst out;
  if (is_rrc_shaped(spec.modulation)) {
    if (!(spec.rrc_beta >= 0.0 && spec.rrc_beta <= 1.0)) throw Error(ErrorKind::parameter, "modulate: rrc_beta must be in [0, 1]");
    return linear_burst(spec, rng);
  }
  switch (spec.modulation) {
    case ModulationClass::FSK2:
    case ModulationClass::FSK4:
      out = fsk_burst(spec, rng);
      break;
    case ModulationClass::GMSK:
      out = gmsk_burst(spec, rng);
      break;
    case ModulationClass::OFDM512:
      out = ofdm_burst(spec, rng);
      break;
    case ModulationClass::AM_DSB:
    case ModulationClass::AM_SSB:
    case ModulationClass::FM: {
      AudioSource src;
      src.kind = rng.uniform() < 0.5 ? AudioKind::music : AudioKind::talk;
      src.samples = spec.samples;
      src.seed = rng.next_u64();
      out.signal = modulate_analog(spec.modulation, src);
      return out;
    }
    default:
      throw Error(ErrorKind::parameter, "modulate: unsupported class " + std::string(to_string(spec.modulation)));
  }
  normalize_power(out.signal, out.gain);
  return out;
}

ComplexBuffer modulate(const BurstSpec& spec) { return modulate_detailed(spec).signal; }

Band measure_occupied_band(std::span<const cf64> samples, double fraction) {
  if (samples.empty()) return {};
  std::size_t nfft = 1024;
  while (nfft > 64 && nfft > samples.size()) nfft /= 2;
  std::vector<double> window(nfft);
  for (std::size_t n = 0; n < nfft; ++n) window[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(nfft));

  std::vector<double> psd(nfft, 0.0);
  std::vector<cf64> frame(nfft);
  const std::size_t hop = nfft / 2;
  for (std::size_t start = 0;; start += hop) {
    for (std::size_t n = 0; n < nfft; ++n) {
      const std::size_t i = start + n;
      frame[n] = i < samples.size() ? samples[i] * window[n] : cf64{};
    }
    fft_inplace(frame);
    fftshift(frame);
    for (std::size_t k = 0; k < nfft; ++k) psd[k] += std::norm(frame[k]);
    if (start + nfft >= samples.size()) break;
  }
  const double total = std::accumulate(psd.begin(), psd.end(), 0.0);
  if (total <= 0.0) return {};
  const double tail = 0.5 * (1.0 - fraction) * total;
  const double bin = 1.0 / static_cast<double>(nfft);
  auto freq_of = [&](std::size_t k) { return -0.5 + static_cast<double>(k) * bin; };

  std::size_t lo = 0;
  for (double acc = 0.0; lo < nfft; ++lo) {
    acc += psd[lo];
    if (acc > tail) break;
  }
  std::size_t hi = nfft - 1;
  for (double acc = 0.0; hi > 0; --hi) {
    acc += psd[hi];
    if (acc > tail) break;
  }
  if (hi < lo) std::swap(lo, hi);
  return Band{freq_of(lo) - 0.5 * bin, freq_of(hi) + 0.5 * bin};
}

std::optional<Band> nominal_band(ModulationClass m, double rrc_beta) noexcept {
  if (is_rrc_shaped(m)) {
    const double half = 0.5 * (1.0 + rrc_beta) / canonical_sps(m);
    return Band{-half, half};
  }
  if (m == ModulationClass::OFDM512) {
    const double half = 0.5 * static_cast<double>(kOfdmSubcarriers) / static_cast<double>(kOfdmFftSize);
    return Band{-half, half};
  }
  return std::nullopt;
}

}  // namespace wbsr
