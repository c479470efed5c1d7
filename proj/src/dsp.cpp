#include "wbsr/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "wbsr/error.hpp"

namespace wbsr {

bool all_finite(std::span<const cf64> samples) noexcept {
  return std::all_of(samples.begin(), samples.end(), [](const cf64& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

double mean_power(std::span<const cf64> samples) noexcept {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : samples) acc += std::norm(v);
  return acc / static_cast<double>(samples.size());
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// FFTW planning is not thread-safe; execution on a finished plan is.
// Plans are created once per (size, direction) and kept for the process.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, bool inverse) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_pair(n, inverse);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_complex* scratch = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch,
                                      inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, bool>, fftw_plan> plans_;
};

}  // namespace

void fft_inplace(std::vector<cf64>& data, bool inverse) {
  if (data.empty()) return;
  fftw_plan plan = PlanCache::instance().get(data.size(), inverse);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, ptr, ptr);
}

std::vector<std::vector<cf64>> dft(const ComplexBuffer& buf, std::size_t size) {
  if (size < 2) throw Error(ErrorKind::parameter, "dft: size must be >= 2");
  if (buf.size() < size) {
    throw Error(ErrorKind::empty_input, "dft: buffer of " + std::to_string(buf.size()) +
                                            " samples is shorter than one " +
                                            std::to_string(size) + "-sample chunk");
  }
  const std::size_t frames = buf.size() / size;
  std::vector<std::vector<cf64>> out(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto& frame = out[f];
    frame.assign(buf.samples.begin() + static_cast<std::ptrdiff_t>(f * size),
                 buf.samples.begin() + static_cast<std::ptrdiff_t>((f + 1) * size));
    fft_inplace(frame);
    fftshift(frame);
  }
  return out;
}

double rrc_impulse(double beta, double t) noexcept {
  if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / kPi;
  if (beta > 0.0) {
    const double edge = 4.0 * beta * t;
    if (std::abs(1.0 - edge * edge) < 1e-9) {
      const double a = kPi / (4.0 * beta);
      return beta / std::sqrt(2.0) *
             ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
  }
  const double num = std::sin(kPi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
  const double den = kPi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
  return num / den;
}

FilterTaps design_rrc(double beta, double sps, int span) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::parameter, "design_rrc: beta must be in [0, 1]");
  if (!(sps >= 1.0)) throw Error(ErrorKind::parameter, "design_rrc: sps must be >= 1");
  if (span < 4) throw Error(ErrorKind::parameter, "design_rrc: span must be >= 4 symbols");

  const auto half = static_cast<std::size_t>(std::ceil(span * sps / 2.0));
  FilterTaps out;
  out.delay = half;
  out.taps.resize(2 * half + 1);
  double energy = 0.0;
  for (std::size_t n = 0; n <= half; ++n) {
    const double v = rrc_impulse(beta, static_cast<double>(n) / sps);
    out.taps[half + n] = v;
    out.taps[half - n] = v;
    energy += (n == 0 ? 1.0 : 2.0) * v * v;
  }
  const double norm = 1.0 / std::sqrt(energy);
  for (auto& v : out.taps) v *= norm;
  return out;
}

FilterTaps design_gaussian(double bt, int sps, int span) {
  if (!(bt > 0.0)) throw Error(ErrorKind::parameter, "design_gaussian: bt must be > 0");
  if (sps < 1 || span < 1) throw Error(ErrorKind::parameter, "design_gaussian: sps and span must be >= 1");
  const auto half = static_cast<std::size_t>(span * sps / 2);
  FilterTaps out;
  out.delay = half;
  out.taps.resize(2 * half + 1);
  const double k = 2.0 * kPi * kPi * bt * bt / std::log(2.0);
  double sum = 0.0;
  for (std::size_t n = 0; n < out.taps.size(); ++n) {
    const double t = (static_cast<double>(n) - static_cast<double>(half)) / sps;
    out.taps[n] = std::exp(-k * t * t);
    sum += out.taps[n];
  }
  for (auto& v : out.taps) v /= sum;
  return out;
}

std::vector<cf64> convolve(std::span<const cf64> x, std::span<const double> taps) {
  if (x.empty() || taps.empty()) return {};
  std::vector<cf64> y(x.size() + taps.size() - 1);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const cf64 v = x[n];
    if (v == cf64{}) continue;
    for (std::size_t k = 0; k < taps.size(); ++k) y[n + k] += v * taps[k];
  }
  return y;
}

namespace {

constexpr int kTapsPerPhase = 32;
constexpr int kPhases = 128;
constexpr double kCutoff = 0.47;       // cycles/sample of the slower rate
constexpr double kKaiserBeta = 6.76;   // ~70 dB stopband

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Prototype lowpass sampled at kPhases points per input sample over
// [-kTapsPerPhase/2, kTapsPerPhase/2]; each polyphase branch sums to one.
struct Prototype {
  std::vector<double> table;

  Prototype() {
    constexpr int half = kTapsPerPhase / 2;
    const int n = kTapsPerPhase * kPhases + 1;
    table.resize(n);
    const double i0b = bessel_i0(kKaiserBeta);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / kPhases - half;
      const double x = 2.0 * kCutoff * t;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      const double r = t / half;
      const double w = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
      table[i] = 2.0 * kCutoff * sinc * w;
    }
    for (int p = 0; p < kPhases; ++p) {
      double sum = 0.0;
      for (int i = p; i < n; i += kPhases) sum += table[i];
      for (int i = p; i < n; i += kPhases) table[i] /= sum;
    }
    table[n - 1] = table[0];
  }

  // t in input samples scaled to the prototype axis.
  double at(double t) const {
    const double u = (t + kTapsPerPhase / 2) * kPhases;
    if (u <= 0.0 || u >= static_cast<double>(table.size() - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(u);
    const double frac = u - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
  }
};

const Prototype& prototype() {
  static const Prototype proto;
  return proto;
}

}  // namespace

ComplexBuffer resample(const ComplexBuffer& buf, double ratio) {
  if (!(ratio >= 1.0 / 64.0 && ratio <= 64.0)) {
    throw Error(ErrorKind::parameter, "resample: ratio " + std::to_string(ratio) + " outside [1/64, 64]");
  }
  ComplexBuffer out;
  out.sample_rate = buf.sample_rate * ratio;
  if (ratio == 1.0) {
    out.samples = buf.samples;
    return out;
  }
  const auto n_in = static_cast<std::ptrdiff_t>(buf.size());
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));
  out.samples.assign(n_out, cf64{});
  if (n_in == 0) return out;

  const Prototype& proto = prototype();
  // Decimation stretches the prototype so its cutoff tracks the output rate.
  const double scale = std::min(1.0, ratio);
  const double reach = (kTapsPerPhase / 2) / scale;
  for (std::size_t m = 0; m < n_out; ++m) {
    const double x = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(x - reach)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(x + reach)));
    cf64 acc{};
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      acc += buf.samples[static_cast<std::size_t>(k)] * proto.at((x - static_cast<double>(k)) * scale);
    }
    out.samples[m] = acc * scale;
  }
  return out;
}

ComplexBuffer resample_any(const ComplexBuffer& buf, double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw Error(ErrorKind::parameter, "resample_any: ratio must be positive");
  const int stages = std::max(1, static_cast<int>(std::ceil(std::abs(std::log(ratio)) / std::log(64.0))));
  const double step = std::pow(ratio, 1.0 / stages);
  ComplexBuffer cur = resample(buf, step);
  for (int s = 1; s < stages; ++s) cur = resample(cur, step);
  return cur;
}

ComplexBuffer add_awgn(const ComplexBuffer& buf, double sigma, Rng& rng) {
  if (!std::isfinite(sigma)) throw Error(ErrorKind::parameter, "add_awgn: sigma must be finite");
  ComplexBuffer out = buf;
  if (sigma == 0.0) return out;
  const double component = std::abs(sigma) / std::sqrt(2.0);
  std::normal_distribution<double> gauss(0.0, component);
  auto& eng = rng.engine();
  for (auto& v : out.samples) {
    const double re = gauss(eng);
    const double im = gauss(eng);
    v += cf64{re, im};
  }
  return out;
}

void frequency_shift(std::span<cf64> samples, double freq, double offset) {
  if (freq == 0.0) return;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    // Reduce the phase argument before calling sin/cos to keep precision
    // over multi-million-sample records.
    const double cycles = freq * (static_cast<double>(n) + offset);
    const double phase = 2.0 * kPi * (cycles - std::floor(cycles));
    samples[n] *= cf64{std::cos(phase), std::sin(phase)};
  }
}

}  // namespace wbsr
