#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace wbsr {

using cf64 = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Complex baseband samples. `sample_rate` is metadata only; every
/// frequency inside the library is normalized to cycles/sample.
struct ComplexBuffer {
  std::vector<cf64> samples;
  double sample_rate = 1.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

/// Returns false if any sample is NaN or infinite.
bool all_finite(std::span<const cf64> samples) noexcept;

/// Mean of |x|^2; zero for an empty span.
double mean_power(std::span<const cf64> samples) noexcept;

/// SplitMix64 finalizer. Used to derive child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seedable, splittable generator. Draw sequences are reproducible for a
/// given seed within this build; no cross-implementation guarantee.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream. Depends only on (seed, stream), never on
  /// how many draws were made from this generator.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Non-overlapping chunked DFT. Each returned frame holds `size` bins in
/// fftshift order: index 0 is normalized frequency -0.5, index size/2 is DC.
/// Throws ErrorKind::empty_input if the buffer is shorter than one chunk.
std::vector<std::vector<cf64>> dft(const ComplexBuffer& buf, std::size_t size);

/// In-place unnormalized forward/inverse transform of arbitrary length
/// (natural bin order). Inverse is not scaled by 1/n.
void fft_inplace(std::vector<cf64>& data, bool inverse = false);

/// Rotates natural-order bins so the most negative frequency comes first.
template <typename T>
void fftshift(std::vector<T>& bins) {
  const std::size_t n = bins.size();
  std::vector<T> out(n);
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < n; ++k) out[(k + half) % n] = bins[k];
  bins.swap(out);
}

struct FilterTaps {
  std::vector<double> taps;
  std::size_t delay = 0;  // group delay in samples (center tap index)
};

/// Root-raised-cosine taps, unit energy, odd length. `span` is the filter
/// length in symbols; `sps` may be fractional.
FilterTaps design_rrc(double beta, double sps, int span);

/// Gaussian pulse-shaping taps for GMSK, normalized to unit DC gain.
FilterTaps design_gaussian(double bt, int sps, int span);

/// Closed-form RRC impulse response at time `t` in symbol periods.
double rrc_impulse(double beta, double t) noexcept;

/// Full linear convolution of complex samples with real taps.
std::vector<cf64> convolve(std::span<const cf64> x, std::span<const double> taps);

/// Arbitrary-ratio resampler (output rate = ratio * input rate). Polyphase
/// Kaiser-windowed sinc with linear interpolation between phases.
/// Ratio must lie in [1/64, 64].
ComplexBuffer resample(const ComplexBuffer& buf, double ratio);

/// Same contract but accepts any positive ratio by cascading stages.
ComplexBuffer resample_any(const ComplexBuffer& buf, double ratio);

/// Adds complex white Gaussian noise with total variance sigma^2 per sample.
ComplexBuffer add_awgn(const ComplexBuffer& buf, double sigma, Rng& rng);

/// Multiplies by exp(j*2*pi*freq*(n + offset)).
void frequency_shift(std::span<cf64> samples, double freq, double offset = 0.0);

}  // namespace wbsr
