#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "wbsr/error.hpp"
#include "wbsr/modulators.hpp"

using namespace wbsr;

namespace {

cf64 dtft(std::span<const cf64> x, double f) {
  cf64 acc{};
  for (std::size_t n = 0; n < x.size(); ++n) acc += x[n] * std::polar(1.0, -2.0 * kPi * f * static_cast<double>(n));
  return acc;
}

// Matched-filter samples at the symbol instants, divided by the burst gain.
std::vector<cf64> matched_symbols(const ModulatedBurst& b, double beta) {
  const FilterTaps rrc = design_rrc(beta, b.sps, kRrcSpanSymbols);
  const auto mf = convolve(b.signal.samples, rrc.taps);
  std::vector<cf64> out;
  for (std::size_t k = 0; k < b.symbols.size(); ++k) {
    const std::size_t i = rrc.delay + k * static_cast<std::size_t>(b.sps);
    if (i >= mf.size()) break;
    out.push_back(mf[i] / b.gain);
  }
  return out;
}

std::size_t nearest(ModulationClass m, cf64 v) {
  std::size_t best = 0;
  double dist = 1e300;
  for (std::size_t i = 0; i < constellation_size(m); ++i) {
    const double d = std::norm(v - constellation_point(m, i));
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("modulation names round trip") {
  CHECK(kAllModulations.size() == 14);
  std::set<std::string_view> names;
  for (auto m : kAllModulations) {
    names.insert(to_string(m));
    auto back = modulation_from_string(to_string(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
  CHECK(names.size() == 14);
  CHECK_FALSE(modulation_from_string("QPSK").has_value());
  CHECK(to_string(ModulationClass::AM_SSB) == "AM_SSB");
}

TEST_CASE("every class has unit average power and is deterministic") {
  for (auto m : kAllModulations) {
    CAPTURE(to_string(m));
    BurstSpec spec{m, 20000, 0.35, 99};
    auto a = modulate(spec);
    CHECK(a.size() == 20000);
    CHECK(all_finite(a.samples));
    CHECK(std::abs(mean_power(a.samples) - 1.0) < 0.01);
    CHECK(modulate(spec).samples == a.samples);
    spec.seed = 100;
    CHECK(modulate(spec).samples != a.samples);
  }
}

TEST_CASE("linear classes loop back through the matched filter") {
  for (auto m : {ModulationClass::PSK2, ModulationClass::PSK4, ModulationClass::PSK8, ModulationClass::QAM16,
                 ModulationClass::QAM64, ModulationClass::QAM256, ModulationClass::OOK}) {
    for (double beta : {0.05, 0.35, 1.0}) {
      CAPTURE(to_string(m));
      CAPTURE(beta);
      auto b = modulate_detailed({m, 4000, beta, 7});
      CHECK(b.sps == 2);
      auto mf = matched_symbols(b, beta);
      // Skip symbols whose matched-filter window is truncated by the burst edges.
      const std::size_t guard = kRrcSpanSymbols;
      std::size_t errors = 0, checked = 0;
      for (std::size_t k = guard; k + guard < mf.size(); ++k, ++checked) {
        if (nearest(m, mf[k]) != nearest(m, b.symbols[k])) ++errors;
      }
      CHECK(checked > 1000);
      CHECK(errors == 0);
    }
  }
}

TEST_CASE("OOK matched-filter magnitudes form two clusters") {
  auto b = modulate_detailed({ModulationClass::OOK, 8000, 0.5, 3});
  auto mf = matched_symbols(b, 0.5);
  std::size_t low = 0, high = 0;
  for (std::size_t k = kRrcSpanSymbols; k + kRrcSpanSymbols < mf.size(); ++k) {
    const double mag = std::abs(mf[k]);
    if (mag < 0.05 * std::sqrt(2.0)) {
      ++low;
    } else if (std::abs(mag - std::sqrt(2.0)) < 0.05 * std::sqrt(2.0)) {
      ++high;
    } else {
      FAIL("magnitude " << mag << " in neither cluster");
    }
  }
  CHECK(low > 1000);
  CHECK(high > 1000);
}

TEST_CASE("GMSK has a constant envelope") {
  auto x = modulate({ModulationClass::GMSK, 50000, 0.35, 5});
  const double ref = std::abs(x.samples[0]);
  for (auto v : x.samples) CHECK(std::abs(std::abs(v) - ref) / ref < 1e-6);
}

TEST_CASE("FSK instantaneous frequency has exactly 2 or 4 modes") {
  for (auto [m, order] : {std::pair{ModulationClass::FSK2, 2}, std::pair{ModulationClass::FSK4, 4}}) {
    auto b = modulate_detailed({m, 40000, 0.35, 8});
    std::map<long long, std::size_t> modes;
    for (std::size_t n = 0; n + 1 < b.signal.size(); ++n) {
      const double f = std::arg(b.signal.samples[n + 1] * std::conj(b.signal.samples[n])) / (2.0 * kPi);
      modes[std::llround(f * 1e6)]++;
    }
    CHECK(modes.size() == static_cast<std::size_t>(order));
    for (auto [key, count] : modes) {
      const double f = static_cast<double>(key) * 1e-6;
      // tones sit at odd multiples of h / (2 sps)
      const double unit = kFskIndex / (2.0 * b.sps);
      const double level = f / unit;
      CHECK(std::abs(level - std::round(level)) < 1e-4);
      CHECK(std::abs(std::lround(level)) % 2 == 1);
      CHECK(count > 1000);
    }
  }
}

TEST_CASE("symbols are uniform over the constellation") {
  for (auto m : {ModulationClass::QAM16, ModulationClass::PSK8, ModulationClass::QAM64}) {
    auto b = modulate_detailed({m, 200000, 0.35, 1234});
    const std::size_t n = b.symbols.size();
    REQUIRE(n >= 100000);
    std::vector<std::size_t> counts(constellation_size(m), 0);
    for (auto s : b.symbols) counts[nearest(m, s)]++;
    const double p = 1.0 / static_cast<double>(counts.size());
    const double expect = p * static_cast<double>(n);
    const double se = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
    for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - expect) < 3.0 * se);
  }
}

TEST_CASE("QAM constellations have unit energy and Gray neighbours") {
  for (auto m : {ModulationClass::QAM16, ModulationClass::QAM64, ModulationClass::QAM256, ModulationClass::PSK8}) {
    const std::size_t order = constellation_size(m);
    double e = 0.0;
    for (std::size_t i = 0; i < order; ++i) e += std::norm(constellation_point(m, i));
    CHECK(e / static_cast<double>(order) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Horizontally adjacent 16-QAM points differ in exactly one bit.
  const auto m = ModulationClass::QAM16;
  for (std::size_t a = 0; a < 16; ++a) {
    for (std::size_t b = a + 1; b < 16; ++b) {
      const double d = std::abs(constellation_point(m, a) - constellation_point(m, b));
      const double step = 2.0 / std::sqrt(10.0);
      if (std::abs(d - step) < 1e-9) CHECK(std::popcount(a ^ b) == 1);
    }
  }
  CHECK_THROWS_AS(constellation_size(ModulationClass::FM), Error);
}

TEST_CASE("OFDM has 512 active subcarriers") {
  const std::size_t period = kOfdmFftSize + kOfdmCyclicPrefix;
  auto x = modulate({ModulationClass::OFDM512, period * 20, 0.35, 2});
  std::vector<double> psd(kOfdmFftSize, 0.0);
  for (std::size_t s = 0; s < 20; ++s) {
    std::vector<cf64> frame(x.samples.begin() + static_cast<std::ptrdiff_t>(s * period + kOfdmCyclicPrefix),
                            x.samples.begin() + static_cast<std::ptrdiff_t>((s + 1) * period));
    fft_inplace(frame);
    for (std::size_t k = 0; k < kOfdmFftSize; ++k) psd[k] += std::norm(frame[k]);
  }
  const double peak = *std::max_element(psd.begin(), psd.end());
  std::size_t active = 0;
  for (double p : psd) active += p > 1e-6 * peak;
  CHECK(active == 512);
  // cyclic prefix repeats the symbol tail
  for (std::size_t i = 0; i < kOfdmCyclicPrefix; ++i) {
    CHECK(std::abs(x.samples[i] - x.samples[i + kOfdmFftSize]) < 1e-12);
  }
  auto band = nominal_band(ModulationClass::OFDM512, 0.0);
  REQUIRE(band.has_value());
  CHECK(band->width() == doctest::Approx(512.0 / 640.0));
}

TEST_CASE("AM-SSB suppresses the lower sideband") {
  const std::size_t n = 10000;
  std::vector<double> audio(n);
  for (std::size_t i = 0; i < n; ++i) audio[i] = std::cos(2.0 * kPi * 0.01 * static_cast<double>(i));
  auto x = modulate_analog(ModulationClass::AM_SSB, audio);
  const double upper = std::norm(dtft(x.samples, 0.01));
  const double lower = std::norm(dtft(x.samples, -0.01));
  CHECK(10.0 * std::log10(upper / std::max(lower, 1e-300)) >= 40.0);
}

TEST_CASE("AM-DSB with a tone has a carrier and symmetric sidebands") {
  const std::size_t n = 10000;
  std::vector<double> audio(n);
  for (std::size_t i = 0; i < n; ++i) audio[i] = std::cos(2.0 * kPi * 0.02 * static_cast<double>(i));
  auto x = modulate_analog(ModulationClass::AM_DSB, audio);
  const double carrier = std::abs(dtft(x.samples, 0.0));
  const double up = std::abs(dtft(x.samples, 0.02));
  const double lo = std::abs(dtft(x.samples, -0.02));
  CHECK(up == doctest::Approx(lo).epsilon(1e-9));
  CHECK(up / carrier == doctest::Approx(kAmIndex / 2.0).epsilon(1e-9));
}

TEST_CASE("FM with silent audio is a constant-increment tone") {
  std::vector<double> silence(5000, 0.0);
  auto x = modulate_analog(ModulationClass::FM, silence);
  const cf64 step = x.samples[1] / x.samples[0];
  for (std::size_t i = 1; i < x.size(); ++i) CHECK(std::abs(x.samples[i] / x.samples[i - 1] - step) < 1e-12);
  CHECK(std::abs(x.samples[0]) == doctest::Approx(1.0));
}

TEST_CASE("FM deviation follows the audio") {
  std::vector<double> audio(4000, 1.0);
  auto x = modulate_analog(ModulationClass::FM, audio);
  for (std::size_t n = 1; n < x.size(); ++n) {
    CHECK(std::arg(x.samples[n] * std::conj(x.samples[n - 1])) / (2 * kPi) == doctest::Approx(kFmDeviation).epsilon(1e-9));
  }
}

TEST_CASE("modulate_analog rejects digital classes") {
  std::vector<double> audio(100, 0.0);
  CHECK_THROWS_AS(modulate_analog(ModulationClass::PSK4, audio), Error);
  CHECK_THROWS_AS(modulate_analog(ModulationClass::GMSK, AudioSource{AudioKind::music, 100, 1}), Error);
  try {
    modulate_analog(ModulationClass::QAM16, audio);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parameter);
  }
  CHECK_THROWS_AS(modulate({ModulationClass::PSK4, 0, 0.35, 1}), Error);
}

TEST_CASE("synthetic audio is bounded and bandlimited") {
  for (auto kind : {AudioKind::music, AudioKind::talk}) {
    auto a = synthesize_audio({kind, 1 << 16, 17});
    double peak = 0.0;
    for (double v : a) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0);
    CHECK(peak > 0.5);
    std::vector<cf64> c(a.begin(), a.end());
    auto band = measure_occupied_band(c, 0.999);
    CHECK(band.high <= kAudioBandLimit + 0.01);
    CHECK(band.low >= -kAudioBandLimit - 0.01);
    CHECK(synthesize_audio({kind, 1 << 16, 17}) == a);
  }
}

TEST_CASE("measured band of an RRC burst matches (1 + beta) / sps") {
  auto x = modulate({ModulationClass::PSK4, 1 << 16, 0.35, 4});
  auto band = measure_occupied_band(x.samples);
  CHECK(band.center() == doctest::Approx(0.0).epsilon(0.01));
  // 99% of the energy sits between the symbol rate and the (1 + beta) edge
  CHECK(band.width() >= 0.5);
  CHECK(band.width() <= 1.35 / 2.0);
  auto nom = nominal_band(ModulationClass::PSK4, 0.35);
  REQUIRE(nom.has_value());
  CHECK(nom->width() == doctest::Approx(0.675));
  CHECK_FALSE(nominal_band(ModulationClass::FM, 0.35).has_value());
}
