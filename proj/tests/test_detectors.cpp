#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "test_util.hpp"
#include "wbsr/detectors.hpp"
#include "wbsr/error.hpp"
#include "wbsr/metrics.hpp"
#include "wbsr/scene.hpp"

using namespace wbsr;

namespace {

// Union-find partition of set cells, used as the clustering oracle.
struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<Cluster> oracle_components(const BinaryMask& m, int connectivity) {
  const std::size_t rows = m.geometry.frames, cols = m.geometry.bins;
  Dsu dsu(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!m.at(r, c)) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || (connectivity == 4 && dr != 0 && dc != 0)) continue;
          const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
          if (m.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)))
            dsu.unite(r * cols + c, static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc));
        }
      }
    }
  }
  // Roots are the smallest raster index of each set, so ordering by root
  // is ordering by first cell.
  std::map<std::size_t, Cluster> by_root;
  for (std::size_t i = 0; i < rows * cols; ++i)
    if (m.cells[i]) by_root[dsu.find(i)].emplace_back(i / cols, i % cols);
  std::vector<Cluster> out;
  for (auto& [root, cl] : by_root) out.push_back(std::move(cl));
  return out;
}

SpectralGrid grid_from(std::vector<double> values, GridGeometry g) {
  SpectralGrid s;
  s.geometry = g;
  s.values = std::move(values);
  s.std = 1.0;
  return s;
}

// Noise sigma giving the requested in-band SNR for a unit-power burst.
double sigma_for(double snr_db, double bandwidth) { return std::sqrt(1.0 / (bandwidth * std::pow(10.0, snr_db / 10.0))); }

ComplexBuffer noise_record(std::size_t samples, std::uint64_t seed, double sigma = 1.0) {
  ComplexBuffer z;
  z.samples.assign(samples, cf64{});
  Rng rng(seed);
  return add_awgn(z, sigma, rng);
}

SignalBurst burst(double center, std::size_t start, std::size_t dur, std::uint64_t seed) {
  SignalBurst b;
  b.label = ModulationClass::PSK4;
  b.center_freq = center;
  b.bandwidth = 0.1;
  b.start_sample = start;
  b.duration_samples = dur;
  b.rrc_beta = 0.35;
  b.burst_seed = seed;
  return b;
}

Detection det(TimeFreqBox box, std::size_t cells, double score = 1.0) { return Detection{box, score, cells, std::nullopt}; }

}  // namespace

TEST_CASE("noise floor of a constant grid is the constant") {
  GridGeometry g = GridGeometry::for_samples(64 * 8, 64);
  CHECK(estimate_noise_floor(grid_from(std::vector<double>(g.cells(), 2.5), g)) == 2.5);
}

TEST_CASE("noise floor matches the analytic median of the normalized distribution") {
  // For complex Gaussian noise ln|X| has mean (ln L - gamma)/2 and std pi/sqrt(24),
  // and |X|^2 has median L ln 2, so the normalized median is (ln ln 2 + gamma) sqrt(6)/pi.
  const double gamma = 0.57721566490153286;
  const double expected = (std::log(std::log(2.0)) + gamma) * std::sqrt(6.0) / kPi;
  auto grid = spectrogram(noise_record(512 * 128, 4));
  CHECK(std::abs(estimate_noise_floor(grid) - expected) < 0.05);
}

TEST_CASE("noise floor is robust to 10% elevated cells") {
  // Lifting a random 10% of cells moves the median to the 0.5/0.9 quantile
  // of the noise distribution; in normalized units that shift is
  // (ln(-ln(1 - 5/9)) - ln(ln 2)) sqrt(6)/pi ~ 0.122, against +1.0 for the mean.
  const double shift = (std::log(-std::log(1.0 - 5.0 / 9.0)) - std::log(std::log(2.0))) * std::sqrt(6.0) / kPi;
  auto grid = spectrogram(noise_record(512 * 256, 5));
  const double before = estimate_noise_floor(grid);
  std::vector<std::size_t> idx(grid.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(1);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  for (std::size_t i = 0; i < idx.size() / 10; ++i) grid.values[idx[i]] += 10.0;
  const double after = estimate_noise_floor(grid);
  CHECK(after - before == doctest::Approx(shift).epsilon(0.1));
  CHECK(after - before < 0.15);
}

TEST_CASE("threshold extremes") {
  auto grid = spectrogram(noise_record(512 * 4, 6));
  DetectorConfig cfg;
  cfg.threshold = std::numeric_limits<double>::infinity();
  CHECK(threshold_mask(grid, cfg).count() == 0);
  cfg.threshold = -std::numeric_limits<double>::infinity();
  CHECK(threshold_mask(grid, cfg).count() == grid.geometry.cells());
  cfg.threshold_mode = ThresholdMode::absolute;
  cfg.threshold = 0.0;
  std::size_t expected = 0;
  for (double v : grid.values) expected += v > 0.0;
  CHECK(threshold_mask(grid, cfg).count() == expected);
}

TEST_CASE("false-cell rate matches the exponential tail") {
  // A cell passes when |X|^2 > median * 10^(tau/10); for exponential |X|^2
  // that probability is 2^(-10^(tau/10)).
  auto grid = spectrogram(noise_record(512 * 256, 7));
  const double n = static_cast<double>(grid.geometry.cells());
  for (double tau : {0.0, 3.0, 6.0, 9.0}) {
    DetectorConfig cfg;
    cfg.threshold = tau;
    const double p = std::pow(2.0, -std::pow(10.0, tau / 10.0));
    const double got = static_cast<double>(threshold_mask(grid, cfg).count());
    CAPTURE(tau);
    CHECK(std::abs(got - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
  }
}

TEST_CASE("raising the threshold shrinks the mask pointwise") {
  auto grid = spectrogram(noise_record(512 * 32, 8));
  DetectorConfig cfg;
  BinaryMask prev = threshold_mask(grid, cfg);
  for (double tau = -3.0; tau <= 15.0; tau += 1.5) {
    cfg.threshold = tau;
    auto m = threshold_mask(grid, cfg);
    if (tau > -3.0) {
      for (std::size_t i = 0; i < m.cells.size(); ++i) CHECK(m.cells[i] <= prev.cells[i]);
    }
    prev = m;
  }
}

TEST_CASE("db_to_grid_units uses dB on power") {
  SpectralGrid g;
  g.std = 2.0;
  CHECK(db_to_grid_units(20.0, g) == doctest::Approx(std::log(10.0) / 2.0));
}

TEST_CASE("connected components trivial shapes") {
  GridGeometry g = GridGeometry::for_samples(8 * 8, 8);
  BinaryMask m(g);
  m.set(3, 3);
  auto cl = connected_components(m, 8);
  REQUIRE(cl.size() == 1);
  CHECK(cl[0].size() == 1);
  m.set(4, 4);
  CHECK(connected_components(m, 4).size() == 2);
  CHECK(connected_components(m, 8).size() == 1);
  CHECK(connected_components(BinaryMask(g), 8).empty());
  CHECK_THROWS_AS(connected_components(m, 6), Error);
}

TEST_CASE("connected components match a union-find oracle on random masks") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const auto cols = static_cast<std::size_t>(rng.uniform_int(2, 64));
    GridGeometry g{cols, cols, rows, cols};
    BinaryMask m(g);
    const double density = rng.uniform(0.05, 0.7);
    for (auto& c : m.cells) c = rng.uniform() < density;
    for (int conn : {4, 8}) CHECK(connected_components(m, conn) == oracle_components(m, conn));
  }
}

TEST_CASE("clusters become bounding boxes") {
  GridGeometry g = GridGeometry::for_samples(16 * 16, 16);
  std::vector<double> values(g.cells(), 0.0);
  values[3 * 16 + 5] = 4.0;
  auto grid = grid_from(values, g);
  auto single = clusters_to_detections({Cluster{{3, 5}}}, grid);
  REQUIRE(single.size() == 1);
  CHECK(single[0].box == cell_to_box(3, 5, g));
  CHECK(single[0].score == 4.0);
  CHECK(single[0].cells == 1);
  CHECK_FALSE(single[0].label.has_value());

  Cluster l{{1, 1}, {2, 1}, {3, 1}, {3, 2}, {3, 3}};
  auto dl = clusters_to_detections({l}, grid);
  const auto a = cell_to_box(1, 1, g), b = cell_to_box(3, 3, g);
  CHECK(dl[0].box == TimeFreqBox{a.t_start, b.t_end, a.f_low, b.f_high});
  CHECK(dl[0].score == doctest::Approx(0.0));
  CHECK(dl[0].cells == 5);
}

TEST_CASE("post_filter rules") {
  DetectorConfig cfg;
  cfg.min_cluster_cells = 2;
  std::vector<Detection> d{det({0, 10, 0.0, 0.1}, 1), det({20, 30, 0.0, 0.1}, 2), det({40, 50, 0.0, 0.1}, 5)};
  auto f = post_filter(d, cfg);
  REQUIRE(f.size() == 2);
  CHECK(f[0].cells == 2);

  cfg.min_cluster_cells = 1;
  cfg.merge_contained = true;
  std::vector<Detection> nested{det({0, 100, -0.2, 0.2}, 50), det({10, 20, -0.1, 0.1}, 4), det({200, 300, 0.0, 0.1}, 4)};
  auto n = post_filter(nested, cfg);
  REQUIRE(n.size() == 2);
  CHECK(n[0].box == nested[0].box);
  CHECK(n[1].box == nested[2].box);
  CHECK(post_filter(n, cfg).size() == n.size());

  // Identical boxes keep exactly one copy.
  std::vector<Detection> same{det({0, 10, 0, 0.1}, 3), det({0, 10, 0, 0.1}, 3)};
  CHECK(post_filter(same, cfg).size() == 1);

  cfg.merge_contained = false;
  CHECK(post_filter(nested, cfg).size() == 3);
}

TEST_CASE("post_filter is idempotent on radiometer output") {
  auto rec = noise_record(512 * 64, 10);
  DetectorConfig cfg;
  cfg.threshold = 6.0;
  cfg.min_cluster_cells = 3;
  cfg.merge_contained = true;
  auto once = channelized_radiometer(rec, 512, cfg);
  auto twice = post_filter(once, cfg);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].box == twice[i].box);
}

TEST_CASE("default radiometer false alarms stay below one per tile") {
  // 512 x 512 cells per tile
  const std::size_t tile = 512 * 512;
  DetectorConfig cfg;
  std::size_t total = 0;
  const int tiles = 16;
  for (int t = 0; t < tiles; ++t) total += channelized_radiometer(noise_record(tile, 100 + t), 512, cfg).size();
  CHECK(static_cast<double>(total) / tiles <= 1.0);
}

TEST_CASE("single high-SNR burst gives one detection") {
  auto b = burst(0.15, 512 * 40, 512 * 100, 3);
  auto scene = render_scene({b}, 512 * 200);
  Rng rng(1);
  auto noisy = add_awgn(scene.samples, sigma_for(20.0, b.bandwidth), rng);
  auto dets = channelized_radiometer(noisy, 512, DetectorConfig{});
  REQUIRE(dets.size() == 1);
  CHECK(iou(dets[0].box, burst_to_box(b)) >= 0.5);
}

TEST_CASE("separated bursts give separate detections") {
  auto a = burst(-0.2, 512 * 10, 512 * 50, 1);
  auto b = burst(0.2, 512 * 70, 512 * 50, 2);
  auto scene = render_scene({a, b}, 512 * 140);
  Rng rng(2);
  auto noisy = add_awgn(scene.samples, sigma_for(20.0, 0.1), rng);
  auto dets = channelized_radiometer(noisy, 512, DetectorConfig{});
  REQUIRE(dets.size() == 2);
  CHECK(iou(dets[0].box, burst_to_box(a)) >= 0.5);
  CHECK(iou(dets[1].box, burst_to_box(b)) >= 0.5);
  // identical inputs, identical output
  auto again = channelized_radiometer(noisy, 512, DetectorConfig{});
  REQUIRE(again.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(again[i].box == dets[i].box);
    CHECK(again[i].score == dets[i].score);
  }
}

TEST_CASE("density clustering drops isolated cells") {
  GridGeometry g = GridGeometry::for_samples(16 * 16, 16);
  BinaryMask m(g);
  for (std::size_t t = 2; t < 6; ++t)
    for (std::size_t k = 2; k < 6; ++k) m.set(t, k);
  m.set(6, 6);  // diagonal border cell of the block
  m.set(12, 12);
  m.set(12, 14);
  auto cl = density_clusters(m, 3);
  REQUIRE(cl.size() == 1);
  CHECK(cl[0].size() == 17);

  DetectorConfig cfg;
  cfg.cluster_mode = ClusterMode::density;
  cfg.min_cluster_cells = 1;
  auto grid = grid_from(std::vector<double>(g.cells(), 0.0), g);
  CHECK(detect_from_mask(m, grid, cfg).size() == 1);
}

TEST_CASE("detect_from_mask rejects a mask of another geometry") {
  GridGeometry g = GridGeometry::for_samples(16 * 16, 16);
  GridGeometry other = GridGeometry::for_samples(16 * 8, 16);
  auto grid = grid_from(std::vector<double>(g.cells(), 0.0), g);
  try {
    detect_from_mask(BinaryMask(other), grid, DetectorConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::geometry_mismatch);
  }
}

TEST_CASE("config JSON round trip and validation") {
  DetectorConfig cfg;
  cfg.threshold_mode = ThresholdMode::absolute;
  cfg.threshold = 2.5;
  cfg.connectivity = 4;
  cfg.min_cluster_cells = 7;
  cfg.merge_contained = true;
  cfg.cluster_mode = ClusterMode::density;
  auto back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  cfg.min_cluster_cells = 0;
  CHECK_THROWS_AS(validate_config(cfg), Error);
  cfg = DetectorConfig{};
  cfg.connectivity = 5;
  CHECK_THROWS_AS(validate_config(cfg), Error);
  cfg = DetectorConfig{};
  cfg.threshold = std::nan("");
  CHECK_THROWS_AS(validate_config(cfg), Error);
  CHECK_NOTHROW(validate_config(DetectorConfig{}));
}

TEST_CASE("detections JSON lines round trip") {
  std::vector<Detection> d{Detection{{0, 512, -0.1, 0.1}, 2.5, 12, std::nullopt},
                           Detection{{1024, 4096, 0.2, 0.3}, -1.0, 0, std::string("PSK4")}};
  TempDir dir("dets");
  write_detections(dir / "d.jsonl", d);
  auto back = read_detections(dir / "d.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].box == d[0].box);
  CHECK(back[0].score == 2.5);
  CHECK_FALSE(back[0].label.has_value());
  CHECK(back[1].label == std::optional<std::string>("PSK4"));
  auto j = detection_to_json(d[1]);
  CHECK(j["t_start"] == 1024.0);
  CHECK(j["label"] == "PSK4");
  CHECK_THROWS_AS(detection_from_json(nlohmann::ordered_json{{"t_start", 1}}), Error);
}
