#include "wbsr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "wbsr/error.hpp"

namespace wbsr {

using nlohmann::ordered_json;

namespace {

constexpr char kMaskMagic[8] = {'W', 'B', 'M', 'A', 'S', 'K', '0', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// First index i with (i + 0.5) * step > edge, clamped to [0, n].
std::size_t first_center_after(double edge, double step, std::size_t n) {
  const double i = std::ceil(edge / step - 0.5);
  return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(n)));
}

}  // namespace

GridGeometry GridGeometry::for_samples(std::size_t samples, std::size_t fft_size) {
  if (fft_size < 2) throw Error(ErrorKind::parameter, "grid: fft_size must be >= 2");
  return GridGeometry{fft_size, fft_size, samples / fft_size, fft_size};
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

std::pair<double, double> normalize(std::span<double> values) {
  if (values.empty()) return {0.0, 1.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double std = std::max(std::sqrt(var), kLogFloor);
  for (double& v : values) v = (v - mean) / std;
  return {mean, std};
}

std::vector<double> power_grid(const ComplexBuffer& buf, const GridGeometry& geometry) {
  const auto frames = dft(buf, geometry.fft_size);
  std::vector<double> out;
  out.reserve(geometry.cells());
  for (std::size_t f = 0; f < geometry.frames; ++f) {
    for (const auto& x : frames[f]) out.push_back(std::norm(x));
  }
  return out;
}

SpectralGrid spectrogram(const ComplexBuffer& buf, std::size_t fft_size) {
  SpectralGrid grid;
  grid.geometry = GridGeometry::for_samples(buf.size(), fft_size);
  const auto frames = dft(buf, fft_size);
  grid.values.reserve(grid.geometry.cells());
  for (const auto& frame : frames) {
    for (const auto& x : frame) grid.values.push_back(std::log(std::abs(x) + kLogFloor));
  }
  std::tie(grid.mean, grid.std) = normalize(grid.values);
  return grid;
}

BinaryMask rasterize(std::span<const TimeFreqBox> boxes, const GridGeometry& g) {
  BinaryMask mask(g);
  const auto hop = static_cast<double>(g.hop);
  const double bw = g.bin_width();
  for (const auto& box : boxes) {
    // Inclusive-exclusive ranges of cells whose centers fall inside the box.
    const std::size_t f0 = first_center_after(box.t_start - 1e-9, hop, g.frames);
    const std::size_t f1 = first_center_after(box.t_end + 1e-9, hop, g.frames);
    const std::size_t b0 = first_center_after(box.f_low + 0.5 - 1e-12, bw, g.bins);
    const std::size_t b1 = first_center_after(box.f_high + 0.5 + 1e-12, bw, g.bins);
    for (std::size_t f = f0; f < f1; ++f) {
      for (std::size_t b = b0; b < b1; ++b) mask.set(f, b);
    }
  }
  return mask;
}

TimeFreqBox cell_to_box(std::size_t frame, std::size_t bin, const GridGeometry& g) {
  if (frame >= g.frames || bin >= g.bins) {
    throw Error(ErrorKind::parameter, "cell_to_box: cell (" + std::to_string(frame) + ", " + std::to_string(bin) +
                                          ") outside " + std::to_string(g.frames) + "x" + std::to_string(g.bins) + " grid");
  }
  const double bw = g.bin_width();
  const auto t0 = static_cast<double>(frame * g.hop);
  return TimeFreqBox{t0, t0 + static_cast<double>(g.fft_size), -0.5 + static_cast<double>(bin) * bw,
                     -0.5 + static_cast<double>(bin + 1) * bw};
}

std::vector<std::uint8_t> pack_mask_bits(const BinaryMask& mask) {
  std::vector<std::uint8_t> out((mask.cells.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.cells.size(); ++i) {
    if (mask.cells[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

void write_mask_file(const std::filesystem::path& path, const BinaryMask& mask, const ordered_json& provenance) {
  std::vector<std::uint8_t> bytes(std::begin(kMaskMagic), std::end(kMaskMagic));
  put_u32(bytes, static_cast<std::uint32_t>(mask.geometry.frames));
  put_u32(bytes, static_cast<std::uint32_t>(mask.geometry.bins));
  const auto bits = pack_mask_bits(mask);
  bytes.insert(bytes.end(), bits.begin(), bits.end());

  ordered_json trailer;
  trailer["geometry"] = {{"fft_size", mask.geometry.fft_size},
                         {"hop", mask.geometry.hop},
                         {"frames", mask.geometry.frames},
                         {"bins", mask.geometry.bins}};
  trailer["provenance"] = provenance;
  const std::string text = trailer.dump();
  bytes.insert(bytes.end(), text.begin(), text.end());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write mask file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to mask file " + path.string());
}

MaskFile read_mask_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open mask file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || !std::equal(std::begin(kMaskMagic), std::end(kMaskMagic), bytes.begin(),
                                       [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw Error(ErrorKind::malformed_metadata, path.string() + ": not a WBMASK01 file");
  }
  const std::size_t frames = get_u32(bytes.data() + 8);
  const std::size_t bins = get_u32(bytes.data() + 12);
  const std::size_t packed = (frames * bins + 7) / 8;
  if (bytes.size() < 16 + packed) {
    throw Error(ErrorKind::truncated_data, path.string() + ": mask payload truncated at byte offset " + std::to_string(bytes.size()));
  }
  MaskFile out;
  GridGeometry g{bins, bins, frames, bins};
  try {
    if (bytes.size() > 16 + packed) {
      out.trailer = ordered_json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(16 + packed), bytes.end());
      if (out.trailer.contains("geometry")) {
        const auto& jg = out.trailer.at("geometry");
        g.fft_size = jg.value("fft_size", bins);
        g.hop = jg.value("hop", g.fft_size);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_metadata, path.string() + ": bad JSON trailer: " + e.what());
  }
  out.mask = BinaryMask(g);
  for (std::size_t i = 0; i < frames * bins; ++i) {
    out.mask.cells[i] = (bytes[16 + i / 8] >> (7 - i % 8)) & 1u;
  }
  return out;
}

}  // namespace wbsr
