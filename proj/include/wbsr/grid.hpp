#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/box.hpp"
#include "wbsr/dsp.hpp"

namespace wbsr {

inline constexpr std::size_t kDefaultFftSize = 512;
inline constexpr double kLogFloor = 1e-12;

/// Time-frequency raster: `frames` non-overlapping chunks of `fft_size`
/// samples, each transformed to `bins` = fft_size fftshifted bins.
struct GridGeometry {
  std::size_t fft_size = kDefaultFftSize;
  std::size_t hop = kDefaultFftSize;
  std::size_t frames = 0;
  std::size_t bins = kDefaultFftSize;

  static GridGeometry for_samples(std::size_t samples, std::size_t fft_size = kDefaultFftSize);

  std::size_t cells() const noexcept { return frames * bins; }
  double bin_width() const noexcept { return 1.0 / static_cast<double>(bins); }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Row-major frames x bins normalized log-magnitude values.
struct SpectralGrid {
  GridGeometry geometry;
  std::vector<double> values;
  double mean = 0.0;  // statistics of the raw log-magnitude, before normalization
  double std = 1.0;

  double at(std::size_t frame, std::size_t bin) const { return values[frame * geometry.bins + bin]; }
};

struct BinaryMask {
  GridGeometry geometry;
  std::vector<std::uint8_t> cells;  // 0/1, row-major

  explicit BinaryMask(GridGeometry g = {}) : geometry(g), cells(g.cells(), 0) {}

  bool at(std::size_t frame, std::size_t bin) const { return cells[frame * geometry.bins + bin] != 0; }
  void set(std::size_t frame, std::size_t bin, bool v = true) { cells[frame * geometry.bins + bin] = v ? 1 : 0; }
  std::size_t count() const noexcept;
};

/// Log-magnitude of the chunked DFT, normalized to zero mean and unit
/// standard deviation over the whole grid. Rectangular window.
SpectralGrid spectrogram(const ComplexBuffer& buf, std::size_t fft_size = kDefaultFftSize);

/// Same, but with values reported in linear power |X|^2 and no
/// normalization; used for energy bookkeeping.
std::vector<double> power_grid(const ComplexBuffer& buf, const GridGeometry& geometry);

/// Applies the zero-mean / unit-std normalization to raw values in place
/// and returns (mean, std) used. std is floored at kLogFloor.
std::pair<double, double> normalize(std::span<double> values);

/// Cell (frame, bin) is set iff its center lies inside any box. Boxes
/// beyond the grid are clipped.
BinaryMask rasterize(std::span<const TimeFreqBox> boxes, const GridGeometry& geometry);

/// Extent of one cell. Throws ErrorKind::parameter for out-of-range indices.
TimeFreqBox cell_to_box(std::size_t frame, std::size_t bin, const GridGeometry& geometry);

/// Mask interchange file: "WBMASK01", frames (u32 LE), bins (u32 LE),
/// row-major bits packed MSB-first, then a UTF-8 JSON trailer.
void write_mask_file(const std::filesystem::path& path, const BinaryMask& mask,
                     const nlohmann::ordered_json& provenance = nlohmann::ordered_json::object());

struct MaskFile {
  BinaryMask mask;
  nlohmann::ordered_json trailer;
};

MaskFile read_mask_file(const std::filesystem::path& path);

std::vector<std::uint8_t> pack_mask_bits(const BinaryMask& mask);

}  // namespace wbsr
