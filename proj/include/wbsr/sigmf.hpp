#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wbsr/dsp.hpp"
#include "wbsr/metrics.hpp"
#include "wbsr/scene.hpp"

namespace wbsr::sigmf {

inline constexpr const char* kDatatype = "ci16_le";
inline constexpr const char* kVersion = "1.0.0";
inline constexpr double kFullScale = 32000.0;
inline constexpr double kDefaultSampleRate = 100e6;

struct RecordPaths {
  std::filesystem::path data;
  std::filesystem::path meta;

  /// Accepts "dir/name", "dir/name.sigmf-data", "dir/name.sigmf-meta" or
  /// "dir/name.sigmf".
  static RecordPaths from_base(const std::filesystem::path& base);
};

struct Annotation {
  std::size_t sample_start = 0;
  std::size_t sample_count = 0;
  double freq_lower_edge = 0.0;  // Hz, baseband (record center = 0 Hz)
  double freq_upper_edge = 0.0;
  std::string label;
};

/// Parsed view of a .sigmf-meta document. `meta` keeps the whole document
/// so unknown fields survive a rewrite.
struct Record {
  RecordPaths paths;
  std::string datatype = kDatatype;
  double sample_rate = kDefaultSampleRate;
  std::string version = kVersion;
  std::string description;
  double scale = 1.0;  // int16 value = round(float sample * scale)
  std::optional<std::uint64_t> master_seed;
  std::string profile;
  std::vector<Annotation> annotations;
  nlohmann::ordered_json meta;
};

struct ReadResult {
  Record record;
  ComplexBuffer samples;
  std::vector<Truth> truths;  // normalized boxes of the non-empty annotations, in order
  std::vector<std::string> warnings;
};

/// Largest-component scaling to kFullScale; 1 for an all-zero buffer.
double full_scale_factor(const ComplexBuffer& samples) noexcept;

/// Interleaved little-endian int16 I/Q bytes, round half away from zero.
std::vector<std::uint8_t> quantize(const ComplexBuffer& samples, double scale);
ComplexBuffer dequantize(const std::vector<std::uint8_t>& bytes, double scale, double sample_rate);

/// Writes a scene as a SigMF record. One annotation per burst.
Record write_record(const Scene& scene, double sample_rate_hz, const std::filesystem::path& base,
                    const std::string& description = "");

/// Rewrites samples under an existing record's metadata (unknown fields
/// preserved). The stored scale is reused so a read/write cycle is
/// byte-identical.
void write_record(const Record& record, const ComplexBuffer& samples, const std::filesystem::path& base);

/// Throws ErrorKind::io, datatype_mismatch, truncated_data or
/// malformed_metadata.
ReadResult read_record(const std::filesystem::path& base);

Record parse_metadata(const nlohmann::ordered_json& meta);

}  // namespace wbsr::sigmf
