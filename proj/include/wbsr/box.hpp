#pragma once

namespace wbsr {

/// Axis-aligned rectangle: time in samples, frequency in normalized
/// cycles/sample.
struct TimeFreqBox {
  double t_start = 0.0;
  double t_end = 0.0;
  double f_low = 0.0;
  double f_high = 0.0;

  double duration() const noexcept { return t_end - t_start; }
  double bandwidth() const noexcept { return f_high - f_low; }
  double area() const noexcept { return duration() * bandwidth(); }
  bool valid() const noexcept { return t_start < t_end && f_low < f_high; }

  bool contains(const TimeFreqBox& o) const noexcept {
    return o.t_start >= t_start && o.t_end <= t_end && o.f_low >= f_low && o.f_high <= f_high;
  }

  friend bool operator==(const TimeFreqBox&, const TimeFreqBox&) = default;
};

}  // namespace wbsr
