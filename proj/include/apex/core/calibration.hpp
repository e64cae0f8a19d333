#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apex/core/grid.hpp"
#include "apex/core/types.hpp"

namespace apex {

enum class AxisScale { Linear, Log };

std::string_view to_string(AxisScale scale);
// Throws InvalidArgument for anything other than "linear" or "log".
AxisScale parse_axis_scale(std::string_view text, const std::string& field = {});

// User-supplied axis extents for the normalized unit box.
struct AxisCalibration {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  AxisScale x_scale = AxisScale::Linear;
  AxisScale y_scale = AxisScale::Linear;

  static AxisCalibration identity() { return {}; }
};

struct FieldError {
  std::string field;
  std::string message;
};

// First violated constraint, if any. Fields are reported as "x_min", "x_max",
// "y_min", "y_max".
std::optional<FieldError> check_calibration(const AxisCalibration& calib);
// Throws InvalidArgument carrying the field name.
void validate_calibration(const AxisCalibration& calib);

double unnormalize_linear(double v, double lo, double hi);
double normalize_linear(double value, double lo, double hi);
double unnormalize_log(double v, double lo, double hi);
double normalize_log(double value, double lo, double hi);

double unnormalize(double v, double lo, double hi, AxisScale scale);

std::vector<std::pair<double, double>> apply_calibration(const NormalizedCurve& curve,
                                                         const SampleGrid& grid,
                                                         const AxisCalibration& calib);

}  // namespace apex
