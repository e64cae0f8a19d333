#include "apex/core/calibration.hpp"

#include <cmath>

#include "apex/core/errors.hpp"

namespace apex {
namespace {

void require_ordered(double lo, double hi) {
  if (!(lo < hi)) throw InvalidArgument("lower bound must be below upper bound");
}

void require_log_bounds(double lo, double hi) {
  if (!(lo > 0.0) || !(hi > 0.0)) throw InvalidArgument("log scale needs positive bounds");
  require_ordered(lo, hi);
}

std::optional<FieldError> check_axis(double lo, double hi, AxisScale scale, const char* lo_name,
                                     const char* hi_name) {
  if (!std::isfinite(lo)) return FieldError{lo_name, std::string(lo_name) + " must be finite"};
  if (!std::isfinite(hi)) return FieldError{hi_name, std::string(hi_name) + " must be finite"};
  if (!(lo < hi)) {
    return FieldError{lo_name, std::string(lo_name) + " must be less than " + hi_name};
  }
  if (scale == AxisScale::Log) {
    if (!(lo > 0.0)) {
      return FieldError{lo_name, std::string(lo_name) + " must be positive on a log axis"};
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(AxisScale scale) {
  return scale == AxisScale::Log ? "log" : "linear";
}

AxisScale parse_axis_scale(std::string_view text, const std::string& field) {
  if (text == "linear") return AxisScale::Linear;
  if (text == "log") return AxisScale::Log;
  throw InvalidArgument("unknown axis scale '" + std::string(text) + "'", field);
}

std::optional<FieldError> check_calibration(const AxisCalibration& calib) {
  if (auto err = check_axis(calib.x_min, calib.x_max, calib.x_scale, "x_min", "x_max")) return err;
  return check_axis(calib.y_min, calib.y_max, calib.y_scale, "y_min", "y_max");
}

void validate_calibration(const AxisCalibration& calib) {
  if (auto err = check_calibration(calib)) throw InvalidArgument(err->message, err->field);
}

double unnormalize_linear(double v, double lo, double hi) {
  require_ordered(lo, hi);
  return v * hi + (1.0 - v) * lo;
}

double normalize_linear(double value, double lo, double hi) {
  require_ordered(lo, hi);
  return (value - lo) / (hi - lo);
}

double unnormalize_log(double v, double lo, double hi) {
  require_log_bounds(lo, hi);
  return lo * std::pow(hi / lo, v);
}

double normalize_log(double value, double lo, double hi) {
  require_log_bounds(lo, hi);
  if (!(value > 0.0)) throw InvalidArgument("log normalization needs a positive value");
  return std::log(value / lo) / std::log(hi / lo);
}

double unnormalize(double v, double lo, double hi, AxisScale scale) {
  return scale == AxisScale::Log ? unnormalize_log(v, lo, hi) : unnormalize_linear(v, lo, hi);
}

std::vector<std::pair<double, double>> apply_calibration(const NormalizedCurve& curve,
                                                         const SampleGrid& grid,
                                                         const AxisCalibration& calib) {
  if (curve.size() != grid.size()) {
    throw InvalidArgument("curve length " + std::to_string(curve.size()) +
                          " does not match grid length " + std::to_string(grid.size()));
  }
  validate_calibration(calib);
  std::vector<std::pair<double, double>> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[i] = {unnormalize(grid[i], calib.x_min, calib.x_max, calib.x_scale),
              unnormalize(curve[i], calib.y_min, calib.y_max, calib.y_scale)};
  }
  return out;
}

}  // namespace apex
