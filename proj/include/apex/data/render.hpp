#pragma once

#include "apex/core/grid.hpp"
#include "apex/core/types.hpp"
#include "apex/data/render_spec.hpp"

namespace apex::data {

// Pixel rectangle onto which the unit square is mapped. A point (x, y) lands
// at column left + x * (right - left) and row bottom - y * (bottom - top).
struct DataRegion {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double column(double x) const noexcept { return left + x * (right - left); }
  double row(double y) const noexcept { return bottom - y * (bottom - top); }
};

DataRegion data_region(const RenderSpec& spec);

// Renders all curves of `curves` into one image sized spec.width x
// spec.height. Throws RenderError carrying spec.id.
PlotImage render_plot_image(const RenderSpec& spec, const GroundTruthSet& curves,
                            const SampleGrid& grid);

}  // namespace apex::data
