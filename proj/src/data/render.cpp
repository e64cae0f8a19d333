#include "apex/data/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <string>
#include <vector>

#include "apex/core/errors.hpp"

namespace apex::data {
namespace {

constexpr int kShift = 4;
constexpr double kSub = 1 << kShift;

constexpr std::array<int, 6> kFonts = {cv::FONT_HERSHEY_SIMPLEX, cv::FONT_HERSHEY_DUPLEX,
                                       cv::FONT_HERSHEY_COMPLEX, cv::FONT_HERSHEY_TRIPLEX,
                                       cv::FONT_HERSHEY_PLAIN,   cv::FONT_HERSHEY_COMPLEX_SMALL};

cv::Scalar bgr(const Rgb& c) { return {c[2] * 255.0, c[1] * 255.0, c[0] * 255.0}; }
cv::Scalar gray(double v) { return {v * 255.0, v * 255.0, v * 255.0}; }

cv::Point fixed(double x, double y) {
  return {static_cast<int>(std::lround(x * kSub)), static_cast<int>(std::lround(y * kSub))};
}

int thickness_px(double px) { return std::max(1, static_cast<int>(std::lround(px))); }

void segment(cv::Mat& img, cv::Point2d a, cv::Point2d b, const cv::Scalar& color, int thickness) {
  cv::line(img, fixed(a.x, a.y), fixed(b.x, b.y), color, thickness, cv::LINE_AA, kShift);
}

// On/off lengths in units of line width; empty means solid.
std::vector<double> dash_pattern(LineStyle style) {
  switch (style) {
    case LineStyle::Dashed: return {3.7, 1.6};
    case LineStyle::Dotted: return {1.0, 1.65};
    case LineStyle::DashDot: return {6.4, 1.6, 1.0, 1.6};
    case LineStyle::Solid: break;
  }
  return {};
}

void draw_polyline(cv::Mat& img, const std::vector<cv::Point2d>& pts, const cv::Scalar& color,
                   double width_px, LineStyle style) {
  const int thickness = thickness_px(width_px);
  std::vector<double> pattern = dash_pattern(style);
  if (pattern.empty()) {
    for (std::size_t i = 1; i < pts.size(); ++i) segment(img, pts[i - 1], pts[i], color, thickness);
    return;
  }
  for (auto& p : pattern) p *= std::max(1.0, width_px);
  std::size_t phase = 0;
  double left = pattern[0];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    cv::Point2d a = pts[i - 1];
    const cv::Point2d b = pts[i];
    double remaining = std::hypot(b.x - a.x, b.y - a.y);
    while (remaining > 0.0) {
      const double step = std::min(left, remaining);
      const double t = step / remaining;
      const cv::Point2d next = a + (b - a) * t;
      if (phase % 2 == 0) segment(img, a, next, color, thickness);
      a = next;
      remaining -= step;
      left -= step;
      if (left <= 1e-9) {
        phase = (phase + 1) % pattern.size();
        left = pattern[phase];
      }
    }
  }
}

void draw_marker(cv::Mat& img, Marker marker, cv::Point2d c, double size_px, const cv::Scalar& edge,
                 const cv::Scalar& face) {
  const double r = std::max(1.0, size_px / 2.0);
  const int edge_px = std::max(1, static_cast<int>(std::lround(size_px / 8.0)));
  const auto poly = [&](std::initializer_list<cv::Point2d> corners) {
    std::vector<cv::Point> pts;
    for (const auto& p : corners) pts.push_back(fixed(c.x + p.x * r, c.y + p.y * r));
    cv::fillConvexPoly(img, pts, face, cv::LINE_AA, kShift);
    cv::polylines(img, pts, true, edge, edge_px, cv::LINE_AA, kShift);
  };
  switch (marker) {
    case Marker::None: return;
    case Marker::Circle: {
      const int rr = static_cast<int>(std::lround(r * kSub));
      cv::circle(img, fixed(c.x, c.y), rr, face, cv::FILLED, cv::LINE_AA, kShift);
      cv::circle(img, fixed(c.x, c.y), rr, edge, edge_px, cv::LINE_AA, kShift);
      return;
    }
    case Marker::Square: poly({{-0.8, -0.8}, {0.8, -0.8}, {0.8, 0.8}, {-0.8, 0.8}}); return;
    case Marker::Triangle: poly({{0, -1}, {0.87, 0.5}, {-0.87, 0.5}}); return;
    case Marker::Diamond: poly({{0, -1}, {0.7, 0}, {0, 1}, {-0.7, 0}}); return;
    case Marker::Plus:
      segment(img, {c.x - r, c.y}, {c.x + r, c.y}, edge, edge_px + 1);
      segment(img, {c.x, c.y - r}, {c.x, c.y + r}, edge, edge_px + 1);
      return;
    case Marker::Cross:
      segment(img, {c.x - r * 0.8, c.y - r * 0.8}, {c.x + r * 0.8, c.y + r * 0.8}, edge, edge_px + 1);
      segment(img, {c.x - r * 0.8, c.y + r * 0.8}, {c.x + r * 0.8, c.y - r * 0.8}, edge, edge_px + 1);
      return;
  }
}

// Anti-aliased text rendered into a single-channel coverage mask, optionally
// rotated counter-clockwise by `angle_deg`.
cv::Mat text_mask(const std::string& text, int font_index, bool italic, double height_px,
                  double angle_deg) {
  const int font = kFonts[static_cast<std::size_t>(font_index) % kFonts.size()] |
                   (italic ? cv::FONT_ITALIC : 0);
  int base = 0;
  const cv::Size unit = cv::getTextSize("Ag", font, 1.0, 1, &base);
  const double scale = std::max(0.2, height_px / std::max(1, unit.height));
  const int thick = std::max(1, static_cast<int>(std::lround(scale * 1.1)));
  const cv::Size size = cv::getTextSize(text, font, scale, thick, &base);
  const int pad = thick + 2;
  cv::Mat mask(size.height + base + 2 * pad, size.width + 2 * pad, CV_8UC1, cv::Scalar(0));
  cv::putText(mask, text, {pad, pad + size.height}, font, scale, cv::Scalar(255), thick,
              cv::LINE_AA);
  if (angle_deg == 0.0) return mask;

  const cv::Point2f centre(static_cast<float>(mask.cols) / 2.0f, static_cast<float>(mask.rows) / 2.0f);
  cv::Mat rot = cv::getRotationMatrix2D(centre, angle_deg, 1.0);
  const cv::Rect2f bounds = cv::RotatedRect(centre, mask.size(), static_cast<float>(angle_deg)).boundingRect2f();
  rot.at<double>(0, 2) += bounds.width / 2.0 - centre.x;
  rot.at<double>(1, 2) += bounds.height / 2.0 - centre.y;
  cv::Mat out;
  cv::warpAffine(mask, out, rot,
                 cv::Size(static_cast<int>(std::ceil(bounds.width)), static_cast<int>(std::ceil(bounds.height))),
                 cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(0));
  return out;
}

// Blends `color` through `mask` with the mask's top-left corner at (x, y).
void blit(cv::Mat& img, const cv::Mat& mask, int x, int y, const cv::Scalar& color) {
  for (int r = 0; r < mask.rows; ++r) {
    const int yy = y + r;
    if (yy < 0 || yy >= img.rows) continue;
    const auto* m = mask.ptr<std::uint8_t>(r);
    auto* row = img.ptr<cv::Vec3b>(yy);
    for (int c = 0; c < mask.cols; ++c) {
      const int xx = x + c;
      if (xx < 0 || xx >= img.cols || m[c] == 0) continue;
      const double a = m[c] / 255.0;
      for (int ch = 0; ch < 3; ++ch) {
        row[xx][ch] = cv::saturate_cast<std::uint8_t>(row[xx][ch] * (1.0 - a) + color[ch] * a);
      }
    }
  }
}

enum class Anchor { TopCentre, RightMiddle, BottomCentre, BottomLeft, BottomRight, LeftMiddle };

void draw_text(cv::Mat& img, const cv::Mat& mask, cv::Point2d at, Anchor anchor,
               const cv::Scalar& color) {
  double x = at.x;
  double y = at.y;
  switch (anchor) {
    case Anchor::TopCentre: x -= mask.cols / 2.0; break;
    case Anchor::RightMiddle: x -= mask.cols; y -= mask.rows / 2.0; break;
    case Anchor::BottomCentre: x -= mask.cols / 2.0; y -= mask.rows; break;
    case Anchor::BottomLeft: y -= mask.rows; break;
    case Anchor::BottomRight: x -= mask.cols; y -= mask.rows; break;
    case Anchor::LeftMiddle: y -= mask.rows / 2.0; break;
  }
  blit(img, mask, static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)), color);
}

std::string tick_text(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", value);
  return buf;
}

void draw_axes(cv::Mat& img, const RenderSpec& s, const DataRegion& d) {
  const double ppp = s.px_per_pt();
  const cv::Scalar black = gray(0.0);
  const bool gray_bg = s.background == Background::LightGray;

  if (gray_bg) {
    cv::rectangle(img, fixed(d.left, d.top), fixed(d.right, d.bottom), gray(0.9), cv::FILLED,
                  cv::LINE_8, kShift);
  }
  if (s.gridlines) {
    const cv::Scalar grid = gray_bg ? gray(1.0) : gray(0.82);
    for (std::size_t t = 0; t < s.x_ticks; ++t) {
      const double x = d.column(static_cast<double>(t) / static_cast<double>(s.x_ticks - 1));
      segment(img, {x, d.top}, {x, d.bottom}, grid, 1);
    }
    for (std::size_t t = 0; t < s.y_ticks; ++t) {
      const double y = d.row(static_cast<double>(t) / static_cast<double>(s.y_ticks - 1));
      segment(img, {d.left, y}, {d.right, y}, grid, 1);
    }
  }

  const int frame = thickness_px(0.8 * ppp);
  switch (s.background) {
    case Background::PlainWhite:
    case Background::TickedFrame:
      cv::rectangle(img, fixed(d.left, d.top), fixed(d.right, d.bottom), black, frame, cv::LINE_AA,
                    kShift);
      break;
    case Background::MinimalSpines:
      segment(img, {d.left, d.top}, {d.left, d.bottom}, black, frame);
      segment(img, {d.left, d.bottom}, {d.right, d.bottom}, black, frame);
      break;
    case Background::LightGray: break;
  }

  // Ticks point into the frame for the ticked template, outwards otherwise.
  const double tick = s.tick_pt * ppp;
  const double dir = s.background == Background::TickedFrame ? -1.0 : 1.0;
  const double gap = 2.0 + std::max(0.0, dir * tick);
  const double label_px = s.tick_label_pt * ppp * 0.7;
  for (std::size_t t = 0; t < s.x_ticks; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(s.x_ticks - 1);
    const double x = d.column(u);
    segment(img, {x, d.bottom}, {x, d.bottom + dir * tick}, black, 1);
    const cv::Mat m = text_mask(tick_text(s.x_label_lo + u * s.x_label_span), 0, false, label_px,
                                s.tick_rotation_deg);
    draw_text(img, m, {x, d.bottom + gap}, Anchor::TopCentre, black);
  }
  double y_label_extent = 0.0;
  for (std::size_t t = 0; t < s.y_ticks; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(s.y_ticks - 1);
    const double y = d.row(u);
    segment(img, {d.left, y}, {d.left - dir * tick, y}, black, 1);
    const cv::Mat m = text_mask(tick_text(s.y_label_lo + u * s.y_label_span), 0, false, label_px,
                                s.tick_rotation_deg);
    y_label_extent = std::max(y_label_extent, static_cast<double>(m.cols));
    draw_text(img, m, {d.left - gap, y}, Anchor::RightMiddle, black);
  }

  const cv::Mat xl = text_mask(s.x_label.text, s.x_label.font, s.x_label.italic,
                               s.x_label.size_pt * ppp * 0.7, 0.0);
  draw_text(img, xl, {(d.left + d.right) / 2.0, d.bottom + gap + 2.5 * label_px + 4.0},
            Anchor::TopCentre, black);
  const cv::Mat yl = text_mask(s.y_label.text, s.y_label.font, s.y_label.italic,
                               s.y_label.size_pt * ppp * 0.7, 90.0);
  draw_text(img, yl, {d.left - gap - y_label_extent - 4.0, (d.top + d.bottom) / 2.0},
            Anchor::RightMiddle, black);

  const cv::Mat title = text_mask(s.title.text, s.title.font, s.title.italic,
                                  s.title.size_pt * ppp * 0.7, 0.0);
  const double ty = d.top - 6.0;
  switch (s.title_location) {
    case TitleLocation::Left: draw_text(img, title, {d.left, ty}, Anchor::BottomLeft, black); break;
    case TitleLocation::Center:
      draw_text(img, title, {(d.left + d.right) / 2.0, ty}, Anchor::BottomCentre, black);
      break;
    case TitleLocation::Right: draw_text(img, title, {d.right, ty}, Anchor::BottomRight, black); break;
  }
}

void draw_legend(cv::Mat& img, const RenderSpec& s, const DataRegion& d) {
  const double ppp = s.px_per_pt();
  const double text_px = s.legend_pt * ppp * 0.7;
  const double row_h = std::max(text_px * 1.8, 6.0);
  const double sample_w = 2.0 * s.legend_pt * ppp;
  const double pad = 0.5 * s.legend_pt * ppp;

  std::vector<cv::Mat> labels;
  double text_w = 0.0;
  for (const auto& p : s.plots) {
    labels.push_back(text_mask(p.label, 0, false, text_px, 0.0));
    text_w = std::max(text_w, static_cast<double>(labels.back().cols));
  }
  const double box_w = pad * 3 + sample_w + text_w;
  const double box_h = pad * 2 + row_h * static_cast<double>(s.plots.size());
  const double inset = 6.0;
  double x = d.left + inset;
  double y = d.top + inset;
  switch (s.legend_location) {
    case LegendLocation::UpperLeft: break;
    case LegendLocation::UpperRight: x = d.right - inset - box_w; break;
    case LegendLocation::LowerLeft: y = d.bottom - inset - box_h; break;
    case LegendLocation::LowerRight:
      x = d.right - inset - box_w;
      y = d.bottom - inset - box_h;
      break;
    case LegendLocation::OutsideRight: x = d.right + inset; break;
  }
  cv::rectangle(img, fixed(x, y), fixed(x + box_w, y + box_h), gray(1.0), cv::FILLED, cv::LINE_8,
                kShift);
  cv::rectangle(img, fixed(x, y), fixed(x + box_w, y + box_h), gray(0.75), 1, cv::LINE_AA, kShift);
  for (std::size_t i = 0; i < s.plots.size(); ++i) {
    const PlotStyle& p = s.plots[i];
    const double cy = y + pad + row_h * (static_cast<double>(i) + 0.5);
    draw_polyline(img, {{x + pad, cy}, {x + pad + sample_w, cy}}, bgr(p.line_color),
                  p.line_width_pt * ppp, p.line_style);
    draw_marker(img, p.marker, {x + pad + sample_w / 2.0, cy}, p.marker_size_pt * ppp,
                bgr(p.line_color), bgr(p.marker_face));
    draw_text(img, labels[i], {x + 2 * pad + sample_w, cy}, Anchor::LeftMiddle, gray(0.0));
  }
}

}  // namespace

DataRegion data_region(const RenderSpec& s) {
  const double w = static_cast<double>(s.width) - 1.0;
  const double h = static_cast<double>(s.height) - 1.0;
  return {w * (s.padding + s.margin_left), h * (s.padding + s.margin_top),
          w * (1.0 - s.padding - s.margin_right), h * (1.0 - s.padding - s.margin_bottom)};
}

PlotImage render_plot_image(const RenderSpec& spec, const GroundTruthSet& curves,
                            const SampleGrid& grid) {
  const std::string id = std::to_string(spec.id);
  if (curves.k() != spec.k || spec.plots.size() != spec.k) {
    throw InvalidArgument("spec plot count does not match the ground truth", "k");
  }
  if (spec.width < 2 || spec.height < 2) throw RenderError("image size too small", id);
  const DataRegion d = data_region(spec);
  if (!(d.right > d.left && d.bottom > d.top)) throw RenderError("empty data region", id);

  cv::Mat img;
  try {
    img = cv::Mat(static_cast<int>(spec.height), static_cast<int>(spec.width), CV_8UC3,
                  gray(1.0));
    if (spec.decorated) draw_axes(img, spec, d);

    const double ppp = spec.px_per_pt();
    std::vector<cv::Point2d> pts(grid.size());
    for (std::size_t j = 0; j < spec.k; ++j) {
      const PlotStyle& p = spec.plots[j];
      const auto& ys = curves.curves[j].ys;
      if (ys.size() != grid.size()) throw InvalidArgument("curve length does not match the grid", "y");
      for (std::size_t i = 0; i < grid.size(); ++i) pts[i] = {d.column(grid[i]), d.row(ys[i])};
      draw_polyline(img, pts, bgr(p.line_color), p.line_width_pt * ppp, p.line_style);
      if (p.marker != Marker::None && p.marker_every > 0) {
        for (std::size_t i = (j * 7) % p.marker_every; i < grid.size(); i += p.marker_every) {
          draw_marker(img, p.marker, pts[i], p.marker_size_pt * ppp, bgr(p.line_color),
                      bgr(p.marker_face));
        }
      }
    }
    if (spec.decorated && spec.legend) draw_legend(img, spec, d);
  } catch (const cv::Exception& e) {
    throw RenderError(std::string("rendering backend failure: ") + e.what(), id);
  }

  PlotImage out(spec.height, spec.width);
  for (int r = 0; r < img.rows; ++r) {
    const auto* row = img.ptr<cv::Vec3b>(r);
    for (int c = 0; c < img.cols; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) =
            static_cast<float>(row[c][2 - ch]) / 255.0f;
      }
    }
  }
  return out;
}

}  // namespace apex::data
