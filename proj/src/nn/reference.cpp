#include <algorithm>
#include <cmath>
#include <vector>

#include "apex/nn/kernels.hpp"

namespace apex::nn::reference {

void conv3x3_forward(const ConvGeometry& g, std::span<const float> x,
                     std::span<const float> weight, std::span<const float> bias,
                     std::span<float> y) {
  const std::size_t h = g.height;
  const std::size_t w = g.width;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          double sum = bias.empty() ? 0.0 : bias[o];
          for (std::size_t i = 0; i < g.in_ch; ++i) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + ky) - 1;
                const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + kx) - 1;
                if (sr < 0 || sc < 0 || sr >= static_cast<std::ptrdiff_t>(h) ||
                    sc >= static_cast<std::ptrdiff_t>(w)) {
                  continue;
                }
                sum += static_cast<double>(weight[((o * g.in_ch + i) * 3 + ky) * 3 + kx]) *
                       x[((n * g.in_ch + i) * h + static_cast<std::size_t>(sr)) * w +
                         static_cast<std::size_t>(sc)];
              }
            }
          }
          y[((n * g.out_ch + o) * h + r) * w + c] = static_cast<float>(sum);
        }
      }
    }
  }
}

void conv3x3_backward(const ConvGeometry& g, std::span<const float> x,
                      std::span<const float> weight, std::span<const float> dy,
                      std::span<float> dx, std::span<float> dweight, std::span<float> dbias) {
  const std::size_t h = g.height;
  const std::size_t w = g.width;
  const auto in_bounds = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    return r >= 0 && c >= 0 && r < static_cast<std::ptrdiff_t>(h) &&
           c < static_cast<std::ptrdiff_t>(w);
  };
  if (!dbias.empty()) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      double sum = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t p = 0; p < h * w; ++p) sum += dy[(n * g.out_ch + o) * h * w + p];
      }
      dbias[o] += static_cast<float>(sum);
    }
  }
  if (!dweight.empty()) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      for (std::size_t i = 0; i < g.in_ch; ++i) {
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            double sum = 0.0;
            for (std::size_t n = 0; n < g.batch; ++n) {
              for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t c = 0; c < w; ++c) {
                  const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + ky) - 1;
                  const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + kx) - 1;
                  if (!in_bounds(sr, sc)) continue;
                  sum += static_cast<double>(dy[((n * g.out_ch + o) * h + r) * w + c]) *
                         x[((n * g.in_ch + i) * h + static_cast<std::size_t>(sr)) * w +
                           static_cast<std::size_t>(sc)];
                }
              }
            }
            dweight[((o * g.in_ch + i) * 3 + ky) * 3 + kx] += static_cast<float>(sum);
          }
        }
      }
    }
  }
  if (!dx.empty()) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t i = 0; i < g.in_ch; ++i) {
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            double sum = 0.0;
            for (std::size_t o = 0; o < g.out_ch; ++o) {
              for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                  const std::ptrdiff_t orow = static_cast<std::ptrdiff_t>(r) + 1 -
                                              static_cast<std::ptrdiff_t>(ky);
                  const std::ptrdiff_t ocol = static_cast<std::ptrdiff_t>(c) + 1 -
                                              static_cast<std::ptrdiff_t>(kx);
                  if (!in_bounds(orow, ocol)) continue;
                  sum += static_cast<double>(weight[((o * g.in_ch + i) * 3 + ky) * 3 + kx]) *
                         dy[((n * g.out_ch + o) * h + static_cast<std::size_t>(orow)) * w +
                            static_cast<std::size_t>(ocol)];
                }
              }
            }
            dx[((n * g.in_ch + i) * h + r) * w + c] = static_cast<float>(sum);
          }
        }
      }
    }
  }
}

void batchnorm_train_forward(const PlaneGeometry& g, std::span<const float> x,
                             std::span<const float> gamma, std::span<const float> beta,
                             float eps, std::span<float> y, std::span<float> mean,
                             std::span<float> var) {
  const std::size_t plane = g.plane();
  const double count = static_cast<double>(g.batch * plane);
  for (std::size_t c = 0; c < g.channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t p = 0; p < plane; ++p) sum += x[(n * g.channels + c) * plane + p];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = x[(n * g.channels + c) * plane + p] - mu;
        sq += d * d;
      }
    }
    const double v = sq / count;
    mean[c] = static_cast<float>(mu);
    var[c] = static_cast<float>(v);
    const double inv = 1.0 / std::sqrt(v + eps);
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t idx = (n * g.channels + c) * plane + p;
        y[idx] = static_cast<float>((x[idx] - mu) * inv * gamma[c] + beta[c]);
      }
    }
  }
}

void batchnorm_eval_forward(const PlaneGeometry& g, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> beta,
                            std::span<const float> running_mean,
                            std::span<const float> running_var, float eps, std::span<float> y) {
  const std::size_t plane = g.plane();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t idx = (n * g.channels + c) * plane + p;
        y[idx] = static_cast<float>((x[idx] - running_mean[c]) * inv * gamma[c] + beta[c]);
      }
    }
  }
}

void batchnorm_backward(const PlaneGeometry& g, std::span<const float> x,
                        std::span<const float> dy, std::span<const float> gamma,
                        std::span<const float> mean, std::span<const float> var, float eps,
                        std::span<float> dx, std::span<float> dgamma, std::span<float> dbeta) {
  const std::size_t plane = g.plane();
  const double count = static_cast<double>(g.batch * plane);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[c]) + eps);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t idx = (n * g.channels + c) * plane + p;
        const double xhat = (x[idx] - mean[c]) * inv;
        sum_dy += dy[idx];
        sum_dy_xhat += dy[idx] * xhat;
      }
    }
    dgamma[c] += static_cast<float>(sum_dy_xhat);
    dbeta[c] += static_cast<float>(sum_dy);
    if (dx.empty()) continue;
    const double scale = gamma[c] * inv / count;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t idx = (n * g.channels + c) * plane + p;
        const double xhat = (x[idx] - mean[c]) * inv;
        dx[idx] = static_cast<float>(scale * (count * dy[idx] - sum_dy - xhat * sum_dy_xhat));
      }
    }
  }
}

void relu_forward(std::span<float> x) {
  for (auto& v : x) v = v > 0.0f ? v : 0.0f;
}

void relu_backward(std::span<const float> y, std::span<float> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(y[i] > 0.0f)) dy[i] = 0.0f;
  }
}

void maxpool2x2_forward(const PlaneGeometry& g, std::span<const float> x, std::span<float> y,
                        std::span<std::uint8_t> argmax) {
  const std::size_t oh = g.height / 2;
  const std::size_t ow = g.width / 2;
  for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        float best = 0.0f;
        std::uint8_t slot = 0;
        for (std::uint8_t s = 0; s < 4; ++s) {
          const float v = x[(p * g.height + 2 * r + s / 2) * g.width + 2 * c + s % 2];
          if (s == 0 || v > best) {
            best = v;
            slot = s;
          }
        }
        y[(p * oh + r) * ow + c] = best;
        argmax[(p * oh + r) * ow + c] = slot;
      }
    }
  }
}

void maxpool2x2_backward(const PlaneGeometry& g, std::span<const float> dy,
                         std::span<const std::uint8_t> argmax, std::span<float> dx) {
  const std::size_t oh = g.height / 2;
  const std::size_t ow = g.width / 2;
  std::fill(dx.begin(), dx.end(), 0.0f);
  for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const std::size_t o = (p * oh + r) * ow + c;
        const std::size_t s = argmax[o];
        dx[(p * g.height + 2 * r + s / 2) * g.width + 2 * c + s % 2] = dy[o];
      }
    }
  }
}

void global_avgpool_forward(const PlaneGeometry& g, std::span<const float> x, std::span<float> y) {
  const std::size_t plane = g.plane();
  for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += x[p * plane + i];
    y[p] = static_cast<float>(sum / static_cast<double>(plane));
  }
}

void global_avgpool_backward(const PlaneGeometry& g, std::span<const float> dy,
                             std::span<float> dx) {
  const std::size_t plane = g.plane();
  for (std::size_t p = 0; p < g.batch * g.channels; ++p) {
    const float share = dy[p] / static_cast<float>(plane);
    for (std::size_t i = 0; i < plane; ++i) dx[p * plane + i] = share;
  }
}

void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y) {
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      double sum = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < in; ++i) {
        sum += static_cast<double>(x[n * in + i]) * weight[o * in + i];
      }
      y[n * out + o] = static_cast<float>(sum);
    }
  }
}

void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const float> x,
                     std::span<const float> weight, std::span<const float> dy,
                     std::span<float> dx, std::span<float> dweight, std::span<float> dbias) {
  for (std::size_t o = 0; o < out; ++o) {
    double bsum = 0.0;
    for (std::size_t n = 0; n < batch; ++n) bsum += dy[n * out + o];
    if (!dbias.empty()) dbias[o] += static_cast<float>(bsum);
    if (dweight.empty()) continue;
    for (std::size_t i = 0; i < in; ++i) {
      double sum = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        sum += static_cast<double>(dy[n * out + o]) * x[n * in + i];
      }
      dweight[o * in + i] += static_cast<float>(sum);
    }
  }
  if (dx.empty()) return;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < in; ++i) {
      double sum = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        sum += static_cast<double>(dy[n * out + o]) * weight[o * in + i];
      }
      dx[n * in + i] = static_cast<float>(sum);
    }
  }
}

void sigmoid_forward(std::span<float> x) {
  for (auto& v : x) v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

void sigmoid_backward(std::span<const float> y, std::span<float> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] * (1.0f - y[i]);
}

void resize_bilinear_to_chw(std::span<const float> src, std::size_t src_h, std::size_t src_w,
                            std::size_t dst_h, std::size_t dst_w, std::span<float> dst) {
  const auto source_coord = [](std::size_t i, std::size_t src, std::size_t dstn) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(src) /
                         static_cast<double>(dstn) -
                     0.5;
    return std::clamp(s, 0.0, static_cast<double>(src - 1));
  };
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t r = 0; r < dst_h; ++r) {
      const double sy = source_coord(r, src_h, dst_h);
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t y1 = std::min(y0 + 1, src_h - 1);
      const double wy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < dst_w; ++c) {
        const double sx = source_coord(c, src_w, dst_w);
        const auto x0 = static_cast<std::size_t>(sx);
        const std::size_t x1 = std::min(x0 + 1, src_w - 1);
        const double wx = sx - static_cast<double>(x0);
        const auto px = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(src[(yy * src_w + xx) * 3 + ch]);
        };
        const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
        const double bottom = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
        dst[(ch * dst_h + r) * dst_w + c] = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
}

}  // namespace apex::nn::reference
