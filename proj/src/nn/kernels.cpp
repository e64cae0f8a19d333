#include "apex/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "apex/nn/gemm.hpp"

namespace apex::nn::kernels {
namespace {

using Index = std::ptrdiff_t;

// col[(c*9 + ky*3 + kx), r*w + x] = img[c, r+ky-1, x+kx-1], zero outside.
void im2col3x3(const float* img, std::size_t channels, std::size_t h, std::size_t w, float* col) {
  const Index rows = static_cast<Index>(channels * 9);
#pragma omp parallel for schedule(static)
  for (Index row = 0; row < rows; ++row) {
    const std::size_t c = static_cast<std::size_t>(row) / 9;
    const Index ky = (row % 9) / 3 - 1;
    const Index kx = row % 3 - 1;
    const float* plane = img + c * h * w;
    float* dst = col + static_cast<std::size_t>(row) * h * w;
    for (Index r = 0; r < static_cast<Index>(h); ++r) {
      float* out = dst + static_cast<std::size_t>(r) * w;
      const Index sr = r + ky;
      if (sr < 0 || sr >= static_cast<Index>(h)) {
        std::fill(out, out + w, 0.0f);
        continue;
      }
      const float* src = plane + static_cast<std::size_t>(sr) * w;
      const Index lo = std::max<Index>(0, -kx);
      const Index hi = std::min<Index>(static_cast<Index>(w), static_cast<Index>(w) - kx);
      for (Index x = 0; x < lo; ++x) out[x] = 0.0f;
      for (Index x = lo; x < hi; ++x) out[x] = src[x + kx];
      for (Index x = hi; x < static_cast<Index>(w); ++x) out[x] = 0.0f;
    }
  }
}

// Inverse scatter of im2col3x3; each thread owns whole input channels.
void col2im3x3(const float* col, std::size_t channels, std::size_t h, std::size_t w, float* img) {
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < static_cast<Index>(channels); ++c) {
    float* plane = img + static_cast<std::size_t>(c) * h * w;
    std::fill(plane, plane + h * w, 0.0f);
    for (Index k = 0; k < 9; ++k) {
      const Index ky = k / 3 - 1;
      const Index kx = k % 3 - 1;
      const float* src = col + (static_cast<std::size_t>(c) * 9 + static_cast<std::size_t>(k)) * h * w;
      for (Index r = 0; r < static_cast<Index>(h); ++r) {
        const Index sr = r + ky;
        if (sr < 0 || sr >= static_cast<Index>(h)) continue;
        const float* in = src + static_cast<std::size_t>(r) * w;
        float* out = plane + static_cast<std::size_t>(sr) * w;
        const Index lo = std::max<Index>(0, -kx);
        const Index hi = std::min<Index>(static_cast<Index>(w), static_cast<Index>(w) - kx);
        for (Index x = lo; x < hi; ++x) out[x + kx] += in[x];
      }
    }
  }
}

struct Affine {
  float scale;
  float shift;
};

// Shared by the train and eval paths so that re-applying saved batch
// statistics reproduces the training-mode output bit for bit.
Affine bn_affine(float gamma, float beta, float mean, float var, float eps) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(var) + static_cast<double>(eps));
  return {static_cast<float>(gamma * inv), static_cast<float>(beta - mean * gamma * inv)};
}

}  // namespace

void conv3x3_forward(const ConvGeometry& g, std::span<const float> x,
                     std::span<const float> weight, std::span<const float> bias,
                     std::span<float> y) {
  const std::size_t plane = g.height * g.width;
  const std::size_t k = g.in_ch * 9;
  std::vector<float> col(k * plane);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col3x3(x.data() + n * g.in_ch * plane, g.in_ch, g.height, g.width, col.data());
    float* out = y.data() + n * g.out_ch * plane;
    gemm(Trans::No, Trans::No, g.out_ch, plane, k, 1.0f, weight.data(), k, col.data(), plane,
         0.0f, out, plane);
    if (bias.empty()) continue;
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < static_cast<Index>(g.out_ch); ++o) {
      float* row = out + static_cast<std::size_t>(o) * plane;
      const float b = bias[static_cast<std::size_t>(o)];
      for (std::size_t p = 0; p < plane; ++p) row[p] += b;
    }
  }
}

void conv3x3_backward(const ConvGeometry& g, std::span<const float> x,
                      std::span<const float> weight, std::span<const float> dy,
                      std::span<float> dx, std::span<float> dweight, std::span<float> dbias) {
  const std::size_t plane = g.height * g.width;
  const std::size_t k = g.in_ch * 9;
  if (!dbias.empty()) {
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < static_cast<Index>(g.out_ch); ++o) {
      double sum = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        const float* row = dy.data() + (n * g.out_ch + static_cast<std::size_t>(o)) * plane;
        float partial = 0.0f;
        for (std::size_t p = 0; p < plane; ++p) partial += row[p];
        sum += partial;
      }
      dbias[static_cast<std::size_t>(o)] += static_cast<float>(sum);
    }
  }
  std::vector<float> col(k * plane);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* dyn = dy.data() + n * g.out_ch * plane;
    if (!dweight.empty()) {
      im2col3x3(x.data() + n * g.in_ch * plane, g.in_ch, g.height, g.width, col.data());
      gemm(Trans::No, Trans::Yes, g.out_ch, k, plane, 1.0f, dyn, plane, col.data(), plane, 1.0f,
           dweight.data(), k);
    }
    if (!dx.empty()) {
      gemm(Trans::Yes, Trans::No, k, plane, g.out_ch, 1.0f, weight.data(), k, dyn, plane, 0.0f,
           col.data(), plane);
      col2im3x3(col.data(), g.in_ch, g.height, g.width, dx.data() + n * g.in_ch * plane);
    }
  }
}

void batchnorm_train_forward(const PlaneGeometry& g, std::span<const float> x,
                             std::span<const float> gamma, std::span<const float> beta,
                             float eps, std::span<float> y, std::span<float> mean,
                             std::span<float> var) {
  const std::size_t plane = g.plane();
  const double count = static_cast<double>(g.batch * plane);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(g.channels); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double sum = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const float* src = x.data() + (n * g.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) sum += src[p];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const float* src = x.data() + (n * g.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = src[p] - mu;
        sq += d * d;
      }
    }
    mean[c] = static_cast<float>(mu);
    var[c] = static_cast<float>(sq / count);
    const Affine t = bn_affine(gamma[c], beta[c], mean[c], var[c], eps);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const float* src = x.data() + (n * g.channels + c) * plane;
      float* dst = y.data() + (n * g.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] * t.scale + t.shift;
    }
  }
}

void batchnorm_eval_forward(const PlaneGeometry& g, std::span<const float> x,
                            std::span<const float> gamma, std::span<const float> beta,
                            std::span<const float> running_mean,
                            std::span<const float> running_var, float eps, std::span<float> y) {
  const std::size_t plane = g.plane();
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const std::size_t c = static_cast<std::size_t>(pi) % g.channels;
    const Affine t = bn_affine(gamma[c], beta[c], running_mean[c], running_var[c], eps);
    const float* src = x.data() + static_cast<std::size_t>(pi) * plane;
    float* dst = y.data() + static_cast<std::size_t>(pi) * plane;
    for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] * t.scale + t.shift;
  }
}

void batchnorm_backward(const PlaneGeometry& g, std::span<const float> x,
                        std::span<const float> dy, std::span<const float> gamma,
                        std::span<const float> mean, std::span<const float> var, float eps,
                        std::span<float> dx, std::span<float> dgamma, std::span<float> dbeta) {
  const std::size_t plane = g.plane();
  const double count = static_cast<double>(g.batch * plane);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < static_cast<Index>(g.channels); ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[c]) + eps);
    const double mu = mean[c];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const std::size_t base = (n * g.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = dy[base + p];
        sum_dy += d;
        sum_dy_xhat += d * (x[base + p] - mu);
      }
    }
    sum_dy_xhat *= inv;
    dgamma[c] += static_cast<float>(sum_dy_xhat);
    dbeta[c] += static_cast<float>(sum_dy);
    if (dx.empty()) continue;
    const double scale = gamma[c] * inv / count;
    const auto a = static_cast<float>(scale * count);
    const auto b = static_cast<float>(scale * sum_dy_xhat * inv);
    const auto off = static_cast<float>(-scale * sum_dy + scale * sum_dy_xhat * inv * mu);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const std::size_t base = (n * g.channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        dx[base + p] = a * dy[base + p] - b * x[base + p] + off;
      }
    }
  }
}

void relu_forward(std::span<float> x) {
  const Index n = static_cast<Index>(x.size());
  float* p = x.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

void relu_backward(std::span<const float> y, std::span<float> dy) {
  const Index n = static_cast<Index>(dy.size());
  float* d = dy.data();
  const float* out = y.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) d[i] = out[i] > 0.0f ? d[i] : 0.0f;
}

void maxpool2x2_forward(const PlaneGeometry& g, std::span<const float> x, std::span<float> y,
                        std::span<std::uint8_t> argmax) {
  const std::size_t oh = g.height / 2;
  const std::size_t ow = g.width / 2;
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    for (std::size_t r = 0; r < oh; ++r) {
      const float* top = x.data() + (p * g.height + 2 * r) * g.width;
      const float* bottom = top + g.width;
      float* out = y.data() + (p * oh + r) * ow;
      std::uint8_t* arg = argmax.data() + (p * oh + r) * ow;
      for (std::size_t c = 0; c < ow; ++c) {
        float best = top[2 * c];
        std::uint8_t slot = 0;
        if (top[2 * c + 1] > best) { best = top[2 * c + 1]; slot = 1; }
        if (bottom[2 * c] > best) { best = bottom[2 * c]; slot = 2; }
        if (bottom[2 * c + 1] > best) { best = bottom[2 * c + 1]; slot = 3; }
        out[c] = best;
        arg[c] = slot;
      }
    }
  }
}

void maxpool2x2_backward(const PlaneGeometry& g, std::span<const float> dy,
                         std::span<const std::uint8_t> argmax, std::span<float> dx) {
  const std::size_t oh = g.height / 2;
  const std::size_t ow = g.width / 2;
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < planes; ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    float* plane = dx.data() + p * g.height * g.width;
    std::fill(plane, plane + g.height * g.width, 0.0f);
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const std::size_t o = (p * oh + r) * ow + c;
        const std::size_t s = argmax[o];
        plane[(2 * r + s / 2) * g.width + 2 * c + s % 2] = dy[o];
      }
    }
  }
}

void global_avgpool_forward(const PlaneGeometry& g, std::span<const float> x, std::span<float> y) {
  const std::size_t plane = g.plane();
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    double sum = 0.0;
    const float* src = x.data() + static_cast<std::size_t>(p) * plane;
    for (std::size_t i = 0; i < plane; ++i) sum += src[i];
    y[static_cast<std::size_t>(p)] = static_cast<float>(sum / static_cast<double>(plane));
  }
}

void global_avgpool_backward(const PlaneGeometry& g, std::span<const float> dy,
                             std::span<float> dx) {
  const std::size_t plane = g.plane();
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    const float share = dy[static_cast<std::size_t>(p)] / static_cast<float>(plane);
    float* dst = dx.data() + static_cast<std::size_t>(p) * plane;
    std::fill(dst, dst + plane, share);
  }
}

void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> weight, std::span<const float> bias,
                    std::span<float> y) {
  gemm(Trans::No, Trans::Yes, batch, out, in, 1.0f, x.data(), in, weight.data(), in, 0.0f,
       y.data(), out);
  if (bias.empty()) return;
  for (std::size_t n = 0; n < batch; ++n) {
    float* row = y.data() + n * out;
    for (std::size_t o = 0; o < out; ++o) row[o] += bias[o];
  }
}

void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const float> x,
                     std::span<const float> weight, std::span<const float> dy,
                     std::span<float> dx, std::span<float> dweight, std::span<float> dbias) {
  if (!dbias.empty()) {
    for (std::size_t n = 0; n < batch; ++n) {
      const float* row = dy.data() + n * out;
      for (std::size_t o = 0; o < out; ++o) dbias[o] += row[o];
    }
  }
  if (!dweight.empty()) {
    gemm(Trans::Yes, Trans::No, out, in, batch, 1.0f, dy.data(), out, x.data(), in, 1.0f,
         dweight.data(), in);
  }
  if (!dx.empty()) {
    gemm(Trans::No, Trans::No, batch, in, out, 1.0f, dy.data(), out, weight.data(), in, 0.0f,
         dx.data(), in);
  }
}

void sigmoid_forward(std::span<float> x) {
  const Index n = static_cast<Index>(x.size());
  float* p = x.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) p[i] = 1.0f / (1.0f + std::exp(-p[i]));
}

void sigmoid_backward(std::span<const float> y, std::span<float> dy) {
  const Index n = static_cast<Index>(dy.size());
  float* d = dy.data();
  const float* out = y.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) d[i] *= out[i] * (1.0f - out[i]);
}

void resize_bilinear_to_chw(std::span<const float> src, std::size_t src_h, std::size_t src_w,
                            std::size_t dst_h, std::size_t dst_w, std::span<float> dst) {
  std::vector<std::size_t> x0(dst_w), x1(dst_w);
  std::vector<float> wx(dst_w);
  const double sx_scale = static_cast<double>(src_w) / static_cast<double>(dst_w);
  for (std::size_t c = 0; c < dst_w; ++c) {
    const double sx = std::clamp((static_cast<double>(c) + 0.5) * sx_scale - 0.5, 0.0,
                                 static_cast<double>(src_w - 1));
    x0[c] = static_cast<std::size_t>(sx);
    x1[c] = std::min(x0[c] + 1, src_w - 1);
    wx[c] = static_cast<float>(sx - static_cast<double>(x0[c]));
  }
  const double sy_scale = static_cast<double>(src_h) / static_cast<double>(dst_h);
#pragma omp parallel for schedule(static)
  for (Index ri = 0; ri < static_cast<Index>(dst_h); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const double sy = std::clamp((static_cast<double>(r) + 0.5) * sy_scale - 0.5, 0.0,
                                 static_cast<double>(src_h - 1));
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, src_h - 1);
    const double wy = sy - static_cast<double>(y0);
    const float* row0 = src.data() + y0 * src_w * 3;
    const float* row1 = src.data() + y1 * src_w * 3;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      float* out = dst.data() + (ch * dst_h + r) * dst_w;
      for (std::size_t c = 0; c < dst_w; ++c) {
        const double w = wx[c];
        const double top = row0[x0[c] * 3 + ch] * (1.0 - w) + row0[x1[c] * 3 + ch] * w;
        const double bottom = row1[x0[c] * 3 + ch] * (1.0 - w) + row1[x1[c] * 3 + ch] * w;
        out[c] = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
}

}  // namespace apex::nn::kernels
