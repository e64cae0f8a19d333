#include "apex/nn/gemm.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>

namespace apex::nn {
namespace {

constexpr std::size_t kMR = 8;
constexpr std::size_t kNR = 32;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 128;
constexpr std::size_t kNC = 2048;

using v16f = float __attribute__((vector_size(64)));

struct AlignedFree {
  void operator()(float* p) const { std::free(p); }
};
using Buffer = std::unique_ptr<float[], AlignedFree>;

Buffer make_buffer(std::size_t count) {
  const std::size_t bytes = ((count * sizeof(float) + 63) / 64) * 64;
  return Buffer(static_cast<float*>(std::aligned_alloc(64, std::max<std::size_t>(bytes, 64))));
}

inline float element(const float* p, std::size_t ld, Trans t, std::size_t r, std::size_t c) {
  return t == Trans::No ? p[r * ld + c] : p[c * ld + r];
}

// op(A)[0:m, pc:pc+kc] into MR-row panels, alpha folded in, zero padded.
void pack_a(Trans ta, const float* a, std::size_t lda, std::size_t m, std::size_t pc,
            std::size_t kc, float alpha, float* out) {
  const std::size_t panels = (m + kMR - 1) / kMR;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(panels); ++pi) {
    const std::size_t ir = static_cast<std::size_t>(pi) * kMR;
    const std::size_t mr = std::min(kMR, m - ir);
    float* dst = out + static_cast<std::size_t>(pi) * kMR * kc;
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < kMR; ++r) {
        dst[p * kMR + r] = r < mr ? alpha * element(a, lda, ta, ir + r, pc + p) : 0.0f;
      }
    }
  }
}

// op(B)[pc:pc+kc, jc:jc+nc] into NR-column panels, zero padded.
void pack_b(Trans tb, const float* b, std::size_t ldb, std::size_t pc, std::size_t kc,
            std::size_t jc, std::size_t nc, float* out) {
  const std::size_t panels = (nc + kNR - 1) / kNR;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pj = 0; pj < static_cast<std::ptrdiff_t>(panels); ++pj) {
    const std::size_t jr = static_cast<std::size_t>(pj) * kNR;
    const std::size_t nr = std::min(kNR, nc - jr);
    float* dst = out + static_cast<std::size_t>(pj) * kNR * kc;
    for (std::size_t p = 0; p < kc; ++p) {
      float* row = dst + p * kNR;
      if (tb == Trans::No) {
        const float* src = b + (pc + p) * ldb + jc + jr;
        std::memcpy(row, src, nr * sizeof(float));
      } else {
        for (std::size_t c = 0; c < nr; ++c) row[c] = b[(jc + jr + c) * ldb + pc + p];
      }
      for (std::size_t c = nr; c < kNR; ++c) row[c] = 0.0f;
    }
  }
}

void micro_kernel(std::size_t kc, const float* ap, const float* bp, float* c, std::size_t ldc,
                  std::size_t mr, std::size_t nr) {
  v16f acc[kMR][2];
  for (std::size_t r = 0; r < kMR; ++r) {
    acc[r][0] = v16f{};
    acc[r][1] = v16f{};
  }
  for (std::size_t p = 0; p < kc; ++p) {
    v16f b0;
    v16f b1;
    std::memcpy(&b0, bp, sizeof(v16f));
    std::memcpy(&b1, bp + 16, sizeof(v16f));
    bp += kNR;
    for (std::size_t r = 0; r < kMR; ++r) {
      const float a = ap[r];
      acc[r][0] += a * b0;
      acc[r][1] += a * b1;
    }
    ap += kMR;
  }
  if (mr == kMR && nr == kNR) {
    for (std::size_t r = 0; r < kMR; ++r) {
      float* row = c + r * ldc;
      v16f c0;
      v16f c1;
      std::memcpy(&c0, row, sizeof(v16f));
      std::memcpy(&c1, row + 16, sizeof(v16f));
      c0 += acc[r][0];
      c1 += acc[r][1];
      std::memcpy(row, &c0, sizeof(v16f));
      std::memcpy(row + 16, &c1, sizeof(v16f));
    }
    return;
  }
  alignas(64) float tile[kMR][kNR];
  std::memcpy(tile, acc, sizeof(tile));
  for (std::size_t r = 0; r < mr; ++r) {
    for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] += tile[r][j];
  }
}

void scale_c(std::size_t m, std::size_t n, float beta, float* c, std::size_t ldc) {
  if (beta == 1.0f) return;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    float* row = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0f) {
      std::fill(row, row + n, 0.0f);
    } else {
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  if (m == 0 || n == 0) return;
  scale_c(m, n, beta, c, ldc);
  if (k == 0 || alpha == 0.0f) return;

  const std::size_t m_panels = (m + kMR - 1) / kMR;
  Buffer apack = make_buffer(m_panels * kMR * std::min(k, kKC));
  Buffer bpack = make_buffer(std::min(((n + kNR - 1) / kNR) * kNR, kNC) * std::min(k, kKC));

  for (std::size_t jc = 0; jc < n; jc += kNC) {
    const std::size_t nc = std::min(kNC, n - jc);
    const std::size_t n_panels = (nc + kNR - 1) / kNR;
    for (std::size_t pc = 0; pc < k; pc += kKC) {
      const std::size_t kc = std::min(kKC, k - pc);
      pack_a(ta, a, lda, m, pc, kc, alpha, apack.get());
      pack_b(tb, b, ldb, pc, kc, jc, nc, bpack.get());

      const std::size_t m_blocks = (m + kMC - 1) / kMC;
      const std::ptrdiff_t tiles = static_cast<std::ptrdiff_t>(m_blocks * n_panels);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t t = 0; t < tiles; ++t) {
        const std::size_t ib = static_cast<std::size_t>(t) / n_panels;
        const std::size_t pj = static_cast<std::size_t>(t) % n_panels;
        const std::size_t jr = pj * kNR;
        const std::size_t nr = std::min(kNR, nc - jr);
        const std::size_t i_end = std::min(m, (ib + 1) * kMC);
        for (std::size_t ir = ib * kMC; ir < i_end; ir += kMR) {
          const std::size_t mr = std::min(kMR, m - ir);
          micro_kernel(kc, apack.get() + (ir / kMR) * kMR * kc, bpack.get() + pj * kNR * kc,
                       c + ir * ldc + jc + jr, ldc, mr, nr);
        }
      }
    }
  }
}

void gemm_reference(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                    float alpha, const float* a, std::size_t lda, const float* b,
                    std::size_t ldb, float beta, float* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        sum += static_cast<double>(element(a, lda, ta, i, p)) *
               static_cast<double>(element(b, ldb, tb, p, j));
      }
      float& out = c[i * ldc + j];
      out = (beta == 0.0f ? 0.0f : beta * out) + alpha * static_cast<float>(sum);
    }
  }
}

}  // namespace apex::nn
