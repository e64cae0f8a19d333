#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

// Layer kernels in two flavours with identical signatures:
//   apex::nn::kernels   - OpenMP-parallel, im2col + packed GEMM for convolution
//   apex::nn::reference - serial direct loops, the ground truth in tests
//
// All tensors are dense NCHW float arrays. Gradient outputs named d* with
// "accumulate" semantics add into the destination; everything else overwrites.
// Passing an empty span for an optional gradient skips computing it.

namespace apex::nn {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t input_size() const noexcept { return batch * in_ch * height * width; }
  std::size_t output_size() const noexcept { return batch * out_ch * height * width; }
  std::size_t weight_size() const noexcept { return out_ch * in_ch * 9; }
};

// Plane-wise geometry for per-channel ops: `batch` images x `channels` planes
// of `height` x `width`.
struct PlaneGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t plane() const noexcept { return height * width; }
  std::size_t size() const noexcept { return batch * channels * height * width; }
};

namespace kernels {
#include "apex/nn/detail/kernel_api.inc"
}  // namespace kernels

namespace reference {
#include "apex/nn/detail/kernel_api.inc"
}  // namespace reference

}  // namespace apex::nn
