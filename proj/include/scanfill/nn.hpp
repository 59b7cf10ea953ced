#ifndef SCANFILL_NN_HPP
#define SCANFILL_NN_HPP

#include <cstring>

#include "scanfill/tensor.hpp"

namespace scanfill {
namespace detail {

// C[M,N] += A[M,K] * B[K,N], row-major contiguous
template <typename T>
void gemm(std::int64_t M, std::int64_t N, std::int64_t K, const T* A,
          const T* B, T* C) {
  for (std::int64_t m = 0; m < M; ++m) {
    const T* a_row = A + m * K;
    T* c_row = C + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const T a = a_row[k];
      const T* b_row = B + k * N;
      for (std::int64_t n = 0; n < N; ++n) c_row[n] += a * b_row[n];
    }
  }
}

// C[K,N] += A^T * B where A is [M,K], B is [M,N]
template <typename T>
void gemm_at(std::int64_t M, std::int64_t N, std::int64_t K, const T* A,
             const T* B, T* C) {
  for (std::int64_t m = 0; m < M; ++m) {
    const T* a_row = A + m * K;
    const T* b_row = B + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const T a = a_row[k];
      T* c_row = C + k * N;
      for (std::int64_t n = 0; n < N; ++n) c_row[n] += a * b_row[n];
    }
  }
}

// C[M,K] += A * B^T where A is [M,N], B is [K,N]
template <typename T>
void gemm_bt(std::int64_t M, std::int64_t N, std::int64_t K, const T* A,
             const T* B, T* C) {
  for (std::int64_t m = 0; m < M; ++m) {
    const T* a_row = A + m * N;
    T* c_row = C + m * K;
    for (std::int64_t k = 0; k < K; ++k) {
      const T* b_row = B + k * N;
      T acc = 0;
      for (std::int64_t n = 0; n < N; ++n) acc += a_row[n] * b_row[n];
      c_row[k] += acc;
    }
  }
}

struct ConvDims {
  std::int64_t B, Ci, H, W, Co, kH, kW, stride, pad, OH, OW;
};

inline ConvDims conv_dims(const Shape& x, const Shape& w, std::int64_t stride,
                          std::int64_t pad) {
  if (x.size() != 4 || w.size() != 4)
    shape_error("conv2d expects 4-d input " + shape_str(x) + " and kernel " +
                shape_str(w));
  ConvDims d;
  d.B = x[0];
  d.Ci = x[1];
  d.H = x[2];
  d.W = x[3];
  d.Co = w[0];
  d.kH = w[2];
  d.kW = w[3];
  d.stride = stride;
  d.pad = pad;
  if (w[1] != d.Ci)
    shape_error("conv2d channel mismatch: input " + shape_str(x) +
                " vs kernel " + shape_str(w));
  if (d.kH > d.H + 2 * pad || d.kW > d.W + 2 * pad)
    shape_error("conv2d kernel " + shape_str(w) + " larger than padded input " +
                shape_str(x));
  if (stride < 1) shape_error("conv2d stride must be >= 1");
  d.OH = (d.H + 2 * pad - d.kH) / stride + 1;
  d.OW = (d.W + 2 * pad - d.kW) / stride + 1;
  return d;
}

// one batch item: x[Ci,H,W] -> col[Ci*kH*kW, OH*OW]
template <typename T>
void im2col(const T* x, const ConvDims& d, T* col) {
  const std::int64_t N = d.OH * d.OW;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < d.Ci; ++c) {
    const T* xc = x + c * d.H * d.W;
    for (std::int64_t kh = 0; kh < d.kH; ++kh)
      for (std::int64_t kw = 0; kw < d.kW; ++kw, ++row) {
        T* out = col + row * N;
        for (std::int64_t oh = 0; oh < d.OH; ++oh) {
          const std::int64_t ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.H) {
            std::memset(out + oh * d.OW, 0, sizeof(T) * d.OW);
            continue;
          }
          const T* src = xc + ih * d.W;
          T* dst = out + oh * d.OW;
          for (std::int64_t ow = 0; ow < d.OW; ++ow) {
            const std::int64_t iw = ow * d.stride - d.pad + kw;
            dst[ow] = (iw >= 0 && iw < d.W) ? src[iw] : T(0);
          }
        }
      }
  }
}

// adjoint of im2col: scatter-add col back into x
template <typename T>
void col2im(const T* col, const ConvDims& d, T* x) {
  const std::int64_t N = d.OH * d.OW;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < d.Ci; ++c) {
    T* xc = x + c * d.H * d.W;
    for (std::int64_t kh = 0; kh < d.kH; ++kh)
      for (std::int64_t kw = 0; kw < d.kW; ++kw, ++row) {
        const T* in = col + row * N;
        for (std::int64_t oh = 0; oh < d.OH; ++oh) {
          const std::int64_t ih = oh * d.stride - d.pad + kh;
          if (ih < 0 || ih >= d.H) continue;
          T* dst = xc + ih * d.W;
          const T* src = in + oh * d.OW;
          for (std::int64_t ow = 0; ow < d.OW; ++ow) {
            const std::int64_t iw = ow * d.stride - d.pad + kw;
            if (iw >= 0 && iw < d.W) dst[iw] += src[ow];
          }
        }
      }
  }
}

template <typename T>
std::vector<T> conv_forward(const std::vector<T>& x, const std::vector<T>& w,
                            const ConvDims& d) {
  const std::int64_t K = d.Ci * d.kH * d.kW;
  const std::int64_t N = d.OH * d.OW;
  std::vector<T> y(static_cast<std::size_t>(d.B * d.Co * N), T(0));
  std::vector<T> col(static_cast<std::size_t>(K * N));
  for (std::int64_t b = 0; b < d.B; ++b) {
    im2col(&x[b * d.Ci * d.H * d.W], d, col.data());
    gemm(d.Co, N, K, w.data(), col.data(), &y[b * d.Co * N]);
  }
  return y;
}

// gx[B,Ci,H,W] += W^T applied to gy
template <typename T>
void conv_backward_input(const std::vector<T>& gy, const std::vector<T>& w,
                         const ConvDims& d, std::vector<T>& gx) {
  const std::int64_t K = d.Ci * d.kH * d.kW;
  const std::int64_t N = d.OH * d.OW;
  std::vector<T> col(static_cast<std::size_t>(K * N));
  for (std::int64_t b = 0; b < d.B; ++b) {
    std::fill(col.begin(), col.end(), T(0));
    gemm_at(d.Co, N, K, w.data(), &gy[b * d.Co * N], col.data());
    col2im(col.data(), d, &gx[b * d.Ci * d.H * d.W]);
  }
}

template <typename T>
void conv_backward_kernel(const std::vector<T>& x, const std::vector<T>& gy,
                          const ConvDims& d, std::vector<T>& gw) {
  const std::int64_t K = d.Ci * d.kH * d.kW;
  const std::int64_t N = d.OH * d.OW;
  std::vector<T> col(static_cast<std::size_t>(K * N));
  for (std::int64_t b = 0; b < d.B; ++b) {
    im2col(&x[b * d.Ci * d.H * d.W], d, col.data());
    gemm_bt(d.Co, N, K, &gy[b * d.Co * N], col.data(), gw.data());
  }
}

}  // namespace detail

// 2D cross-correlation, differentiable w.r.t. input and kernel.
// input [B,Ci,H,W], kernel [Co,Ci,kH,kW] -> [B,Co,OH,OW]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 std::int64_t stride = 1, std::int64_t pad = 0) {
  const auto d = detail::conv_dims(input.shape(), kernel.shape(), stride, pad);
  auto y = detail::conv_forward(input.data(), kernel.data(), d);
  return detail::make_op<T>(
      {d.B, d.Co, d.OH, d.OW}, std::move(y), {input, kernel},
      [d](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        auto& w = *n.parents[1];
        if (x.requires_grad) {
          x.ensure_grad();
          detail::conv_backward_input(n.grad, w.value, d, x.grad);
        }
        if (w.requires_grad) {
          w.ensure_grad();
          detail::conv_backward_kernel(x.value, n.grad, d, w.grad);
        }
      });
}

// Adjoint of conv2d with matching parameters: maps a [B,Co,OH,OW] tensor back
// to [B,Ci,H,W] with H = (OH-1)*stride + kH - 2*pad.
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                            std::int64_t stride = 1, std::int64_t pad = 0) {
  const Shape& xs = input.shape();
  const Shape& ws = kernel.shape();
  if (xs.size() != 4 || ws.size() != 4)
    shape_error("transposed_conv2d expects 4-d input " + shape_str(xs) +
                " and kernel " + shape_str(ws));
  if (xs[1] != ws[0])
    shape_error("transposed_conv2d channel mismatch: input " + shape_str(xs) +
                " vs kernel " + shape_str(ws));
  detail::ConvDims d;
  d.B = xs[0];
  d.Co = ws[0];
  d.Ci = ws[1];
  d.kH = ws[2];
  d.kW = ws[3];
  d.stride = stride;
  d.pad = pad;
  d.OH = xs[2];
  d.OW = xs[3];
  d.H = (d.OH - 1) * stride + d.kH - 2 * pad;
  d.W = (d.OW - 1) * stride + d.kW - 2 * pad;
  if (d.H < 1 || d.W < 1)
    shape_error("transposed_conv2d produces empty output for input " +
                shape_str(xs));
  std::vector<T> y(static_cast<std::size_t>(d.B * d.Ci * d.H * d.W), T(0));
  detail::conv_backward_input(input.data(), kernel.data(), d, y);
  return detail::make_op<T>(
      {d.B, d.Ci, d.H, d.W}, std::move(y), {input, kernel},
      [d](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        auto& w = *n.parents[1];
        if (x.requires_grad) {
          x.ensure_grad();
          auto gx = detail::conv_forward(n.grad, w.value, d);
          for (std::size_t i = 0; i < gx.size(); ++i) x.grad[i] += gx[i];
        }
        if (w.requires_grad) {
          w.ensure_grad();
          detail::conv_backward_kernel(n.grad, x.value, d, w.grad);
        }
      });
}

// Channel-shared smoothing filter: the same 2D kernel is cross-correlated
// with every channel. input [B,C,H,W], kernel [kH,kW], stride 1.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           std::int64_t pad = 0) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4 || ks.size() != 2)
    shape_error("depthwise_conv2d expects input [B,C,H,W] and kernel [kH,kW]");
  const std::int64_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::int64_t kH = ks[0], kW = ks[1];
  if (kH > H + 2 * pad || kW > W + 2 * pad)
    shape_error("depthwise kernel " + shape_str(ks) + " larger than input " +
                shape_str(xs));
  const std::int64_t OH = H + 2 * pad - kH + 1;
  const std::int64_t OW = W + 2 * pad - kW + 1;
  const auto& xv = input.data();
  const auto& kv = kernel.data();
  std::vector<T> y(static_cast<std::size_t>(B * C * OH * OW), T(0));
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    const T* xp = &xv[bc * H * W];
    T* yp = &y[bc * OH * OW];
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        T acc = 0;
        for (std::int64_t kh = 0; kh < kH; ++kh) {
          const std::int64_t ih = oh - pad + kh;
          if (ih < 0 || ih >= H) continue;
          for (std::int64_t kw = 0; kw < kW; ++kw) {
            const std::int64_t iw = ow - pad + kw;
            if (iw < 0 || iw >= W) continue;
            acc += xp[ih * W + iw] * kv[kh * kW + kw];
          }
        }
        yp[oh * OW + ow] = acc;
      }
  }
  return detail::make_op<T>(
      {B, C, OH, OW}, std::move(y), {input, kernel},
      [B, C, H, W, kH, kW, pad, OH, OW](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        auto& k = *n.parents[1];
        if (x.requires_grad) x.ensure_grad();
        if (k.requires_grad) k.ensure_grad();
        for (std::int64_t bc = 0; bc < B * C; ++bc) {
          const T* xp = &x.value[bc * H * W];
          const T* gp = &n.grad[bc * OH * OW];
          for (std::int64_t oh = 0; oh < OH; ++oh)
            for (std::int64_t ow = 0; ow < OW; ++ow) {
              const T g = gp[oh * OW + ow];
              if (g == T(0)) continue;
              for (std::int64_t kh = 0; kh < kH; ++kh) {
                const std::int64_t ih = oh - pad + kh;
                if (ih < 0 || ih >= H) continue;
                for (std::int64_t kw = 0; kw < kW; ++kw) {
                  const std::int64_t iw = ow - pad + kw;
                  if (iw < 0 || iw >= W) continue;
                  if (x.requires_grad)
                    x.grad[bc * H * W + ih * W + iw] += g * k.value[kh * kW + kw];
                  if (k.requires_grad)
                    k.grad[kh * kW + kw] += g * xp[ih * W + iw];
                }
              }
            }
        }
      });
}

// Non-overlapping average pooling with floor semantics: trailing rows/columns
// that do not fill a window are dropped (and receive zero gradient).
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, std::int64_t k) {
  const Shape& xs = input.shape();
  if (xs.size() != 4) shape_error("avg_pool2d expects [B,C,H,W]");
  if (k < 1 || k > xs[2] || k > xs[3])
    shape_error("avg_pool2d window " + std::to_string(k) +
                " invalid for input " + shape_str(xs));
  const std::int64_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::int64_t OH = H / k, OW = W / k;
  const T inv = T(1) / static_cast<T>(k * k);
  const auto& xv = input.data();
  std::vector<T> y(static_cast<std::size_t>(B * C * OH * OW));
  for (std::int64_t bc = 0; bc < B * C; ++bc)
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        T acc = 0;
        for (std::int64_t i = 0; i < k; ++i)
          for (std::int64_t j = 0; j < k; ++j)
            acc += xv[bc * H * W + (oh * k + i) * W + ow * k + j];
        y[bc * OH * OW + oh * OW + ow] = acc * inv;
      }
  return detail::make_op<T>(
      {B, C, OH, OW}, std::move(y), {input},
      [B, C, H, W, OH, OW, k, inv](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        x.ensure_grad();
        for (std::int64_t bc = 0; bc < B * C; ++bc)
          for (std::int64_t oh = 0; oh < OH; ++oh)
            for (std::int64_t ow = 0; ow < OW; ++ow) {
              const T g = n.grad[bc * OH * OW + oh * OW + ow] * inv;
              for (std::int64_t i = 0; i < k; ++i)
                for (std::int64_t j = 0; j < k; ++j)
                  x.grad[bc * H * W + (oh * k + i) * W + ow * k + j] += g;
            }
      });
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, std::int64_t factor) {
  const Shape& xs = input.shape();
  if (xs.size() != 4) shape_error("upsample_nearest expects [B,C,H,W]");
  if (factor < 1) shape_error("upsample factor must be >= 1");
  const std::int64_t B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const std::int64_t OH = H * factor, OW = W * factor;
  const auto& xv = input.data();
  std::vector<T> y(static_cast<std::size_t>(B * C * OH * OW));
  for (std::int64_t bc = 0; bc < B * C; ++bc)
    for (std::int64_t oh = 0; oh < OH; ++oh)
      for (std::int64_t ow = 0; ow < OW; ++ow)
        y[bc * OH * OW + oh * OW + ow] =
            xv[bc * H * W + (oh / factor) * W + ow / factor];
  return detail::make_op<T>(
      {B, C, OH, OW}, std::move(y), {input},
      [B, C, H, W, OH, OW, factor](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        x.ensure_grad();
        for (std::int64_t bc = 0; bc < B * C; ++bc)
          for (std::int64_t oh = 0; oh < OH; ++oh)
            for (std::int64_t ow = 0; ow < OW; ++ow)
              x.grad[bc * H * W + (oh / factor) * W + ow / factor] +=
                  n.grad[bc * OH * OW + oh * OW + ow];
      });
}

// input [B,I] x weight [I,O] + bias [O] -> [B,O]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[0])
    shape_error("linear shape mismatch: input " + shape_str(xs) +
                " vs weight " + shape_str(ws));
  if (bias.shape() != Shape{ws[1]})
    shape_error("linear bias must be [" + std::to_string(ws[1]) + "]");
  const std::int64_t B = xs[0], I = xs[1], O = ws[1];
  std::vector<T> y(static_cast<std::size_t>(B * O));
  for (std::int64_t b = 0; b < B; ++b)
    std::copy_n(bias.data().begin(), O, y.begin() + b * O);
  detail::gemm(B, O, I, input.data().data(), weight.data().data(), y.data());
  return detail::make_op<T>(
      {B, O}, std::move(y), {input, weight, bias},
      [B, I, O](TensorNode<T>& n) {
        auto& x = *n.parents[0];
        auto& w = *n.parents[1];
        auto& bvec = *n.parents[2];
        if (x.requires_grad) {
          x.ensure_grad();
          detail::gemm_bt(B, O, I, n.grad.data(), w.value.data(), x.grad.data());
        }
        if (w.requires_grad) {
          w.ensure_grad();
          detail::gemm_at(B, O, I, x.value.data(), n.grad.data(), w.grad.data());
        }
        if (bvec.requires_grad) {
          bvec.ensure_grad();
          for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t o = 0; o < O; ++o)
              bvec.grad[o] += n.grad[b * O + o];
        }
      });
}

}  // namespace scanfill

#endif  // SCANFILL_NN_HPP
