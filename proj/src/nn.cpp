#include "fpforge/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

namespace fpforge::nn {

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<RowMat<S>>;
template <typename S>
using CMapRM = Eigen::Map<const RowMat<S>>;

template <typename S>
void check_4d(const TensorT<S>& x, const char* who) {
  if (x.ndim() != 4) throw std::invalid_argument(std::string(who) + ": expected NCHW tensor");
}

// im2col for one sample: input (C,H,W) slice -> buffer (C*k*k, L) row-major,
// L = oh*ow. Zero padding outside the image.
template <typename S>
void im2col(const S* x, int C, int H, int W, int k, int stride, int pad, int oh, int ow,
            S* cols) {
  const int L = oh * ow;
  for (int ci = 0; ci < C; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* dst = cols + ((ci * k + ky) * k + kx) * static_cast<ptrdiff_t>(L);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + ow, S(0));
            dst += ow;
            continue;
          }
          const S* src_row = x + (static_cast<ptrdiff_t>(ci) * H + iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < W) ? src_row[ix] : S(0);
          }
          dst += ow;
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add buffer (C*k*k, L) back into (C,H,W).
template <typename S>
void col2im(const S* cols, int C, int H, int W, int k, int stride, int pad, int oh, int ow,
            S* x) {
  const int L = oh * ow;
  for (int ci = 0; ci < C; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const S* src = cols + ((ci * k + ky) * k + kx) * static_cast<ptrdiff_t>(L);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            src += ow;
            continue;
          }
          S* dst_row = x + (static_cast<ptrdiff_t>(ci) * H + iy) * W;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst_row[ix] += src[ox];
          }
          src += ow;
        }
      }
    }
  }
}

template <typename S>
void he_normal_init(TensorT<S>& w, int fan_in, RandomStream& rng) {
  double std = std::sqrt(2.0 / fan_in);
  for (auto& v : w.data) v = static_cast<S>(rng.normal(0.0, std));
}

template <typename S>
double softplus(S x) {
  double xd = static_cast<double>(x);
  return std::log1p(std::exp(-std::abs(xd))) + std::max(xd, 0.0);
}

template <typename S>
double sigmoid_d(S x) {
  double xd = static_cast<double>(x);
  if (xd >= 0) {
    double e = std::exp(-xd);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(xd);
  return e / (1.0 + e);
}

}  // namespace

// ---- Linear -------------------------------------------------------------

template <typename S>
LinearT<S>::LinearT(std::string name, int in_features, int out_features, RandomStream& rng)
    : weight(name + ".w", {out_features, in_features}),
      bias(name + ".b", {out_features}),
      in_(in_features),
      out_(out_features) {
  he_normal_init(weight.value, in_features, rng);
}

template <typename S>
TensorT<S> LinearT<S>::forward(const TensorT<S>& x, bool) {
  if (x.ndim() != 2 || x.dim(1) != in_) {
    throw std::invalid_argument("linear: bad input shape " + x.shape_str());
  }
  cached_x_ = x;
  int N = x.dim(0);
  TensorT<S> y({N, out_});
  CMapRM<S> X(x.ptr(), N, in_);
  CMapRM<S> W(weight.value.ptr(), out_, in_);
  MapRM<S> Y(y.ptr(), N, out_);
  Y.noalias() = X * W.transpose();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < out_; ++j) y.data[static_cast<size_t>(i) * out_ + j] += bias.value[j];
  }
  return y;
}

template <typename S>
TensorT<S> LinearT<S>::backward(const TensorT<S>& gy) {
  int N = cached_x_.dim(0);
  CMapRM<S> GY(gy.ptr(), N, out_);
  CMapRM<S> X(cached_x_.ptr(), N, in_);
  CMapRM<S> W(weight.value.ptr(), out_, in_);
  MapRM<S> GW(weight.grad.ptr(), out_, in_);
  GW.noalias() += GY.transpose() * X;
  for (int j = 0; j < out_; ++j) {
    S s = 0;
    for (int i = 0; i < N; ++i) s += gy.data[static_cast<size_t>(i) * out_ + j];
    bias.grad[j] += s;
  }
  TensorT<S> gx({N, in_});
  MapRM<S> GX(gx.ptr(), N, in_);
  GX.noalias() = GY * W;
  return gx;
}

template <typename S>
void LinearT<S>::collect_params(std::vector<ParamT<S>*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---- Conv2d ---------------------------------------------------------------

template <typename S>
Conv2dT<S>::Conv2dT(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
                    RandomStream& rng)
    : weight(name + ".w", {out_ch, in_ch * kernel * kernel}),
      bias(name + ".b", {out_ch}),
      cin_(in_ch),
      cout_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {
  he_normal_init(weight.value, in_ch * kernel * kernel, rng);
}

template <typename S>
TensorT<S> Conv2dT<S>::forward(const TensorT<S>& x, bool) {
  check_4d(x, "conv2d");
  if (x.dim(1) != cin_) throw std::invalid_argument("conv2d: channel mismatch");
  cached_x_ = x;
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int oh = out_size(H), ow = out_size(W);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output would be empty");
  const int ckk = cin_ * kernel_ * kernel_;
  const int L = oh * ow;
  TensorT<S> y({N, cout_, oh, ow});
  std::vector<S> cols(static_cast<size_t>(ckk) * L);
  CMapRM<S> Wm(weight.value.ptr(), cout_, ckk);
  for (int n = 0; n < N; ++n) {
    im2col(x.ptr() + static_cast<ptrdiff_t>(n) * cin_ * H * W, cin_, H, W, kernel_, stride_,
           pad_, oh, ow, cols.data());
    CMapRM<S> C(cols.data(), ckk, L);
    MapRM<S> Y(y.ptr() + static_cast<ptrdiff_t>(n) * cout_ * L, cout_, L);
    Y.noalias() = Wm * C;
  }
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < cout_; ++c) {
      S b = bias.value[c];
      S* row = y.ptr() + (static_cast<ptrdiff_t>(n) * cout_ + c) * L;
      for (int i = 0; i < L; ++i) row[i] += b;
    }
  }
  return y;
}

template <typename S>
TensorT<S> Conv2dT<S>::backward(const TensorT<S>& gy) {
  const int N = cached_x_.dim(0), H = cached_x_.dim(2), W = cached_x_.dim(3);
  const int oh = out_size(H), ow = out_size(W);
  const int ckk = cin_ * kernel_ * kernel_;
  const int L = oh * ow;
  TensorT<S> gx({N, cin_, H, W});
  std::vector<S> cols(static_cast<size_t>(ckk) * L);
  std::vector<S> dcols(static_cast<size_t>(ckk) * L);
  CMapRM<S> Wm(weight.value.ptr(), cout_, ckk);
  MapRM<S> GW(weight.grad.ptr(), cout_, ckk);
  for (int n = 0; n < N; ++n) {
    const S* xs = cached_x_.ptr() + static_cast<ptrdiff_t>(n) * cin_ * H * W;
    im2col(xs, cin_, H, W, kernel_, stride_, pad_, oh, ow, cols.data());
    CMapRM<S> C(cols.data(), ckk, L);
    CMapRM<S> GY(gy.ptr() + static_cast<ptrdiff_t>(n) * cout_ * L, cout_, L);
    GW.noalias() += GY * C.transpose();
    MapRM<S> DC(dcols.data(), ckk, L);
    DC.noalias() = Wm.transpose() * GY;
    col2im(dcols.data(), cin_, H, W, kernel_, stride_, pad_, oh, ow,
           gx.ptr() + static_cast<ptrdiff_t>(n) * cin_ * H * W);
  }
  for (int c = 0; c < cout_; ++c) {
    S s = 0;
    for (int n = 0; n < N; ++n) {
      const S* row = gy.ptr() + (static_cast<ptrdiff_t>(n) * cout_ + c) * L;
      for (int i = 0; i < L; ++i) s += row[i];
    }
    bias.grad[c] += s;
  }
  return gx;
}

template <typename S>
void Conv2dT<S>::collect_params(std::vector<ParamT<S>*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---- Upsample2x -----------------------------------------------------------

template <typename S>
TensorT<S> Upsample2xT<S>::forward(const TensorT<S>& x, bool) {
  check_4d(x, "upsample2x");
  in_shape_ = x.shape;
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  TensorT<S> y({N, C, 2 * H, 2 * W});
  for (int nc = 0; nc < N * C; ++nc) {
    const S* src = x.ptr() + static_cast<ptrdiff_t>(nc) * H * W;
    S* dst = y.ptr() + static_cast<ptrdiff_t>(nc) * 4 * H * W;
    for (int iy = 0; iy < H; ++iy) {
      S* d0 = dst + 2 * iy * (2 * W);
      S* d1 = d0 + 2 * W;
      const S* s = src + static_cast<ptrdiff_t>(iy) * W;
      for (int ix = 0; ix < W; ++ix) {
        d0[2 * ix] = s[ix];
        d0[2 * ix + 1] = s[ix];
        d1[2 * ix] = s[ix];
        d1[2 * ix + 1] = s[ix];
      }
    }
  }
  return y;
}

template <typename S>
TensorT<S> Upsample2xT<S>::backward(const TensorT<S>& gy) {
  const int N = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
  TensorT<S> gx(in_shape_);
  for (int nc = 0; nc < N * C; ++nc) {
    const S* src = gy.ptr() + static_cast<ptrdiff_t>(nc) * 4 * H * W;
    S* dst = gx.ptr() + static_cast<ptrdiff_t>(nc) * H * W;
    for (int iy = 0; iy < H; ++iy) {
      const S* s0 = src + 2 * iy * (2 * W);
      const S* s1 = s0 + 2 * W;
      S* d = dst + static_cast<ptrdiff_t>(iy) * W;
      for (int ix = 0; ix < W; ++ix) {
        d[ix] = s0[2 * ix] + s0[2 * ix + 1] + s1[2 * ix] + s1[2 * ix + 1];
      }
    }
  }
  return gx;
}

// ---- BatchNorm2d ------------------------------------------------------------

template <typename S>
BatchNorm2dT<S>::BatchNorm2dT(std::string name, int channels, double momentum, double eps)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}),
      running_var(name + ".running_var", {channels}),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {
  gamma.value.fill(S(1));
  running_var.value.fill(S(1));
}

template <typename S>
TensorT<S> BatchNorm2dT<S>::forward(const TensorT<S>& x, bool training) {
  check_4d(x, "batchnorm2d");
  if (x.dim(1) != channels_) throw std::invalid_argument("batchnorm2d: channel mismatch");
  const int N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
  const int64_t M = static_cast<int64_t>(N) * H * W;
  TensorT<S> y(x.shape);
  cached_xhat_ = TensorT<S>(x.shape);
  cached_invstd_.assign(static_cast<size_t>(C), S(0));
  cached_training_ = training;
  const ptrdiff_t plane = static_cast<ptrdiff_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0, sum2 = 0;
      for (int n = 0; n < N; ++n) {
        const S* p = x.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        for (ptrdiff_t i = 0; i < plane; ++i) {
          sum += p[i];
          sum2 += static_cast<double>(p[i]) * p[i];
        }
      }
      mean = sum / M;
      var = sum2 / M - mean * mean;
      if (var < 0) var = 0;
      running_mean.value[c] =
          static_cast<S>((1.0 - momentum_) * running_mean.value[c] + momentum_ * mean);
      running_var.value[c] =
          static_cast<S>((1.0 - momentum_) * running_var.value[c] + momentum_ * var);
    } else {
      mean = running_mean.value[c];
      var = running_var.value[c];
    }
    double invstd = 1.0 / std::sqrt(var + eps_);
    cached_invstd_[c] = static_cast<S>(invstd);
    const S g = gamma.value[c], b = beta.value[c];
    for (int n = 0; n < N; ++n) {
      const S* px = x.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
      S* ph = cached_xhat_.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
      S* py = y.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
      for (ptrdiff_t i = 0; i < plane; ++i) {
        S xh = static_cast<S>((px[i] - mean) * invstd);
        ph[i] = xh;
        py[i] = g * xh + b;
      }
    }
  }
  return y;
}

template <typename S>
TensorT<S> BatchNorm2dT<S>::backward(const TensorT<S>& gy) {
  const int N = gy.dim(0), C = channels_, H = gy.dim(2), W = gy.dim(3);
  const int64_t M = static_cast<int64_t>(N) * H * W;
  const ptrdiff_t plane = static_cast<ptrdiff_t>(H) * W;
  TensorT<S> gx(gy.shape);
  for (int c = 0; c < C; ++c) {
    double sum_gy = 0, sum_gy_xhat = 0;
    for (int n = 0; n < N; ++n) {
      const S* pgy = gy.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
      const S* ph = cached_xhat_.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
      for (ptrdiff_t i = 0; i < plane; ++i) {
        sum_gy += pgy[i];
        sum_gy_xhat += static_cast<double>(pgy[i]) * ph[i];
      }
    }
    beta.grad[c] += static_cast<S>(sum_gy);
    gamma.grad[c] += static_cast<S>(sum_gy_xhat);
    const double g = gamma.value[c];
    const double invstd = cached_invstd_[c];
    if (cached_training_) {
      const double k = g * invstd / static_cast<double>(M);
      for (int n = 0; n < N; ++n) {
        const S* pgy = gy.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        const S* ph = cached_xhat_.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        S* pgx = gx.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        for (ptrdiff_t i = 0; i < plane; ++i) {
          pgx[i] = static_cast<S>(k * (M * static_cast<double>(pgy[i]) - sum_gy -
                                       static_cast<double>(ph[i]) * sum_gy_xhat));
        }
      }
    } else {
      const double k = g * invstd;
      for (int n = 0; n < N; ++n) {
        const S* pgy = gy.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        S* pgx = gx.ptr() + (static_cast<ptrdiff_t>(n) * C + c) * plane;
        for (ptrdiff_t i = 0; i < plane; ++i) pgx[i] = static_cast<S>(k * pgy[i]);
      }
    }
  }
  return gx;
}

template <typename S>
void BatchNorm2dT<S>::collect_params(std::vector<ParamT<S>*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename S>
void BatchNorm2dT<S>::collect_buffers(std::vector<ParamT<S>*>& out) {
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

// ---- Activations ----------------------------------------------------------

template <typename S>
TensorT<S> ReLUT<S>::forward(const TensorT<S>& x, bool) {
  cached_x_ = x;
  TensorT<S> y = x;
  for (auto& v : y.data) v = v > S(0) ? v : S(0);
  return y;
}

template <typename S>
TensorT<S> ReLUT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    if (cached_x_.data[i] <= S(0)) gx.data[i] = S(0);
  }
  return gx;
}

template <typename S>
TensorT<S> LeakyReLUT<S>::forward(const TensorT<S>& x, bool) {
  cached_x_ = x;
  TensorT<S> y = x;
  for (auto& v : y.data) v = v > S(0) ? v : slope_ * v;
  return y;
}

template <typename S>
TensorT<S> LeakyReLUT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    if (cached_x_.data[i] <= S(0)) gx.data[i] *= slope_;
  }
  return gx;
}

template <typename S>
TensorT<S> SigmoidT<S>::forward(const TensorT<S>& x, bool) {
  TensorT<S> y = x;
  for (auto& v : y.data) v = static_cast<S>(sigmoid_d(v));
  cached_y_ = y;
  return y;
}

template <typename S>
TensorT<S> SigmoidT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    S y = cached_y_.data[i];
    gx.data[i] *= y * (S(1) - y);
  }
  return gx;
}

template <typename S>
TensorT<S> TanhT<S>::forward(const TensorT<S>& x, bool) {
  TensorT<S> y = x;
  for (auto& v : y.data) v = static_cast<S>(std::tanh(static_cast<double>(v)));
  cached_y_ = y;
  return y;
}

template <typename S>
TensorT<S> TanhT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> gx = gy;
  for (size_t i = 0; i < gx.data.size(); ++i) {
    S y = cached_y_.data[i];
    gx.data[i] *= S(1) - y * y;
  }
  return gx;
}

template <typename S>
TensorT<S> FlattenT<S>::forward(const TensorT<S>& x, bool) {
  in_shape_ = x.shape;
  TensorT<S> y = x;
  int64_t n = x.dim(0);
  y.reshape({static_cast<int>(n), static_cast<int>(x.numel() / n)});
  return y;
}

template <typename S>
TensorT<S> FlattenT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> gx = gy;
  gx.reshape(in_shape_);
  return gx;
}

// ---- Sequential -------------------------------------------------------------

template <typename S>
TensorT<S> SequentialT<S>::forward(const TensorT<S>& x, bool training) {
  TensorT<S> cur = x;
  for (auto& l : layers_) cur = l->forward(cur, training);
  return cur;
}

template <typename S>
TensorT<S> SequentialT<S>::backward(const TensorT<S>& gy) {
  TensorT<S> cur = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

template <typename S>
void SequentialT<S>::collect_params(std::vector<ParamT<S>*>& out) {
  for (auto& l : layers_) l->collect_params(out);
}

template <typename S>
void SequentialT<S>::collect_buffers(std::vector<ParamT<S>*>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

// ---- concat / split ----------------------------------------------------------

template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
  check_4d(a, "concat");
  check_4d(b, "concat");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw std::invalid_argument("concat: shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  const ptrdiff_t plane = static_cast<ptrdiff_t>(H) * W;
  TensorT<S> y({N, Ca + Cb, H, W});
  for (int n = 0; n < N; ++n) {
    std::memcpy(y.ptr() + static_cast<ptrdiff_t>(n) * (Ca + Cb) * plane,
                a.ptr() + static_cast<ptrdiff_t>(n) * Ca * plane, sizeof(S) * Ca * plane);
    std::memcpy(y.ptr() + (static_cast<ptrdiff_t>(n) * (Ca + Cb) + Ca) * plane,
                b.ptr() + static_cast<ptrdiff_t>(n) * Cb * plane, sizeof(S) * Cb * plane);
  }
  return y;
}

template <typename S>
void split_channels(const TensorT<S>& grad, int channels_a, TensorT<S>& grad_a,
                    TensorT<S>& grad_b) {
  const int N = grad.dim(0), C = grad.dim(1), H = grad.dim(2), W = grad.dim(3);
  const int Cb = C - channels_a;
  const ptrdiff_t plane = static_cast<ptrdiff_t>(H) * W;
  grad_a = TensorT<S>({N, channels_a, H, W});
  grad_b = TensorT<S>({N, Cb, H, W});
  for (int n = 0; n < N; ++n) {
    std::memcpy(grad_a.ptr() + static_cast<ptrdiff_t>(n) * channels_a * plane,
                grad.ptr() + static_cast<ptrdiff_t>(n) * C * plane,
                sizeof(S) * channels_a * plane);
    std::memcpy(grad_b.ptr() + static_cast<ptrdiff_t>(n) * Cb * plane,
                grad.ptr() + (static_cast<ptrdiff_t>(n) * C + channels_a) * plane,
                sizeof(S) * Cb * plane);
  }
}

// ---- Adam ---------------------------------------------------------------------

template <typename S>
void AdamT<S>::attach(const std::vector<ParamT<S>*>& params) {
  params_ = params;
  m_.clear();
  v_.clear();
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
  t_ = 0;
}

template <typename S>
void AdamT<S>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double alpha = lr_ * std::sqrt(bc2) / bc1;
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& w = params_[pi]->value.data;
    auto& g = params_[pi]->grad.data;
    auto& m = m_[pi].data;
    auto& v = v_[pi].data;
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = static_cast<S>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
      v[i] = static_cast<S>(beta2_ * v[i] + (1.0 - beta2_) * static_cast<double>(g[i]) * g[i]);
      w[i] -= static_cast<S>(alpha * m[i] / (std::sqrt(static_cast<double>(v[i])) + eps_));
    }
  }
}

// ---- Losses ----------------------------------------------------------------------

template <typename S>
double bce_loss(const TensorT<S>& probs, const TensorT<S>& targets, TensorT<S>* grad_probs,
                double eps) {
  if (probs.shape != targets.shape) {
    throw std::invalid_argument("bce_loss: shape mismatch " + probs.shape_str() + " vs " +
                                targets.shape_str());
  }
  const double count = static_cast<double>(probs.numel());
  if (grad_probs) *grad_probs = TensorT<S>(probs.shape);
  double loss = 0;
  for (size_t i = 0; i < probs.data.size(); ++i) {
    double p = std::clamp(static_cast<double>(probs.data[i]), eps, 1.0 - eps);
    double t = targets.data[i];
    loss -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    if (grad_probs) {
      grad_probs->data[i] = static_cast<S>((-t / p + (1.0 - t) / (1.0 - p)) / count);
    }
  }
  return loss / count;
}

template <typename S>
double mse_loss(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>* grad_a) {
  if (a.shape != b.shape) {
    throw std::invalid_argument("mse_loss: shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  const double count = static_cast<double>(a.numel());
  if (grad_a) *grad_a = TensorT<S>(a.shape);
  double loss = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    loss += d * d;
    if (grad_a) grad_a->data[i] = static_cast<S>(2.0 * d / count);
  }
  return loss / count;
}

template <typename S>
double gan_d_loss(const TensorT<S>& real_logits, const TensorT<S>& fake_logits,
                  TensorT<S>* grad_real, TensorT<S>* grad_fake) {
  const double nr = static_cast<double>(real_logits.numel());
  const double nf = static_cast<double>(fake_logits.numel());
  if (grad_real) *grad_real = TensorT<S>(real_logits.shape);
  if (grad_fake) *grad_fake = TensorT<S>(fake_logits.shape);
  double loss = 0;
  for (size_t i = 0; i < real_logits.data.size(); ++i) {
    loss += softplus(-real_logits.data[i]) / nr;
    if (grad_real) {
      grad_real->data[i] = static_cast<S>((sigmoid_d(real_logits.data[i]) - 1.0) / nr);
    }
  }
  for (size_t i = 0; i < fake_logits.data.size(); ++i) {
    loss += softplus(fake_logits.data[i]) / nf;
    if (grad_fake) grad_fake->data[i] = static_cast<S>(sigmoid_d(fake_logits.data[i]) / nf);
  }
  return loss;
}

template <typename S>
double gan_d_real_loss(const TensorT<S>& real_logits, TensorT<S>* grad_real) {
  const double nr = static_cast<double>(real_logits.numel());
  if (grad_real) *grad_real = TensorT<S>(real_logits.shape);
  double loss = 0;
  for (size_t i = 0; i < real_logits.data.size(); ++i) {
    loss += softplus(-real_logits.data[i]) / nr;
    if (grad_real) {
      grad_real->data[i] = static_cast<S>((sigmoid_d(real_logits.data[i]) - 1.0) / nr);
    }
  }
  return loss;
}

template <typename S>
double gan_d_fake_loss(const TensorT<S>& fake_logits, TensorT<S>* grad_fake) {
  const double nf = static_cast<double>(fake_logits.numel());
  if (grad_fake) *grad_fake = TensorT<S>(fake_logits.shape);
  double loss = 0;
  for (size_t i = 0; i < fake_logits.data.size(); ++i) {
    loss += softplus(fake_logits.data[i]) / nf;
    if (grad_fake) grad_fake->data[i] = static_cast<S>(sigmoid_d(fake_logits.data[i]) / nf);
  }
  return loss;
}

template <typename S>
double gan_g_loss(const TensorT<S>& fake_logits, TensorT<S>* grad_fake) {
  const double nf = static_cast<double>(fake_logits.numel());
  if (grad_fake) *grad_fake = TensorT<S>(fake_logits.shape);
  double loss = 0;
  for (size_t i = 0; i < fake_logits.data.size(); ++i) {
    loss += softplus(-fake_logits.data[i]) / nf;
    if (grad_fake) {
      grad_fake->data[i] = static_cast<S>((sigmoid_d(fake_logits.data[i]) - 1.0) / nf);
    }
  }
  return loss;
}

// ---- Serialization --------------------------------------------------------------

namespace {
template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}
template <typename T>
T take(const std::vector<uint8_t>& in, size_t& off) {
  if (off + sizeof(T) > in.size()) throw CorruptCheckpoint("parameter blob truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}
}  // namespace

template <typename S>
std::vector<uint8_t> serialize_params(const std::vector<ParamT<S>*>& params) {
  std::vector<uint8_t> out;
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    put<uint32_t>(out, static_cast<uint32_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    put<uint32_t>(out, static_cast<uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) put<int32_t>(out, d);
    const auto* raw = reinterpret_cast<const uint8_t*>(p->value.data.data());
    out.insert(out.end(), raw, raw + p->value.data.size() * sizeof(S));
  }
  return out;
}

template <typename S>
void deserialize_params(const std::vector<uint8_t>& blob,
                        const std::vector<ParamT<S>*>& params) {
  size_t off = 0;
  uint32_t count = take<uint32_t>(blob, off);
  if (count != params.size()) {
    throw CorruptCheckpoint("parameter count mismatch: blob has " + std::to_string(count) +
                            ", model has " + std::to_string(params.size()));
  }
  for (auto* p : params) {
    uint32_t name_len = take<uint32_t>(blob, off);
    if (off + name_len > blob.size()) throw CorruptCheckpoint("parameter blob truncated");
    std::string name(blob.begin() + static_cast<ptrdiff_t>(off),
                     blob.begin() + static_cast<ptrdiff_t>(off + name_len));
    off += name_len;
    if (name != p->name) {
      throw CorruptCheckpoint("parameter name mismatch: expected " + p->name + ", got " + name);
    }
    uint32_t ndim = take<uint32_t>(blob, off);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = take<int32_t>(blob, off);
    if (shape != p->value.shape) throw CorruptCheckpoint("parameter shape mismatch for " + name);
    size_t bytes = p->value.data.size() * sizeof(S);
    if (off + bytes > blob.size()) throw CorruptCheckpoint("parameter blob truncated");
    std::memcpy(p->value.data.data(), blob.data() + off, bytes);
    off += bytes;
  }
}

// ---- Explicit instantiations -----------------------------------------------------

#define FPFORGE_INSTANTIATE_NN(S)                                                       \
  template class LinearT<S>;                                                            \
  template class Conv2dT<S>;                                                            \
  template class Upsample2xT<S>;                                                        \
  template class BatchNorm2dT<S>;                                                       \
  template class ReLUT<S>;                                                              \
  template class LeakyReLUT<S>;                                                         \
  template class SigmoidT<S>;                                                           \
  template class TanhT<S>;                                                              \
  template class FlattenT<S>;                                                           \
  template class SequentialT<S>;                                                        \
  template class AdamT<S>;                                                              \
  template TensorT<S> concat_channels<S>(const TensorT<S>&, const TensorT<S>&);         \
  template void split_channels<S>(const TensorT<S>&, int, TensorT<S>&, TensorT<S>&);    \
  template double bce_loss<S>(const TensorT<S>&, const TensorT<S>&, TensorT<S>*,        \
                              double);                                                  \
  template double mse_loss<S>(const TensorT<S>&, const TensorT<S>&, TensorT<S>*);       \
  template double gan_d_loss<S>(const TensorT<S>&, const TensorT<S>&, TensorT<S>*,      \
                                TensorT<S>*);                                           \
  template double gan_d_real_loss<S>(const TensorT<S>&, TensorT<S>*);                   \
  template double gan_d_fake_loss<S>(const TensorT<S>&, TensorT<S>*);                   \
  template double gan_g_loss<S>(const TensorT<S>&, TensorT<S>*);                        \
  template std::vector<uint8_t> serialize_params<S>(const std::vector<ParamT<S>*>&);    \
  template void deserialize_params<S>(const std::vector<uint8_t>&,                      \
                                      const std::vector<ParamT<S>*>&);

FPFORGE_INSTANTIATE_NN(float)
FPFORGE_INSTANTIATE_NN(double)

#undef FPFORGE_INSTANTIATE_NN

}  // namespace fpforge::nn
