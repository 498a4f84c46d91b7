#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fpforge/common.hpp"
#include "fpforge/tensor.hpp"

namespace fpforge::nn {

template <typename S>
struct ParamT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;

  ParamT() = default;
  ParamT(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

// A differentiable layer. forward() caches whatever backward() needs, so the
// usage pattern is strictly forward-then-backward on the same input batch.
// backward() accumulates parameter gradients and returns the input gradient.
template <typename S>
class ModuleT {
 public:
  virtual ~ModuleT() = default;
  virtual TensorT<S> forward(const TensorT<S>& x, bool training) = 0;
  virtual TensorT<S> backward(const TensorT<S>& grad_out) = 0;
  virtual void collect_params(std::vector<ParamT<S>*>& out) {}
  // Non-trainable state that still belongs in checkpoints (e.g. batch-norm
  // running statistics).
  virtual void collect_buffers(std::vector<ParamT<S>*>& out) {}

  void zero_grad() {
    std::vector<ParamT<S>*> ps;
    collect_params(ps);
    for (auto* p : ps) p->grad.fill(S(0));
  }
};

template <typename S>
class LinearT : public ModuleT<S> {
 public:
  LinearT(std::string name, int in_features, int out_features, RandomStream& rng);
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;
  void collect_params(std::vector<ParamT<S>*>& out) override;

  ParamT<S> weight;  // (out, in)
  ParamT<S> bias;    // (out)

 private:
  int in_ = 0, out_ = 0;
  TensorT<S> cached_x_;
};

template <typename S>
class Conv2dT : public ModuleT<S> {
 public:
  Conv2dT(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
          RandomStream& rng);
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;
  void collect_params(std::vector<ParamT<S>*>& out) override;

  ParamT<S> weight;  // (out_ch, in_ch*k*k)
  ParamT<S> bias;    // (out_ch)

  int out_size(int in_size) const { return (in_size + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  int cin_, cout_, kernel_, stride_, pad_;
  TensorT<S> cached_x_;
};

// Nearest-neighbour 2x spatial upsampling.
template <typename S>
class Upsample2xT : public ModuleT<S> {
 public:
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

template <typename S>
class BatchNorm2dT : public ModuleT<S> {
 public:
  BatchNorm2dT(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;
  void collect_params(std::vector<ParamT<S>*>& out) override;
  void collect_buffers(std::vector<ParamT<S>*>& out) override;

  ParamT<S> gamma, beta;
  // Eval-mode statistics; serialized with checkpoints but never optimized.
  ParamT<S> running_mean, running_var;

 private:
  int channels_;
  double momentum_, eps_;
  TensorT<S> cached_xhat_;
  std::vector<S> cached_invstd_;
  bool cached_training_ = true;
};

template <typename S>
class ReLUT : public ModuleT<S> {
 public:
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  TensorT<S> cached_x_;
};

template <typename S>
class LeakyReLUT : public ModuleT<S> {
 public:
  explicit LeakyReLUT(double slope = 0.2) : slope_(static_cast<S>(slope)) {}
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  S slope_;
  TensorT<S> cached_x_;
};

template <typename S>
class SigmoidT : public ModuleT<S> {
 public:
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  TensorT<S> cached_y_;
};

template <typename S>
class TanhT : public ModuleT<S> {
 public:
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  TensorT<S> cached_y_;
};

// (N,C,H,W) -> (N, C*H*W)
template <typename S>
class FlattenT : public ModuleT<S> {
 public:
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

template <typename S>
class SequentialT : public ModuleT<S> {
 public:
  SequentialT() = default;
  void add(std::unique_ptr<ModuleT<S>> m) { layers_.push_back(std::move(m)); }
  TensorT<S> forward(const TensorT<S>& x, bool training) override;
  TensorT<S> backward(const TensorT<S>& grad_out) override;
  void collect_params(std::vector<ParamT<S>*>& out) override;
  void collect_buffers(std::vector<ParamT<S>*>& out) override;
  size_t size() const { return layers_.size(); }
  ModuleT<S>* layer(size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<ModuleT<S>>> layers_;
};

// Channel-dimension concat/split helpers used by skip connections.
template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
void split_channels(const TensorT<S>& grad, int channels_a, TensorT<S>& grad_a,
                    TensorT<S>& grad_b);

template <typename S>
class AdamT {
 public:
  AdamT(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<ParamT<S>*>& params);
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int64_t t() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<ParamT<S>*> params_;
  std::vector<TensorT<S>> m_, v_;
};

// ---- Losses -----------------------------------------------------------

// Mean binary cross-entropy over all elements, probabilities clipped to
// [eps, 1-eps] before the logs. grad_probs gets d(loss)/d(probs).
template <typename S>
double bce_loss(const TensorT<S>& probs, const TensorT<S>& targets, TensorT<S>* grad_probs,
                double eps = 1e-7);

// Mean squared error over all elements.
template <typename S>
double mse_loss(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>* grad_a);

// Non-saturating GAN losses on discriminator logits, shape (N,1).
// d_loss = mean softplus(-real) + mean softplus(fake)
// g_loss = mean softplus(-fake)
template <typename S>
double gan_d_loss(const TensorT<S>& real_logits, const TensorT<S>& fake_logits,
                  TensorT<S>* grad_real, TensorT<S>* grad_fake);
// Split variants for alternating real/fake discriminator minibatches.
template <typename S>
double gan_d_real_loss(const TensorT<S>& real_logits, TensorT<S>* grad_real);
template <typename S>
double gan_d_fake_loss(const TensorT<S>& fake_logits, TensorT<S>* grad_fake);
template <typename S>
double gan_g_loss(const TensorT<S>& fake_logits, TensorT<S>* grad_fake);

// ---- Parameter serialization ------------------------------------------

// Flat binary blob: [count][per param: name_len, name, ndim, dims, raw data].
template <typename S>
std::vector<uint8_t> serialize_params(const std::vector<ParamT<S>*>& params);
template <typename S>
void deserialize_params(const std::vector<uint8_t>& blob,
                        const std::vector<ParamT<S>*>& params);

using Module = ModuleT<float>;
using Param = ParamT<float>;
using Linear = LinearT<float>;
using Conv2d = Conv2dT<float>;
using Upsample2x = Upsample2xT<float>;
using BatchNorm2d = BatchNorm2dT<float>;
using ReLU = ReLUT<float>;
using LeakyReLU = LeakyReLUT<float>;
using Sigmoid = SigmoidT<float>;
using Tanh = TanhT<float>;
using Flatten = FlattenT<float>;
using Sequential = SequentialT<float>;
using Adam = AdamT<float>;

}  // namespace fpforge::nn
