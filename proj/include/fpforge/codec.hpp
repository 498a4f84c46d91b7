#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fpforge/fingerprint.hpp"
#include "fpforge/image_io.hpp"
#include "fpforge/nn.hpp"
#include "fpforge/tensor.hpp"

namespace fpforge {

struct CodecConfig {
  int resolution = 64;   // square, power of two >= 32
  int channels = 3;      // 1 or 3
  int fingerprint_len = 100;
  double lambda_max = 10.0;
  int lambda_ramp_iters = 3000;
  double accuracy_gate = 0.95;
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-4;
  uint64_t seed = 1;
  // Architecture width knobs (desk scale); part of the codec identity.
  int enc_base_channels = 8;
  int dec_base_channels = 16;
  int holdout_size = 256;
  int gate_check_every = 100;

  void validate() const;
  std::string to_json() const;
  static CodecConfig from_json(const std::string& json_text);
};

// Steganography encoder: the fingerprint goes through a fully-connected
// layer, is reshaped to a one-channel map at image resolution, concatenated
// to the image, and run through a U-shaped conv net with skip connections.
// The net predicts a residual that is added to the input image.
template <typename S>
class StegaEncoderT {
 public:
  StegaEncoderT(const CodecConfig& cfg, RandomStream& rng);

  // images (N,C,H,W) in [0,1]; bits (N,n) in {0,1}. Returns the stego batch
  // (unclamped; clamping happens at embed time).
  TensorT<S> forward(const TensorT<S>& images, const TensorT<S>& bits);

  // grad wrt the stego output; accumulates parameter gradients.
  void backward(const TensorT<S>& grad_stego);

  void collect_params(std::vector<nn::ParamT<S>*>& out);
  void zero_grad();

 private:
  int stages_;  // number of downsampling steps
  int channels_;
  int resolution_;
  std::unique_ptr<nn::LinearT<S>> fp_fc_;
  std::vector<std::unique_ptr<nn::Conv2dT<S>>> enc_convs_;  // [0] full-res, then strided
  std::vector<std::unique_ptr<nn::ReLUT<S>>> enc_relus_;
  std::vector<std::unique_ptr<nn::Upsample2xT<S>>> ups_;
  std::vector<std::unique_ptr<nn::Conv2dT<S>>> up_convs_;
  std::vector<std::unique_ptr<nn::ReLUT<S>>> up_relus_;
  std::unique_ptr<nn::Conv2dT<S>> out_conv_;

  // forward caches
  std::vector<TensorT<S>> acts_;  // post-ReLU encoder activations a[0..S]
  std::vector<int> level_ch_;
};

// Steganography decoder: strided 3x3 conv stack, dense layers, sigmoid
// output of length n.
template <typename S>
class StegaDecoderT {
 public:
  StegaDecoderT(const CodecConfig& cfg, RandomStream& rng);

  TensorT<S> forward(const TensorT<S>& images);       // (N,n) probabilities
  TensorT<S> backward(const TensorT<S>& grad_probs);  // grad wrt input images
  void collect_params(std::vector<nn::ParamT<S>*>& out);
  void zero_grad();

 private:
  nn::SequentialT<S> net_;
};

using StegaEncoder = StegaEncoderT<float>;
using StegaDecoder = StegaDecoderT<float>;

class CodecCheckpoint {
 public:
  explicit CodecCheckpoint(const CodecConfig& cfg);

  const CodecConfig& config() const { return config_; }
  StegaEncoder& encoder() { return *encoder_; }
  StegaDecoder& decoder() { return *decoder_; }

  // Content hash of (config, parameters); recomputed on demand.
  std::string codec_id() const;

  std::vector<nn::Param*> all_params();
  std::vector<const nn::Param*> all_params() const;

  void save(const std::string& path) const;
  static CodecCheckpoint load(const std::string& path);

  // Layer forward passes cache activations, so concurrent embed/decode on one
  // checkpoint must serialize; this lock makes them safe to call from
  // multiple threads.
  std::mutex& eval_mutex() { return *eval_mutex_; }

 private:
  CodecConfig config_;
  std::unique_ptr<StegaEncoder> encoder_;
  std::unique_ptr<StegaDecoder> decoder_;
  std::unique_ptr<std::mutex> eval_mutex_ = std::make_unique<std::mutex>();
};

struct TrainLogEntry {
  double bce = 0;
  double mse = 0;
  double lambda = 0;
  double train_acc = 0;
};

struct TrainLog {
  std::vector<TrainLogEntry> iterations;
  std::vector<double> epoch_holdout_acc;
  int64_t gate_reached_iter = -1;
  int gate_reached_epoch = -1;
  bool gate_warning = false;  // accuracy gate never reached
  double wall_seconds = 0;

  std::string to_json() const;
};

// Build an untrained encoder/decoder pair with seeded parameters.
CodecCheckpoint build_codec(const CodecConfig& config);

// Joint training per the two-term objective: BCE always on, MSE weighted by
// a lambda that stays 0 until the held-out accuracy gate is reached, then
// ramps linearly to lambda_max. A fresh random fingerprint is drawn for
// every image at every iteration.
std::pair<CodecCheckpoint, TrainLog> train_codec(const ImageDataset& dataset,
                                                 const CodecConfig& config,
                                                 std::ostream* progress = nullptr);

// Embed one fingerprint into a batch of images. Output clamped to [0,1].
Tensor embed(CodecCheckpoint& ckpt, const Tensor& images, const Fingerprint& fingerprint);

// Decode fingerprints from a batch of images.
std::vector<DecodedFingerprint> decode(CodecCheckpoint& ckpt, const Tensor& images);

// Losses exposed for tests and the joint baseline (thin wrappers with the
// fingerprint-specific clipping).
double bce_fingerprint_loss(const std::vector<double>& probs, const Fingerprint& target);
double image_mse_loss(const Tensor& stego, const Tensor& cover);

// Bits of a fingerprint as a (1,n) tensor row, or broadcast to (N,n).
Tensor fingerprint_to_tensor(const Fingerprint& fp, int rows = 1);

}  // namespace fpforge
