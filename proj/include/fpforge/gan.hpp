#pragma once

#include <functional>
#include <mutex>
#include <memory>
#include <string>
#include <vector>

#include "fpforge/image_io.hpp"
#include "fpforge/nn.hpp"
#include "fpforge/tensor.hpp"

namespace fpforge {

struct GeneratorConfig {
  int latent_dim = 128;
  int resolution = 32;
  int channels = 3;
  int iterations = 6000;
  int batch_size = 32;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double adam_beta1 = 0.5;
  uint64_t seed = 1;
  std::string loss = "non-saturating";
  int g_base_channels = 16;  // channels at full resolution; doubled per level down
  int d_base_channels = 32;
  int log_every = 100;
  int checkpoint_every = 2000;

  void validate() const;
  std::string to_json() const;
  static GeneratorConfig from_json(const std::string& json_text);
};

// DCGAN-class generator: dense stem to a 4x4 root, then nearest-upsample +
// conv + batchnorm + relu per level, tanh output in [-1,1].
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, RandomStream& rng);

  Tensor forward(const Tensor& z, bool training);  // (N,latent) -> (N,C,H,W)
  Tensor backward(const Tensor& grad_out);         // grad wrt z (rarely used)
  void collect_params(std::vector<nn::Param*>& out);
  void collect_buffers(std::vector<nn::Param*>& out);
  void zero_grad();

 private:
  int root_ch_ = 0;
  std::unique_ptr<nn::Linear> fc_;
  nn::Sequential body_;  // starts at (N, root_ch, 4, 4)
};

// Mirror discriminator: strided convs with leaky relu, single logit.
class Discriminator {
 public:
  Discriminator(const GeneratorConfig& cfg, RandomStream& rng);

  Tensor forward(const Tensor& images, bool training);  // (N,C,H,W) -> (N,1)
  Tensor backward(const Tensor& grad_out);
  void collect_params(std::vector<nn::Param*>& out);
  void collect_buffers(std::vector<nn::Param*>& out);
  void zero_grad();

 private:
  nn::Sequential net_;
};

class GanCheckpoint {
 public:
  explicit GanCheckpoint(const GeneratorConfig& cfg);
  GanCheckpoint(GanCheckpoint&&) = default;
  GanCheckpoint& operator=(GanCheckpoint&&) = default;

  GeneratorConfig config;
  std::string manifest_ref;  // reference to the training-data manifest
  std::string model_id;
  std::string status = "untrained";  // untrained | completed | aborted_nan
  int64_t iterations_done = 0;
  // Structural audit: true iff the training objective contained no
  // fingerprint-decoder term (plain adversarial training).
  bool decoder_free = true;

  Generator& gen() { return *gen_; }
  Discriminator& dis() { return *dis_; }

  std::vector<nn::Param*> trainable_gen_params();
  std::vector<nn::Param*> all_state();  // params + buffers of both nets

  std::string content_id() const;
  void save(const std::string& path) const;
  static GanCheckpoint load(const std::string& path);
  GanCheckpoint clone() const;

  // Sampling caches activations inside the generator; concurrent sample()
  // calls on one checkpoint serialize on this lock.
  std::mutex& eval_mutex() { return *eval_mutex_; }

 private:
  std::unique_ptr<Generator> gen_;
  std::unique_ptr<Discriminator> dis_;
  std::unique_ptr<std::mutex> eval_mutex_ = std::make_unique<std::mutex>();
};

struct GanTrainResult {
  GanCheckpoint checkpoint;
  std::string status;
  double first_d_loss = 0, first_g_loss = 0;  // determinism probes
  std::vector<double> d_losses, g_losses;     // sampled every log_every iters
  double wall_seconds = 0;
};

// Standard adversarial training on the given images only; no fingerprint
// term anywhere in the objective. Divergence (NaN loss) aborts with the
// last checkpoint and status "aborted_nan".
GanTrainResult train_generator(
    const ImageDataset& data, const GeneratorConfig& config, const std::string& manifest_ref,
    const std::string& model_id, std::ostream* progress = nullptr,
    const std::string& checkpoint_dir = "",
    const std::function<void(int64_t, GanCheckpoint&)>& periodic_hook = {});

// Draw `count` images from the generator: z ~ N(0,I) per seed, batchnorm in
// eval mode, output mapped from [-1,1] to [0,1].
Tensor sample(GanCheckpoint& ckpt, int count, uint64_t seed);

}  // namespace fpforge
