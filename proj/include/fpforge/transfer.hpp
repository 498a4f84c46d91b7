#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpforge/codec.hpp"
#include "fpforge/dataset.hpp"
#include "fpforge/gan.hpp"
#include "fpforge/registry.hpp"

namespace fpforge {

struct TransferReport {
  int num_samples = 0;
  std::vector<double> per_image_accuracy;
  double mean_accuracy = 0;
  double accuracy_ci95 = 0;  // half-width of the 95% interval on the mean
  double mean_p_value = 1;
  double median_p_value = 1;
  double p_value_at_mean_accuracy = 1;
  double threshold = 0.75;
  double pass_fraction = 0;  // fraction of samples clearing the threshold
  bool decoder_free_training = true;  // structural audit flag from the checkpoint

  std::string to_json() const;
};

// Decode `num_samples` generated images against the fingerprint embedded in
// the generator's training data.
TransferReport evaluate_transferability(GanCheckpoint& gan, CodecCheckpoint& codec,
                                        const Fingerprint& fingerprint, int num_samples,
                                        uint64_t sample_seed, double threshold = 0.75);

// Same accounting for a fixed image tensor (reference upper bounds etc.).
TransferReport evaluate_images(const Tensor& images, CodecCheckpoint& codec,
                               const Fingerprint& fingerprint, double threshold = 0.75);

// Joint fingerprinting baseline: train generator and fingerprint decoder
// together on clean data, adding eta * BCE(dec(G(z)), w) to the generator
// objective. Returns the checkpoint (decoder_free=false) plus the decoder.
struct JointBaselineResult {
  GanCheckpoint checkpoint;
  std::unique_ptr<StegaDecoder> decoder;
  CodecConfig decoder_config;
  std::string status;
  std::vector<double> d_losses, g_losses, bce_losses;
  double wall_seconds = 0;
};

JointBaselineResult train_joint_baseline(const ImageDataset& clean_data,
                                         const Fingerprint& fingerprint,
                                         const GeneratorConfig& config, double eta = 1.0,
                                         std::ostream* progress = nullptr);

// Decode samples with a bare decoder (joint-baseline evaluation path).
TransferReport evaluate_with_decoder(GanCheckpoint& gan, StegaDecoder& decoder,
                                     const CodecConfig& decoder_cfg,
                                     const Fingerprint& fingerprint, int num_samples,
                                     uint64_t sample_seed, double threshold = 0.75);

// Stand-alone persistence for the jointly trained decoder.
void save_joint_decoder(const std::string& path, StegaDecoder& decoder,
                        const CodecConfig& decoder_cfg);
std::pair<std::unique_ptr<StegaDecoder>, CodecConfig> load_joint_decoder(
    const std::string& path);

// Quality proxy (FID stand-in, labeled as such in all outputs): mean over
// samples of the PSNR to the nearest image in a training subsample.
double nearest_train_psnr(const Tensor& samples, const ImageDataset& train,
                          int train_subsample = 1000, uint64_t seed = 1);

struct DetectionReport {
  int num_real = 0;
  int num_fake = 0;
  int true_positive = 0;   // fake labeled fake
  int true_negative = 0;   // real labeled real
  int false_positive = 0;  // real labeled fake
  int false_negative = 0;  // fake labeled real
  double accuracy = 0;
  double threshold = 0.75;
  std::string to_json() const;
};

// Label each image fake iff its decoded fingerprint attributes to some
// registry entry; score against ground truth.
DetectionReport detection_experiment(const Tensor& real_images,
                                     const std::vector<Tensor>& fake_image_sets,
                                     CodecCheckpoint& codec, const Registry& registry,
                                     double threshold = 0.75);

struct AttributionReport {
  // Rows: ground-truth source (model_id or "real"/"unknown"); columns:
  // predicted model_id or "unknown".
  std::map<std::string, std::map<std::string, int>> confusion;
  double accuracy = 0;  // correct / total, unknown counted as its own class
  double unknown_rate_for_unregistered = 0;
  double threshold = 0.75;
  std::string to_json() const;
};

AttributionReport attribution_experiment(
    const std::vector<std::pair<std::string, Tensor>>& labeled_image_sets,
    CodecCheckpoint& codec, const Registry& registry, double threshold = 0.75);

}  // namespace fpforge
