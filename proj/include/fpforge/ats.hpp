#pragma once

#include <string>
#include <vector>

#include "fpforge/codec.hpp"
#include "fpforge/image_io.hpp"

namespace fpforge {

struct AtsReport {
  int num_positive = 0;  // ground-truth fingerprinted test images
  int num_negative = 0;
  double accuracy = 0;
  double precision_pos = 0, recall_pos = 0;
  double precision_neg = 0, recall_neg = 0;
  std::string shadow_codec_id;
  std::string feature_settings;
  std::string classifier_settings;
  uint64_t seed = 0;

  std::string to_json() const;
};

// Train an attacker-side steganography codec with its own seed; standard
// codec training underneath.
std::pair<CodecCheckpoint, TrainLog> train_shadow_codec(const ImageDataset& dataset,
                                                        CodecConfig config, uint64_t seed,
                                                        std::ostream* progress = nullptr);

// Steganalysis feature vector: per-channel histogram of 3x3 high-pass
// residuals plus a downsampled grayscale residual-energy map.
std::vector<float> ats_features(const float* chw, int channels, int res);

// Artificial Training Sets attack. `test_images` is the unlabeled balanced
// mix; `ground_truth` (1 = fingerprinted, 0 = clean) is only consulted for
// scoring at the end. The attack trains an RBF SVM (hyperparameters by
// 5-fold cross-validation) on shadow-encoded copies and never touches any
// victim codec.
AtsReport ats_attack(const Tensor& test_images, const std::vector<int>& ground_truth,
                     CodecCheckpoint& shadow, uint64_t seed,
                     const std::string& svm_save_path = "");

}  // namespace fpforge
