#pragma once

#include <string>
#include <vector>

#include "fpforge/codec.hpp"
#include "fpforge/gan.hpp"
#include "fpforge/image_io.hpp"

namespace fpforge {

enum class PerturbKind {
  gaussian_noise,   // additive N(0, sigma^2) per pixel, clamped to [0,1]
  gaussian_blur,    // odd kernel size in pixels; 1 = identity
  jpeg,             // quality 1..100; 100 behaves as lossless passthrough
  center_crop,      // crop to c x c then bilinear resize back
  weight_quantize,  // round generator weights to a decimal precision (power of ten)
  weight_noise,     // additive N(0, sigma^2) on generator weights
};

const char* perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string& name);
bool is_image_kind(PerturbKind k);
// Kinds where a larger magnitude means a milder perturbation (jpeg quality,
// crop size). Determines whether working ranges are prefixes or suffixes.
bool larger_is_milder(PerturbKind k);

struct PerturbationSpec {
  PerturbKind kind;
  double magnitude = 0;

  void validate(int resolution) const;
};

// Apply an image perturbation to a batch. Zero-magnitude specs (sigma 0,
// kernel 1, quality 100, full-size crop) return the input bit-exactly.
Tensor perturb_image(const Tensor& images, const PerturbationSpec& spec, uint64_t seed = 0);

// Apply a model perturbation to a copy of the checkpoint (generator weights
// only); the input checkpoint is never mutated.
GanCheckpoint perturb_generator(const GanCheckpoint& ckpt, const PerturbationSpec& spec,
                                uint64_t seed = 0);

struct SweepResult {
  PerturbKind kind = PerturbKind::gaussian_noise;
  std::vector<double> grid;           // ascending magnitudes
  std::vector<double> generated_acc;  // mean bit accuracy on generated images
  // Reference series: fingerprinted-real accuracy for image kinds, quality
  // proxy (nearest-train PSNR, dB) for model kinds.
  std::vector<double> reference;
  std::string reference_label;
  int samples_per_point = 0;
  uint64_t seed = 0;

  std::string to_json() const;
  static SweepResult from_json(const std::string& text);
};

// Accuracy-vs-magnitude sweep over generated images, with the fingerprinted
// real images decoded under the same perturbation as the upper-bound
// reference curve.
SweepResult sweep_image(const Tensor& generated_images, CodecCheckpoint& codec,
                        const Fingerprint& fingerprint, PerturbKind kind,
                        const std::vector<double>& grid, const Tensor& reference_images,
                        uint64_t seed);

// Model-perturbation sweep: perturb the generator, sample, decode; reference
// series is the quality proxy of the perturbed samples.
SweepResult sweep_model(const GanCheckpoint& gan, CodecCheckpoint& codec,
                        const Fingerprint& fingerprint, PerturbKind kind,
                        const std::vector<double>& grid, int num_samples,
                        const ImageDataset& quality_reference, uint64_t seed);

struct WorkingRange {
  bool empty = true;
  double lo = 0;
  double hi = 0;
};

// Maximal prefix (suffix for larger-is-milder kinds) of the grid with
// accuracy >= threshold; the failing boundary is linearly interpolated.
WorkingRange working_range(const SweepResult& sweep, double threshold = 0.75);

// Grids mirroring the published robustness axes, scaled to the resolution
// where the axis is in pixels.
std::vector<double> default_grid(PerturbKind kind, int resolution);

// One SVG plot per sweep: red generated curve, blue reference curve,
// threshold line. Returns the written file path.
std::string emit_plot(const SweepResult& sweep, const std::string& out_path,
                      double threshold = 0.75);

}  // namespace fpforge
