#pragma once

#include <string>
#include <vector>

#include "fpforge/common.hpp"
#include "fpforge/tensor.hpp"

namespace fpforge {

// In-memory image set: fixed resolution/channel count, 8-bit CHW storage,
// RGB channel order. Images enter via ingest_folder (center-crop to square,
// resize, deterministic lexicographic ordering).
struct ImageDataset {
  int resolution = 0;
  int channels = 0;
  std::vector<std::string> names;  // file names, sorted
  std::vector<uint8_t> pixels;     // count * channels * res * res
  int skipped = 0;                 // undecodable files skipped with a warning

  int count() const { return static_cast<int>(names.size()); }
  size_t image_bytes() const {
    return static_cast<size_t>(channels) * resolution * resolution;
  }
  const uint8_t* image_ptr(int idx) const { return pixels.data() + idx * image_bytes(); }
  uint8_t* image_ptr(int idx) { return pixels.data() + idx * image_bytes(); }

  // Batch of images as float tensor in [0,1], shape (N,C,H,W).
  Tensor to_float(const std::vector<int>& indices) const;
  Tensor to_float_range(int begin, int end) const;
};

ImageDataset ingest_folder(const std::string& path, int resolution, int channels);

// PNG persistence (lossless, 8-bit). Float variants clamp to [0,1] and
// quantize with round-to-nearest.
void save_png_u8(const std::string& path, const uint8_t* chw, int channels, int res);
void save_png_float(const std::string& path, const float* chw, int channels, int res);
std::vector<uint8_t> load_png_u8(const std::string& path, int channels, int* res_out);

// Clamp to [0,1] and quantize to the 8-bit grid, returning floats again.
// Matches what a PNG save/load round trip does to pixel values.
Tensor quantize8(const Tensor& t);
std::vector<uint8_t> float_to_u8(const float* chw, size_t n);

// Procedural desk-scale corpus: smooth two-color gradients plus soft
// elliptical blobs, a few latent factors per image. Deterministic per seed.
void generate_synthetic_images(const std::string& out_dir, int count, int resolution,
                               int channels, uint64_t seed);

}  // namespace fpforge
