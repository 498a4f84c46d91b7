#pragma once

#include <string>
#include <vector>

#include "fpforge/codec.hpp"
#include "fpforge/fingerprint.hpp"
#include "fpforge/image_io.hpp"

namespace fpforge {

struct ManifestRecord {
  std::string path;    // relative to out_dir
  std::string sha256;  // of file bytes
};

struct DatasetManifest {
  int schema_version = 1;
  std::string source_dir;
  std::string out_dir;
  std::string fingerprint_hex;
  int fingerprint_len = 0;
  std::string codec_id;  // "lsb" for the conventional-steganography control
  std::string created_at;
  std::string tool_version;
  std::vector<ManifestRecord> records;

  Fingerprint fingerprint() const {
    return Fingerprint::from_hex(fingerprint_hex, fingerprint_len);
  }

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

// Embed one fingerprint into every image of the dataset and persist the
// result losslessly (PNG) together with a manifest. Refuses a non-empty
// out_dir unless overwrite is set.
DatasetManifest fingerprint_dataset(CodecCheckpoint& ckpt, const ImageDataset& dataset,
                                    const Fingerprint& fingerprint,
                                    const std::string& out_dir, bool overwrite = false,
                                    std::ostream* progress = nullptr);

struct VerifyStats {
  double mean_accuracy = 0;
  double min_accuracy = 1;
  int checked = 0;
  std::vector<std::string> failures;  // files below the threshold
  double failure_threshold = 0.75;
};

// Re-decode every manifest image (after hash validation) and compare to the
// expected fingerprint.
VerifyStats verify_dataset(CodecCheckpoint& ckpt, const DatasetManifest& manifest,
                           const Fingerprint& fingerprint);

// Load the images listed in a manifest, verifying content hashes.
ImageDataset load_manifest_images(const DatasetManifest& manifest, int resolution,
                                  int channels, bool verify_hashes = true);

struct FidelityMetrics {
  double mean_mse = 0;
  double mean_psnr_db = 0;     // +inf when mean_mse == 0
  double max_abs_deviation = 0;
  std::vector<double> per_image_psnr_db;
  int pairs = 0;

  std::string to_json() const;
};

// Pairwise pixel metrics between two aligned datasets (matched by name), plus
// 10x-magnified absolute difference images for the first `diff_images` pairs.
FidelityMetrics fidelity_report(const ImageDataset& original, const ImageDataset& processed,
                                const std::string& out_dir, int diff_images = 16);

// Conventional-steganography control: write the fingerprint bits cyclically
// into the least significant bit of every channel of every pixel.
DatasetManifest lsb_embed_baseline(const ImageDataset& dataset, const Fingerprint& fingerprint,
                                   const std::string& out_dir, bool overwrite = false);

// Majority vote per bit position across all cyclic repetitions.
Fingerprint lsb_decode(const uint8_t* chw, size_t pixel_count, int n);
Fingerprint lsb_decode(const ImageDataset& dataset, int image_index, int n);

}  // namespace fpforge
