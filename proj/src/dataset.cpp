#include "fpforge/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fpforge/sha256.hpp"

namespace fpforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string DatasetManifest::to_json() const {
  json recs = json::array();
  for (const auto& r : records) recs.push_back({{"path", r.path}, {"sha256", r.sha256}});
  json j = {{"schema_version", schema_version},
            {"source_dir", source_dir},
            {"out_dir", out_dir},
            {"fingerprint_hex", fingerprint_hex},
            {"fingerprint_len", fingerprint_len},
            {"codec_id", codec_id},
            {"created_at", created_at},
            {"tool_version", tool_version},
            {"records", std::move(recs)}};
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != 1) {
    throw IntegrityError("manifest: unsupported schema version " +
                         std::to_string(m.schema_version));
  }
  m.source_dir = j.at("source_dir").get<std::string>();
  m.out_dir = j.at("out_dir").get<std::string>();
  m.fingerprint_hex = j.at("fingerprint_hex").get<std::string>();
  m.fingerprint_len = j.at("fingerprint_len").get<int>();
  m.codec_id = j.at("codec_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  for (const auto& r : j.at("records")) {
    m.records.push_back({r.at("path").get<std::string>(), r.at("sha256").get<std::string>()});
  }
  return m;
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("manifest: cannot write " + path);
  f << to_json() << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("manifest: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

namespace {

void prepare_out_dir(const std::string& out_dir, bool overwrite) {
  if (fs::exists(out_dir)) {
    bool empty = fs::is_directory(out_dir) && fs::is_empty(out_dir);
    if (!empty && !overwrite) {
      throw std::invalid_argument("out_dir is not empty (pass overwrite to replace): " +
                                  out_dir);
    }
    if (!empty) fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);
}

}  // namespace

DatasetManifest fingerprint_dataset(CodecCheckpoint& ckpt, const ImageDataset& dataset,
                                    const Fingerprint& fingerprint,
                                    const std::string& out_dir, bool overwrite,
                                    std::ostream* progress) {
  if (fingerprint.n() != ckpt.config().fingerprint_len) {
    throw std::invalid_argument("fingerprint_dataset: fingerprint length mismatch");
  }
  if (dataset.resolution != ckpt.config().resolution ||
      dataset.channels != ckpt.config().channels) {
    throw std::invalid_argument("fingerprint_dataset: dataset geometry mismatch");
  }
  prepare_out_dir(out_dir, overwrite);

  DatasetManifest m;
  m.source_dir = "";
  m.out_dir = out_dir;
  m.fingerprint_hex = fingerprint.to_hex();
  m.fingerprint_len = fingerprint.n();
  m.codec_id = ckpt.codec_id();
  m.created_at = rfc3339_now();
  m.tool_version = kToolVersion;

  const int chunk = 64;
  for (int off = 0; off < dataset.count(); off += chunk) {
    int nb = std::min(chunk, dataset.count() - off);
    Tensor imgs = dataset.to_float_range(off, off + nb);
    Tensor stego = embed(ckpt, imgs, fingerprint);
    const size_t per = dataset.image_bytes();
    for (int i = 0; i < nb; ++i) {
      std::string name = dataset.names[static_cast<size_t>(off + i)];
      // Always persist as PNG regardless of the source extension.
      auto dot = name.find_last_of('.');
      if (dot != std::string::npos) name = name.substr(0, dot);
      name += ".png";
      std::string path = (fs::path(out_dir) / name).string();
      save_png_float(path, stego.ptr() + static_cast<size_t>(i) * per, dataset.channels,
                     dataset.resolution);
      m.records.push_back({name, sha256_file_hex(path)});
    }
    if (progress && (off / chunk) % 16 == 0) {
      *progress << "[embed] " << off + nb << "/" << dataset.count() << "\r";
      progress->flush();
    }
  }
  if (progress) *progress << "[embed] " << dataset.count() << "/" << dataset.count() << "\n";
  m.save((fs::path(out_dir) / "manifest.json").string());
  return m;
}

ImageDataset load_manifest_images(const DatasetManifest& manifest, int resolution,
                                  int channels, bool verify_hashes) {
  ImageDataset ds;
  ds.resolution = resolution;
  ds.channels = channels;
  ds.pixels.reserve(manifest.records.size() * static_cast<size_t>(channels) * resolution *
                    resolution);
  for (const auto& r : manifest.records) {
    std::string path = (fs::path(manifest.out_dir) / r.path).string();
    if (!fs::exists(path)) throw IntegrityError("manifest: missing file " + r.path);
    if (verify_hashes && sha256_file_hex(path) != r.sha256) {
      throw IntegrityError("manifest: hash mismatch for " + r.path);
    }
    int res = 0;
    auto u8 = load_png_u8(path, channels, &res);
    if (res != resolution) throw IntegrityError("manifest: wrong resolution in " + r.path);
    ds.pixels.insert(ds.pixels.end(), u8.begin(), u8.end());
    ds.names.push_back(r.path);
  }
  if (ds.names.empty()) throw std::invalid_argument("manifest: no records");
  return ds;
}

VerifyStats verify_dataset(CodecCheckpoint& ckpt, const DatasetManifest& manifest,
                           const Fingerprint& fingerprint) {
  ImageDataset ds = load_manifest_images(manifest, ckpt.config().resolution,
                                         ckpt.config().channels, /*verify_hashes=*/true);
  VerifyStats stats;
  const int chunk = 64;
  double sum = 0;
  for (int off = 0; off < ds.count(); off += chunk) {
    int nb = std::min(chunk, ds.count() - off);
    Tensor imgs = ds.to_float_range(off, off + nb);
    auto decs = decode(ckpt, imgs);
    for (int i = 0; i < nb; ++i) {
      double acc = bitwise_accuracy(decs[static_cast<size_t>(i)].bits, fingerprint);
      sum += acc;
      stats.min_accuracy = std::min(stats.min_accuracy, acc);
      if (acc < stats.failure_threshold) {
        stats.failures.push_back(ds.names[static_cast<size_t>(off + i)]);
      }
      ++stats.checked;
    }
  }
  stats.mean_accuracy = stats.checked ? sum / stats.checked : 0.0;
  return stats;
}

std::string FidelityMetrics::to_json() const {
  json j = {{"mean_mse", mean_mse},
            {"mean_psnr_db", std::isinf(mean_psnr_db) ? 1e9 : mean_psnr_db},
            {"max_abs_deviation", max_abs_deviation},
            {"pairs", pairs},
            {"per_image_psnr_db", per_image_psnr_db}};
  return j.dump(2);
}

FidelityMetrics fidelity_report(const ImageDataset& original, const ImageDataset& processed,
                                const std::string& out_dir, int diff_images) {
  if (original.count() != processed.count() || original.resolution != processed.resolution ||
      original.channels != processed.channels) {
    throw std::invalid_argument("fidelity_report: datasets not aligned");
  }
  auto stem = [](const std::string& name) {
    auto dot = name.find_last_of('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
  };
  for (int i = 0; i < original.count(); ++i) {
    if (stem(original.names[static_cast<size_t>(i)]) != stem(processed.names[static_cast<size_t>(i)])) {
      throw std::invalid_argument("fidelity_report: name mismatch at index " +
                                  std::to_string(i) + ": " + original.names[static_cast<size_t>(i)] +
                                  " vs " + processed.names[static_cast<size_t>(i)]);
    }
  }
  fs::create_directories(out_dir);
  FidelityMetrics fm;
  fm.pairs = original.count();
  const size_t per = original.image_bytes();
  double mse_sum = 0;
  std::vector<float> diff(per);
  for (int i = 0; i < original.count(); ++i) {
    const uint8_t* a = original.image_ptr(i);
    const uint8_t* b = processed.image_ptr(i);
    double mse = 0;
    for (size_t j = 0; j < per; ++j) {
      double d = (static_cast<double>(a[j]) - b[j]) / 255.0;
      mse += d * d;
      fm.max_abs_deviation = std::max(fm.max_abs_deviation, std::abs(d));
      if (i < diff_images) diff[j] = static_cast<float>(std::min(1.0, std::abs(d) * 10.0));
    }
    mse /= static_cast<double>(per);
    mse_sum += mse;
    fm.per_image_psnr_db.push_back(mse > 0 ? -10.0 * std::log10(mse)
                                           : std::numeric_limits<double>::infinity());
    if (i < diff_images) {
      // 10x magnified absolute difference, clamped to [0,1].
      std::string name = "diff_" + std::to_string(i) + ".png";
      save_png_float((fs::path(out_dir) / name).string(), diff.data(), original.channels,
                     original.resolution);
    }
  }
  fm.mean_mse = mse_sum / fm.pairs;
  fm.mean_psnr_db = fm.mean_mse > 0 ? -10.0 * std::log10(fm.mean_mse)
                                    : std::numeric_limits<double>::infinity();
  std::ofstream f((fs::path(out_dir) / "fidelity.json").string());
  f << fm.to_json() << "\n";
  return fm;
}

DatasetManifest lsb_embed_baseline(const ImageDataset& dataset, const Fingerprint& fingerprint,
                                   const std::string& out_dir, bool overwrite) {
  prepare_out_dir(out_dir, overwrite);
  DatasetManifest m;
  m.out_dir = out_dir;
  m.fingerprint_hex = fingerprint.to_hex();
  m.fingerprint_len = fingerprint.n();
  m.codec_id = "lsb";
  m.created_at = rfc3339_now();
  m.tool_version = kToolVersion;

  const size_t per = dataset.image_bytes();
  std::vector<uint8_t> buf(per);
  const int n = fingerprint.n();
  for (int i = 0; i < dataset.count(); ++i) {
    const uint8_t* src = dataset.image_ptr(i);
    for (size_t j = 0; j < per; ++j) {
      buf[j] = static_cast<uint8_t>((src[j] & ~1u) | fingerprint.bit(static_cast<int>(j % n)));
    }
    std::string name = dataset.names[static_cast<size_t>(i)];
    auto dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    name += ".png";
    std::string path = (fs::path(out_dir) / name).string();
    save_png_u8(path, buf.data(), dataset.channels, dataset.resolution);
    m.records.push_back({name, sha256_file_hex(path)});
  }
  m.save((fs::path(out_dir) / "manifest.json").string());
  return m;
}

Fingerprint lsb_decode(const uint8_t* chw, size_t value_count, int n) {
  if (value_count < static_cast<size_t>(n)) {
    throw std::invalid_argument("lsb_decode: image too small for fingerprint length");
  }
  std::vector<int> votes(static_cast<size_t>(n), 0);
  std::vector<int> counts(static_cast<size_t>(n), 0);
  for (size_t j = 0; j < value_count; ++j) {
    votes[j % n] += chw[j] & 1u;
    counts[j % n] += 1;
  }
  std::vector<uint8_t> bits(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    bits[static_cast<size_t>(i)] = votes[static_cast<size_t>(i)] * 2 >= counts[static_cast<size_t>(i)] ? 1 : 0;
  }
  return Fingerprint(std::move(bits));
}

Fingerprint lsb_decode(const ImageDataset& dataset, int image_index, int n) {
  return lsb_decode(dataset.image_ptr(image_index), dataset.image_bytes(), n);
}

}  // namespace fpforge
