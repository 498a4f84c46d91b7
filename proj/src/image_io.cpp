#include "fpforge/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

namespace fpforge {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// HWC BGR (OpenCV) -> CHW RGB (ours).
void mat_to_chw(const cv::Mat& m, int channels, uint8_t* dst) {
  const int res = m.rows;
  if (channels == 1) {
    for (int y = 0; y < res; ++y) {
      const uint8_t* row = m.ptr<uint8_t>(y);
      std::copy(row, row + res, dst + static_cast<ptrdiff_t>(y) * res);
    }
    return;
  }
  for (int y = 0; y < res; ++y) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < res; ++x) {
      dst[0 * res * res + y * res + x] = row[x][2];  // R
      dst[1 * res * res + y * res + x] = row[x][1];  // G
      dst[2 * res * res + y * res + x] = row[x][0];  // B
    }
  }
}

cv::Mat chw_to_mat(const uint8_t* chw, int channels, int res) {
  if (channels == 1) {
    cv::Mat m(res, res, CV_8UC1);
    for (int y = 0; y < res; ++y) {
      std::copy(chw + static_cast<ptrdiff_t>(y) * res, chw + (y + 1) * static_cast<ptrdiff_t>(res),
                m.ptr<uint8_t>(y));
    }
    return m;
  }
  cv::Mat m(res, res, CV_8UC3);
  for (int y = 0; y < res; ++y) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < res; ++x) {
      row[x][2] = chw[0 * res * res + y * res + x];
      row[x][1] = chw[1 * res * res + y * res + x];
      row[x][0] = chw[2 * res * res + y * res + x];
    }
  }
  return m;
}

}  // namespace

Tensor ImageDataset::to_float(const std::vector<int>& indices) const {
  Tensor t({static_cast<int>(indices.size()), channels, resolution, resolution});
  const size_t per = image_bytes();
  for (size_t i = 0; i < indices.size(); ++i) {
    const uint8_t* src = image_ptr(indices[i]);
    float* dst = t.ptr() + i * per;
    for (size_t j = 0; j < per; ++j) dst[j] = src[j] * (1.0f / 255.0f);
  }
  return t;
}

Tensor ImageDataset::to_float_range(int begin, int end) const {
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(end - begin));
  for (int i = begin; i < end; ++i) idx.push_back(i);
  return to_float(idx);
}

ImageDataset ingest_folder(const std::string& path, int resolution, int channels) {
  if (resolution < 8) throw std::invalid_argument("ingest_folder: resolution too small");
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("ingest_folder: channels must be 1 or 3");
  }
  if (!fs::is_directory(path)) {
    throw std::invalid_argument("ingest_folder: not a directory: " + path);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  ImageDataset ds;
  ds.resolution = resolution;
  ds.channels = channels;
  ds.pixels.reserve(files.size() * static_cast<size_t>(channels) * resolution * resolution);
  for (const auto& f : files) {
    cv::Mat img = cv::imread(f.string(),
                             channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (img.empty()) {
      std::cerr << "[ingest] warning: skipping undecodable file " << f << "\n";
      ++ds.skipped;
      continue;
    }
    // Center crop to square, then resize.
    int side = std::min(img.rows, img.cols);
    int y0 = (img.rows - side) / 2;
    int x0 = (img.cols - side) / 2;
    cv::Mat crop = img(cv::Rect(x0, y0, side, side));
    cv::Mat resized;
    if (side == resolution) {
      resized = crop.clone();
    } else {
      cv::resize(crop, resized, cv::Size(resolution, resolution), 0, 0,
                 side > resolution ? cv::INTER_AREA : cv::INTER_LINEAR);
    }
    size_t off = ds.pixels.size();
    ds.pixels.resize(off + ds.image_bytes());
    mat_to_chw(resized, channels, ds.pixels.data() + off);
    ds.names.push_back(f.filename().string());
  }
  if (ds.names.empty()) {
    throw std::invalid_argument("ingest_folder: no decodable images in " + path);
  }
  return ds;
}

void save_png_u8(const std::string& path, const uint8_t* chw, int channels, int res) {
  cv::Mat m = chw_to_mat(chw, channels, res);
  if (!cv::imwrite(path, m)) throw IoError("save_png: cannot write " + path);
}

std::vector<uint8_t> float_to_u8(const float* chw, size_t n) {
  std::vector<uint8_t> out(n);
  for (size_t i = 0; i < n; ++i) {
    float v = std::clamp(chw[i], 0.0f, 1.0f);
    out[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

void save_png_float(const std::string& path, const float* chw, int channels, int res) {
  auto u8 = float_to_u8(chw, static_cast<size_t>(channels) * res * res);
  save_png_u8(path, u8.data(), channels, res);
}

std::vector<uint8_t> load_png_u8(const std::string& path, int channels, int* res_out) {
  cv::Mat img =
      cv::imread(path, channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("load_png: cannot read " + path);
  if (img.rows != img.cols) throw IoError("load_png: non-square image " + path);
  std::vector<uint8_t> out(static_cast<size_t>(channels) * img.rows * img.cols);
  mat_to_chw(img, channels, out.data());
  if (res_out) *res_out = img.rows;
  return out;
}

Tensor quantize8(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data) {
    float c = std::clamp(v, 0.0f, 1.0f);
    v = static_cast<float>(std::lround(c * 255.0f)) / 255.0f;
  }
  return out;
}

void generate_synthetic_images(const std::string& out_dir, int count, int resolution,
                               int channels, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_synthetic_images: count must be >= 1");
  fs::create_directories(out_dir);
  const int res = resolution;
  std::vector<float> img(static_cast<size_t>(channels) * res * res);
  for (int idx = 0; idx < count; ++idx) {
    RandomStream rng(seed * 0x9e3779b9ull + static_cast<uint64_t>(idx));
    // Gradient background between two colors along a random direction.
    double theta = rng.uniform(0, 2 * M_PI);
    double dx = std::cos(theta), dy = std::sin(theta);
    double c0[3], c1[3], cb[3], cb2[3];
    for (int c = 0; c < 3; ++c) {
      c0[c] = rng.uniform(0.15, 0.85);
      c1[c] = rng.uniform(0.15, 0.85);
      cb[c] = rng.uniform(0.1, 0.9);
      cb2[c] = rng.uniform(0.1, 0.9);
    }
    // Primary blob (soft ellipse) and a smaller secondary one.
    double bx = rng.uniform(0.3, 0.7), by = rng.uniform(0.3, 0.7);
    double brx = rng.uniform(0.15, 0.32), bry = rng.uniform(0.15, 0.32);
    double b2x = rng.uniform(0.2, 0.8), b2y = rng.uniform(0.2, 0.8);
    double b2r = rng.uniform(0.06, 0.14);
    auto smoothstep = [](double e0, double e1, double x) {
      double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
      return t * t * (3 - 2 * t);
    };
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        double u = (x + 0.5) / res, v = (y + 0.5) / res;
        double t = std::clamp(0.5 + 0.5 * ((u - 0.5) * dx + (v - 0.5) * dy) * 2.0, 0.0, 1.0);
        double px[3];
        for (int c = 0; c < 3; ++c) px[c] = c0[c] * (1 - t) + c1[c] * t;
        // primary blob
        double e = std::pow((u - bx) / brx, 2) + std::pow((v - by) / bry, 2);
        double a = 1.0 - smoothstep(0.7, 1.3, e);
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1 - a) + cb[c] * a;
        // secondary blob
        double e2 = (std::pow(u - b2x, 2) + std::pow(v - b2y, 2)) / (b2r * b2r);
        double a2 = (1.0 - smoothstep(0.6, 1.4, e2)) * 0.8;
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1 - a2) + cb2[c] * a2;
        if (channels == 1) {
          img[static_cast<size_t>(y) * res + x] =
              static_cast<float>(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        } else {
          for (int c = 0; c < 3; ++c) {
            img[static_cast<size_t>(c) * res * res + static_cast<size_t>(y) * res + x] =
                static_cast<float>(px[c]);
          }
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "synth_%06d.png", idx);
    save_png_float((fs::path(out_dir) / name).string(), img.data(), channels, res);
  }
}

}  // namespace fpforge
