#include "fpforge/perturb.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>

#include "fpforge/transfer.hpp"

namespace fpforge {

using json = nlohmann::json;

const char* perturb_kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::gaussian_noise: return "gaussian_noise";
    case PerturbKind::gaussian_blur: return "gaussian_blur";
    case PerturbKind::jpeg: return "jpeg";
    case PerturbKind::center_crop: return "center_crop";
    case PerturbKind::weight_quantize: return "weight_quantize";
    case PerturbKind::weight_noise: return "weight_noise";
  }
  return "?";
}

PerturbKind perturb_kind_from_name(const std::string& name) {
  for (PerturbKind k :
       {PerturbKind::gaussian_noise, PerturbKind::gaussian_blur, PerturbKind::jpeg,
        PerturbKind::center_crop, PerturbKind::weight_quantize, PerturbKind::weight_noise}) {
    if (name == perturb_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown perturbation kind: " + name);
}

bool is_image_kind(PerturbKind k) {
  return k == PerturbKind::gaussian_noise || k == PerturbKind::gaussian_blur ||
         k == PerturbKind::jpeg || k == PerturbKind::center_crop;
}

bool larger_is_milder(PerturbKind k) {
  return k == PerturbKind::jpeg || k == PerturbKind::center_crop;
}

void PerturbationSpec::validate(int resolution) const {
  switch (kind) {
    case PerturbKind::gaussian_noise:
      if (magnitude < 0) throw std::invalid_argument("noise sigma must be >= 0");
      break;
    case PerturbKind::gaussian_blur: {
      int k = static_cast<int>(magnitude);
      if (k != magnitude || k < 1 || k % 2 == 0) {
        throw std::invalid_argument("blur kernel must be an odd positive integer");
      }
      break;
    }
    case PerturbKind::jpeg: {
      int q = static_cast<int>(magnitude);
      if (q != magnitude || q < 1 || q > 100) {
        throw std::invalid_argument("jpeg quality must lie in [1,100]");
      }
      break;
    }
    case PerturbKind::center_crop: {
      int c = static_cast<int>(magnitude);
      if (c != magnitude || c < 8 || c > resolution) {
        throw std::invalid_argument("crop size must lie in [8, resolution]");
      }
      break;
    }
    case PerturbKind::weight_quantize:
      if (magnitude <= 0) throw std::invalid_argument("quantize precision must be > 0");
      break;
    case PerturbKind::weight_noise:
      if (magnitude < 0) throw std::invalid_argument("weight noise sigma must be >= 0");
      break;
  }
}

namespace {

cv::Mat tensor_image_to_mat(const Tensor& images, int i) {
  const int C = images.dim(1), H = images.dim(2), W = images.dim(3);
  cv::Mat m(H, W, C == 1 ? CV_32FC1 : CV_32FC3);
  const float* src = images.ptr() + static_cast<size_t>(i) * C * H * W;
  for (int y = 0; y < H; ++y) {
    float* row = m.ptr<float>(y);
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        row[x * C + c] = src[static_cast<size_t>(c) * H * W + static_cast<size_t>(y) * W + x];
      }
    }
  }
  return m;
}

void mat_to_tensor_image(const cv::Mat& m, Tensor& images, int i) {
  const int C = images.dim(1), H = images.dim(2), W = images.dim(3);
  float* dst = images.ptr() + static_cast<size_t>(i) * C * H * W;
  for (int y = 0; y < H; ++y) {
    const float* row = m.ptr<float>(y);
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        dst[static_cast<size_t>(c) * H * W + static_cast<size_t>(y) * W + x] = row[x * C + c];
      }
    }
  }
}

}  // namespace

Tensor perturb_image(const Tensor& images, const PerturbationSpec& spec, uint64_t seed) {
  if (!is_image_kind(spec.kind)) {
    throw std::invalid_argument("perturb_image: not an image perturbation");
  }
  const int res = images.dim(2);
  spec.validate(res);

  switch (spec.kind) {
    case PerturbKind::gaussian_noise: {
      if (spec.magnitude == 0) return images;
      Tensor out = images;
      RandomStream rng(seed);
      for (auto& v : out.data) {
        v = std::clamp(v + static_cast<float>(rng.normal(0.0, spec.magnitude)), 0.0f, 1.0f);
      }
      return out;
    }
    case PerturbKind::gaussian_blur: {
      int k = static_cast<int>(spec.magnitude);
      if (k == 1) return images;
      Tensor out = images;
      for (int i = 0; i < images.dim(0); ++i) {
        cv::Mat m = tensor_image_to_mat(images, i);
        cv::Mat blurred;
        // sigma = 0 lets OpenCV derive it from the kernel size with the
        // standard 0.3*((k-1)/2 - 1) + 0.8 rule.
        cv::GaussianBlur(m, blurred, cv::Size(k, k), 0);
        mat_to_tensor_image(blurred, out, i);
      }
      return out;
    }
    case PerturbKind::jpeg: {
      int q = static_cast<int>(spec.magnitude);
      if (q == 100) return images;  // lossless passthrough mode
      const int C = images.dim(1);
      Tensor out = images;
      std::vector<int> params = {cv::IMWRITE_JPEG_QUALITY, q};
      for (int i = 0; i < images.dim(0); ++i) {
        const size_t per = static_cast<size_t>(C) * res * res;
        auto u8 = float_to_u8(images.ptr() + static_cast<size_t>(i) * per, per);
        // CHW RGB -> HWC BGR for the codec.
        cv::Mat m(res, res, C == 1 ? CV_8UC1 : CV_8UC3);
        for (int y = 0; y < res; ++y) {
          uint8_t* row = m.ptr<uint8_t>(y);
          for (int x = 0; x < res; ++x) {
            if (C == 1) {
              row[x] = u8[static_cast<size_t>(y) * res + x];
            } else {
              row[x * 3 + 2] = u8[0 * res * res + y * res + x];
              row[x * 3 + 1] = u8[1 * res * res + y * res + x];
              row[x * 3 + 0] = u8[2 * res * res + y * res + x];
            }
          }
        }
        std::vector<uint8_t> enc;
        if (!cv::imencode(".jpg", m, enc, params)) throw IoError("jpeg encode failed");
        cv::Mat dec = cv::imdecode(enc, C == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
        float* dst = out.ptr() + static_cast<size_t>(i) * per;
        for (int y = 0; y < res; ++y) {
          const uint8_t* row = dec.ptr<uint8_t>(y);
          for (int x = 0; x < res; ++x) {
            if (C == 1) {
              dst[static_cast<size_t>(y) * res + x] = row[x] / 255.0f;
            } else {
              dst[0 * res * res + y * res + x] = row[x * 3 + 2] / 255.0f;
              dst[1 * res * res + y * res + x] = row[x * 3 + 1] / 255.0f;
              dst[2 * res * res + y * res + x] = row[x * 3 + 0] / 255.0f;
            }
          }
        }
      }
      return out;
    }
    case PerturbKind::center_crop: {
      int c = static_cast<int>(spec.magnitude);
      if (c == res) return images;
      Tensor out = images;
      int off = (res - c) / 2;
      for (int i = 0; i < images.dim(0); ++i) {
        cv::Mat m = tensor_image_to_mat(images, i);
        cv::Mat crop = m(cv::Rect(off, off, c, c));
        cv::Mat back;
        cv::resize(crop, back, cv::Size(res, res), 0, 0, cv::INTER_LINEAR);
        mat_to_tensor_image(back, out, i);
      }
      return out;
    }
    default:
      throw std::invalid_argument("perturb_image: unsupported kind");
  }
}

GanCheckpoint perturb_generator(const GanCheckpoint& ckpt, const PerturbationSpec& spec,
                                uint64_t seed) {
  if (is_image_kind(spec.kind)) {
    throw std::invalid_argument("perturb_generator: not a model perturbation");
  }
  spec.validate(ckpt.config.resolution);
  GanCheckpoint out = ckpt.clone();
  auto params = out.trainable_gen_params();
  if (spec.kind == PerturbKind::weight_quantize) {
    const double prec = spec.magnitude;
    for (auto* p : params) {
      for (auto& v : p->value.data) {
        v = static_cast<float>(std::round(v / prec) * prec);
      }
    }
  } else {  // weight_noise
    if (spec.magnitude == 0) return out;
    RandomStream rng(seed);
    for (auto* p : params) {
      for (auto& v : p->value.data) {
        v += static_cast<float>(rng.normal(0.0, spec.magnitude));
      }
    }
  }
  return out;
}

std::string SweepResult::to_json() const {
  json j = {{"kind", perturb_kind_name(kind)},
            {"grid", grid},
            {"generated_acc", generated_acc},
            {"reference", reference},
            {"reference_label", reference_label},
            {"samples_per_point", samples_per_point},
            {"seed", seed}};
  return j.dump(2);
}

SweepResult SweepResult::from_json(const std::string& text) {
  json j = json::parse(text);
  SweepResult s;
  s.kind = perturb_kind_from_name(j.at("kind").get<std::string>());
  s.grid = j.at("grid").get<std::vector<double>>();
  s.generated_acc = j.at("generated_acc").get<std::vector<double>>();
  s.reference = j.at("reference").get<std::vector<double>>();
  s.reference_label = j.value("reference_label", "");
  s.samples_per_point = j.value("samples_per_point", 0);
  s.seed = j.value("seed", 0ull);
  return s;
}

namespace {

double mean_decode_accuracy(CodecCheckpoint& codec, const Tensor& images,
                            const Fingerprint& fp) {
  auto decs = decode(codec, images);
  double sum = 0;
  for (const auto& d : decs) sum += bitwise_accuracy(d.bits, fp);
  return decs.empty() ? 0.0 : sum / static_cast<double>(decs.size());
}

}  // namespace

SweepResult sweep_image(const Tensor& generated_images, CodecCheckpoint& codec,
                        const Fingerprint& fingerprint, PerturbKind kind,
                        const std::vector<double>& grid, const Tensor& reference_images,
                        uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("sweep_image: empty magnitude grid");
  if (!is_image_kind(kind)) throw std::invalid_argument("sweep_image: needs an image kind");
  SweepResult s;
  s.kind = kind;
  s.grid = grid;
  std::sort(s.grid.begin(), s.grid.end());
  s.samples_per_point = generated_images.dim(0);
  s.seed = seed;
  s.reference_label = "fingerprinted_real_accuracy";
  for (size_t gi = 0; gi < s.grid.size(); ++gi) {
    PerturbationSpec spec{kind, s.grid[gi]};
    Tensor pg = perturb_image(generated_images, spec, seed + gi);
    s.generated_acc.push_back(mean_decode_accuracy(codec, pg, fingerprint));
    Tensor pr = perturb_image(reference_images, spec, seed + 1000 + gi);
    s.reference.push_back(mean_decode_accuracy(codec, pr, fingerprint));
  }
  return s;
}

SweepResult sweep_model(const GanCheckpoint& gan, CodecCheckpoint& codec,
                        const Fingerprint& fingerprint, PerturbKind kind,
                        const std::vector<double>& grid, int num_samples,
                        const ImageDataset& quality_reference, uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("sweep_model: empty magnitude grid");
  if (is_image_kind(kind)) throw std::invalid_argument("sweep_model: needs a model kind");
  SweepResult s;
  s.kind = kind;
  s.grid = grid;
  std::sort(s.grid.begin(), s.grid.end());
  s.samples_per_point = num_samples;
  s.seed = seed;
  s.reference_label = "nearest_train_psnr_db";
  for (size_t gi = 0; gi < s.grid.size(); ++gi) {
    PerturbationSpec spec{kind, s.grid[gi]};
    GanCheckpoint perturbed = perturb_generator(gan, spec, seed + gi);
    Tensor samples = sample(perturbed, num_samples, seed + 5000);
    s.generated_acc.push_back(mean_decode_accuracy(codec, samples, fingerprint));
    s.reference.push_back(nearest_train_psnr(samples, quality_reference, 1000, seed));
  }
  return s;
}

WorkingRange working_range(const SweepResult& sweep, double threshold) {
  if (sweep.grid.empty()) throw std::invalid_argument("working_range: empty sweep");
  const size_t n = sweep.grid.size();
  // Walk from the mild end toward the harsh end.
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = larger_is_milder(sweep.kind) ? n - 1 - i : i;

  WorkingRange r;
  if (sweep.generated_acc[order[0]] < threshold) return r;  // even the mild end fails
  size_t last_pass = 0;
  for (size_t i = 1; i < n; ++i) {
    if (sweep.generated_acc[order[i]] >= threshold) {
      last_pass = i;
    } else {
      break;
    }
  }
  double boundary;
  if (last_pass == n - 1) {
    boundary = sweep.grid[order[n - 1]];
  } else {
    size_t a = order[last_pass], b = order[last_pass + 1];
    double acc_a = sweep.generated_acc[a], acc_b = sweep.generated_acc[b];
    double t = (acc_a - threshold) / (acc_a - acc_b);  // acc_a >= thr > acc_b
    boundary = sweep.grid[a] + t * (sweep.grid[b] - sweep.grid[a]);
  }
  r.empty = false;
  if (larger_is_milder(sweep.kind)) {
    r.lo = boundary;
    r.hi = sweep.grid.back();
  } else {
    r.lo = sweep.grid.front();
    r.hi = boundary;
  }
  return r;
}

std::vector<double> default_grid(PerturbKind kind, int resolution) {
  switch (kind) {
    case PerturbKind::gaussian_noise:
      return {0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15};
    case PerturbKind::gaussian_blur:
      return {1, 3, 5, 7, 9};
    case PerturbKind::jpeg:
      return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    case PerturbKind::center_crop: {
      std::vector<double> g;
      for (int c = resolution / 4; c <= resolution; c += resolution / 8) g.push_back(c);
      return g;
    }
    case PerturbKind::weight_quantize:
      return {1e-3, 1e-2, 1e-1, 1.0};
    case PerturbKind::weight_noise:
      return {0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.24, 0.28, 0.32, 0.36, 0.4};
  }
  return {};
}

}  // namespace fpforge
