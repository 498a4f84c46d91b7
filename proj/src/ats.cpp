#include "fpforge/ats.hpp"

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/ml.hpp>

#include <cmath>

namespace fpforge {

using json = nlohmann::json;

std::string AtsReport::to_json() const {
  json j = {{"num_positive", num_positive},
            {"num_negative", num_negative},
            {"accuracy", accuracy},
            {"precision_pos", precision_pos},
            {"recall_pos", recall_pos},
            {"precision_neg", precision_neg},
            {"recall_neg", recall_neg},
            {"shadow_codec_id", shadow_codec_id},
            {"feature_settings", feature_settings},
            {"classifier_settings", classifier_settings},
            {"seed", seed}};
  return j.dump(2);
}

std::pair<CodecCheckpoint, TrainLog> train_shadow_codec(const ImageDataset& dataset,
                                                        CodecConfig config, uint64_t seed,
                                                        std::ostream* progress) {
  config.seed = seed;
  return train_codec(dataset, config, progress);
}

namespace {
constexpr int kHistBins = 16;
constexpr int kResidDown = 8;
constexpr double kHistRange = 0.25;  // residuals clamped to [-range, range]
}  // namespace

std::vector<float> ats_features(const float* chw, int channels, int res) {
  std::vector<float> features;
  features.reserve(static_cast<size_t>(channels) * kHistBins + kResidDown * kResidDown);

  // 3x3 box high-pass residual per channel.
  std::vector<float> resid(static_cast<size_t>(channels) * res * res);
  for (int c = 0; c < channels; ++c) {
    const float* src = chw + static_cast<size_t>(c) * res * res;
    float* dst = resid.data() + static_cast<size_t>(c) * res * res;
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        float sum = 0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= res || xx < 0 || xx >= res) continue;
            sum += src[static_cast<size_t>(yy) * res + xx];
            ++cnt;
          }
        }
        dst[static_cast<size_t>(y) * res + x] =
            src[static_cast<size_t>(y) * res + x] - sum / cnt;
      }
    }
  }

  // 16-bin histogram of residual values per channel, normalized.
  for (int c = 0; c < channels; ++c) {
    const float* r = resid.data() + static_cast<size_t>(c) * res * res;
    std::vector<float> hist(kHistBins, 0.f);
    for (int i = 0; i < res * res; ++i) {
      double v = std::clamp<double>(r[i], -kHistRange, kHistRange);
      int bin = static_cast<int>((v + kHistRange) / (2 * kHistRange) * kHistBins);
      bin = std::clamp(bin, 0, kHistBins - 1);
      hist[static_cast<size_t>(bin)] += 1.0f;
    }
    for (auto& h : hist) h /= static_cast<float>(res * res);
    features.insert(features.end(), hist.begin(), hist.end());
  }

  // Downsampled grayscale residual-energy map.
  cv::Mat gray(res, res, CV_32FC1);
  for (int y = 0; y < res; ++y) {
    float* row = gray.ptr<float>(y);
    for (int x = 0; x < res; ++x) {
      float v = 0;
      for (int c = 0; c < channels; ++c) {
        v += std::abs(resid[static_cast<size_t>(c) * res * res + static_cast<size_t>(y) * res + x]);
      }
      row[x] = v / channels;
    }
  }
  cv::Mat down;
  cv::resize(gray, down, cv::Size(kResidDown, kResidDown), 0, 0, cv::INTER_AREA);
  for (int y = 0; y < kResidDown; ++y) {
    const float* row = down.ptr<float>(y);
    features.insert(features.end(), row, row + kResidDown);
  }
  return features;
}

namespace {

cv::Mat feature_matrix(const Tensor& images) {
  const int N = images.dim(0), C = images.dim(1), res = images.dim(2);
  const size_t per = static_cast<size_t>(C) * res * res;
  std::vector<float> first = ats_features(images.ptr(), C, res);
  cv::Mat m(N, static_cast<int>(first.size()), CV_32F);
  for (int i = 0; i < N; ++i) {
    auto f = ats_features(images.ptr() + static_cast<size_t>(i) * per, C, res);
    std::copy(f.begin(), f.end(), m.ptr<float>(i));
  }
  return m;
}

// Encode every image with a fresh random fingerprint.
Tensor shadow_encode(CodecCheckpoint& shadow, const Tensor& images, RandomStream& rng) {
  const auto& cfg = shadow.config();
  Tensor out = images;
  const int chunk = 64;
  for (int off = 0; off < images.dim(0); off += chunk) {
    int nb = std::min(chunk, images.dim(0) - off);
    Tensor sub({nb, cfg.channels, cfg.resolution, cfg.resolution});
    size_t per = sub.data.size() / static_cast<size_t>(nb);
    std::copy(images.ptr() + static_cast<size_t>(off) * per,
              images.ptr() + static_cast<size_t>(off + nb) * per, sub.ptr());
    Tensor bits({nb, cfg.fingerprint_len});
    for (auto& v : bits.data) v = static_cast<float>(rng.bit());
    Tensor stego = shadow.encoder().forward(sub, bits);
    for (auto& v : stego.data) v = std::clamp(v, 0.0f, 1.0f);
    std::copy(stego.ptr(), stego.ptr() + stego.data.size(),
              out.ptr() + static_cast<size_t>(off) * per);
  }
  return out;
}

}  // namespace

AtsReport ats_attack(const Tensor& test_images, const std::vector<int>& ground_truth,
                     CodecCheckpoint& shadow, uint64_t seed,
                     const std::string& svm_save_path) {
  const int N = test_images.dim(0);
  if (static_cast<int>(ground_truth.size()) != N) {
    throw std::invalid_argument("ats_attack: label count mismatch");
  }
  int pos = 0;
  for (int v : ground_truth) pos += v ? 1 : 0;
  if (pos * 2 != N) {
    throw std::invalid_argument("ats_attack: protocol requires a balanced test set");
  }

  RandomStream rng(seed);
  cv::theRNG().state = seed;  // OpenCV k-fold shuffling

  // Artificial training set: originals are the negative class; copies
  // shadow-encoded twice and three times are the positive class.
  Tensor enc1 = shadow_encode(shadow, test_images, rng);
  Tensor enc2 = shadow_encode(shadow, enc1, rng);
  Tensor enc3 = shadow_encode(shadow, enc2, rng);

  cv::Mat f_neg = feature_matrix(test_images);
  cv::Mat f_pos2 = feature_matrix(enc2);
  cv::Mat f_pos3 = feature_matrix(enc3);
  cv::Mat train_feats;
  cv::vconcat(std::vector<cv::Mat>{f_neg, f_pos2, f_pos3}, train_feats);
  cv::Mat labels(train_feats.rows, 1, CV_32S);
  for (int i = 0; i < f_neg.rows; ++i) labels.at<int>(i) = 0;
  for (int i = f_neg.rows; i < train_feats.rows; ++i) labels.at<int>(i) = 1;

  // Standardize feature columns from training statistics.
  cv::Mat mean, stddev;
  std::vector<double> mu(static_cast<size_t>(train_feats.cols)), sd(static_cast<size_t>(train_feats.cols));
  for (int c = 0; c < train_feats.cols; ++c) {
    cv::meanStdDev(train_feats.col(c), mean, stddev);
    mu[static_cast<size_t>(c)] = mean.at<double>(0);
    sd[static_cast<size_t>(c)] = std::max(stddev.at<double>(0), 1e-8);
  }
  auto standardize = [&](cv::Mat& m) {
    for (int r = 0; r < m.rows; ++r) {
      float* row = m.ptr<float>(r);
      for (int c = 0; c < m.cols; ++c) {
        row[c] = static_cast<float>((row[c] - mu[static_cast<size_t>(c)]) / sd[static_cast<size_t>(c)]);
      }
    }
  };
  standardize(train_feats);

  auto svm = cv::ml::SVM::create();
  svm->setType(cv::ml::SVM::C_SVC);
  svm->setKernel(cv::ml::SVM::RBF);
  auto tdata = cv::ml::TrainData::create(train_feats, cv::ml::ROW_SAMPLE, labels);
  svm->trainAuto(tdata, 5);  // 5-fold cross-validated C/gamma search
  if (!svm_save_path.empty()) svm->save(svm_save_path);

  // Test: one more shadow pass moves originals to 1x and fingerprinted test
  // images to (their count + 1); classify and map back.
  cv::Mat f_test = feature_matrix(enc1);
  standardize(f_test);
  int tp = 0, tn = 0, fp = 0, fn = 0;
  for (int i = 0; i < N; ++i) {
    float pred = svm->predict(f_test.row(i));
    int predicted_fingerprinted = pred >= 0.5f ? 1 : 0;
    if (ground_truth[static_cast<size_t>(i)] == 1) {
      (predicted_fingerprinted ? tp : fn) += 1;
    } else {
      (predicted_fingerprinted ? fp : tn) += 1;
    }
  }

  AtsReport rep;
  rep.num_positive = pos;
  rep.num_negative = N - pos;
  rep.accuracy = static_cast<double>(tp + tn) / N;
  rep.precision_pos = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0;
  rep.recall_pos = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0;
  rep.precision_neg = tn + fn ? static_cast<double>(tn) / (tn + fn) : 0;
  rep.recall_neg = tn + fp ? static_cast<double>(tn) / (tn + fp) : 0;
  rep.shadow_codec_id = shadow.codec_id();
  rep.feature_settings = "highpass3x3 hist16/channel + gray residual 8x8";
  rep.classifier_settings = "opencv svm rbf trainAuto 5-fold";
  rep.seed = seed;
  return rep;
}

}  // namespace fpforge
