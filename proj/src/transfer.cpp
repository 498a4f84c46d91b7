#include "fpforge/transfer.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace fpforge {

using json = nlohmann::json;
using nn::Param;

std::string TransferReport::to_json() const {
  json j = {{"num_samples", num_samples},
            {"mean_accuracy", mean_accuracy},
            {"accuracy_ci95", accuracy_ci95},
            {"mean_p_value", mean_p_value},
            {"median_p_value", median_p_value},
            {"p_value_at_mean_accuracy", p_value_at_mean_accuracy},
            {"threshold", threshold},
            {"pass_fraction", pass_fraction},
            {"decoder_free_training", decoder_free_training},
            {"per_image_accuracy", per_image_accuracy}};
  return j.dump(2);
}

namespace {

TransferReport accumulate_report(const std::vector<double>& accs,
                                 const std::vector<double>& pvals, int n_bits,
                                 double threshold) {
  TransferReport r;
  r.threshold = threshold;
  r.num_samples = static_cast<int>(accs.size());
  r.per_image_accuracy = accs;
  double sum = 0, sum2 = 0, psum = 0;
  int pass = 0;
  for (size_t i = 0; i < accs.size(); ++i) {
    sum += accs[i];
    sum2 += accs[i] * accs[i];
    psum += pvals[i];
    if (accs[i] >= threshold) ++pass;
  }
  const double n = static_cast<double>(accs.size());
  r.mean_accuracy = sum / n;
  double var = std::max(0.0, sum2 / n - r.mean_accuracy * r.mean_accuracy);
  r.accuracy_ci95 = 1.96 * std::sqrt(var / n);
  r.mean_p_value = psum / n;
  std::vector<double> sorted = pvals;
  std::sort(sorted.begin(), sorted.end());
  r.median_p_value = sorted[sorted.size() / 2];
  int k_mean = static_cast<int>(std::lround(r.mean_accuracy * n_bits));
  r.p_value_at_mean_accuracy = match_pvalue(std::clamp(k_mean, 0, n_bits), n_bits);
  r.pass_fraction = static_cast<double>(pass) / n;
  return r;
}

}  // namespace

TransferReport evaluate_images(const Tensor& images, CodecCheckpoint& codec,
                               const Fingerprint& fingerprint, double threshold) {
  auto decs = decode(codec, images);
  std::vector<double> accs, pvals;
  accs.reserve(decs.size());
  pvals.reserve(decs.size());
  for (const auto& d : decs) {
    auto m = verify_match(d, fingerprint, threshold);
    accs.push_back(m.accuracy);
    pvals.push_back(m.p_value);
  }
  return accumulate_report(accs, pvals, fingerprint.n(), threshold);
}

TransferReport evaluate_transferability(GanCheckpoint& gan, CodecCheckpoint& codec,
                                        const Fingerprint& fingerprint, int num_samples,
                                        uint64_t sample_seed, double threshold) {
  if (num_samples < 1) throw std::invalid_argument("evaluate_transferability: num_samples >= 1");
  // Generated images circulate as 8-bit files; decode on that grid.
  Tensor samples = quantize8(sample(gan, num_samples, sample_seed));
  TransferReport r = evaluate_images(samples, codec, fingerprint, threshold);
  r.decoder_free_training = gan.decoder_free;
  return r;
}

// ---- joint baseline ---------------------------------------------------------

JointBaselineResult train_joint_baseline(const ImageDataset& clean_data,
                                         const Fingerprint& fingerprint,
                                         const GeneratorConfig& config, double eta,
                                         std::ostream* progress) {
  config.validate();
  if (clean_data.resolution != config.resolution || clean_data.channels != config.channels) {
    throw std::invalid_argument("train_joint_baseline: dataset geometry mismatch");
  }
  const auto t_start = std::chrono::steady_clock::now();

  JointBaselineResult result{GanCheckpoint(config)};
  GanCheckpoint& ckpt = result.checkpoint;
  ckpt.model_id = "joint-baseline";
  ckpt.manifest_ref = "clean";
  ckpt.decoder_free = false;  // the objective carries a decoder term

  CodecConfig dec_cfg;
  dec_cfg.resolution = config.resolution;
  dec_cfg.channels = config.channels;
  dec_cfg.fingerprint_len = fingerprint.n();
  dec_cfg.seed = config.seed ^ 0xd00dfeedull;
  result.decoder_config = dec_cfg;
  RandomStream dec_rng(dec_cfg.seed);
  result.decoder = std::make_unique<StegaDecoder>(dec_cfg, dec_rng);

  std::vector<Param*> g_params, d_params, dec_params;
  ckpt.gen().collect_params(g_params);
  ckpt.dis().collect_params(d_params);
  result.decoder->collect_params(dec_params);
  nn::Adam opt_g(config.lr_g, config.adam_beta1);
  nn::Adam opt_d(config.lr_d, config.adam_beta1);
  nn::Adam opt_dec(config.lr_g, config.adam_beta1);
  opt_g.attach(g_params);
  opt_d.attach(d_params);
  opt_dec.attach(dec_params);

  RandomStream rng(config.seed);
  RandomStream rng_z = rng.fork(10);
  RandomStream rng_order = rng.fork(11);
  std::vector<int> order(static_cast<size_t>(clean_data.count()));
  for (int i = 0; i < clean_data.count(); ++i) order[static_cast<size_t>(i)] = i;
  rng_order.shuffle(order);
  size_t cursor = 0;

  Tensor target_bits = fingerprint_to_tensor(fingerprint, config.batch_size);

  auto sample_latents = [&](int count) {
    Tensor z({count, config.latent_dim});
    for (auto& v : z.data) v = static_cast<float>(rng_z.normal());
    return z;
  };

  bool aborted = false;
  for (int64_t iter = 0; iter < config.iterations; ++iter) {
    // Discriminator step (merged real+fake batch).
    ckpt.gen().zero_grad();
    ckpt.dis().zero_grad();
    Tensor z1 = sample_latents(config.batch_size);
    Tensor fake = ckpt.gen().forward(z1, true);
    std::vector<int> idx(static_cast<size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor >= order.size()) {
        rng_order.shuffle(order);
        cursor = 0;
      }
      idx[static_cast<size_t>(i)] = order[cursor++];
    }
    Tensor real = clean_data.to_float(idx);
    for (auto& v : real.data) v = v * 2.0f - 1.0f;
    Tensor real_logits = ckpt.dis().forward(real, true);
    Tensor g_real;
    double d_loss = nn::gan_d_real_loss(real_logits, &g_real);
    ckpt.dis().backward(g_real);
    Tensor fake_logits = ckpt.dis().forward(fake, true);
    Tensor g_fake;
    d_loss += nn::gan_d_fake_loss(fake_logits, &g_fake);
    ckpt.dis().backward(g_fake);
    opt_d.step();

    // Generator + decoder step: L_adv + eta * BCE(dec(G(z)), w).
    ckpt.gen().zero_grad();
    ckpt.dis().zero_grad();
    result.decoder->zero_grad();
    Tensor z2 = sample_latents(config.batch_size);
    Tensor fake2 = ckpt.gen().forward(z2, true);
    Tensor flogits = ckpt.dis().forward(fake2, true);
    // The decoder expects codec range [0,1]; generator runs in [-1,1].
    Tensor fake01 = fake2;
    for (auto& v : fake01.data) v = (v + 1.0f) * 0.5f;
    Tensor probs = result.decoder->forward(fake01);
    Tensor g_fl, g_probs;
    double adv_loss = nn::gan_g_loss(flogits, &g_fl);
    double bce = nn::bce_loss<float>(probs, target_bits, &g_probs);
    for (auto& v : g_probs.data) v *= static_cast<float>(eta);
    Tensor grad_from_dis = ckpt.dis().backward(g_fl);
    Tensor grad_from_dec01 = result.decoder->backward(g_probs);
    // Chain through the range mapping: d fake01 / d fake2 = 0.5.
    Tensor total = grad_from_dis;
    for (size_t i = 0; i < total.data.size(); ++i) {
      total.data[i] += 0.5f * grad_from_dec01.data[i];
    }
    ckpt.gen().backward(total);
    opt_g.step();
    opt_dec.step();

    if (std::isnan(d_loss) || std::isnan(adv_loss) || std::isnan(bce)) {
      ckpt.status = "aborted_nan";
      ckpt.iterations_done = iter + 1;
      aborted = true;
      if (progress) *progress << "[joint] diverged (NaN) at iter " << iter << "\n";
      break;
    }
    if (iter % config.log_every == 0) {
      result.d_losses.push_back(d_loss);
      result.g_losses.push_back(adv_loss);
      result.bce_losses.push_back(bce);
      if (progress) {
        *progress << "[joint] iter " << iter << " d=" << d_loss << " adv=" << adv_loss
                  << " bce=" << bce << "\n";
        progress->flush();
      }
    }
  }
  if (!aborted) {
    ckpt.status = "completed";
    ckpt.iterations_done = config.iterations;
  }
  result.status = ckpt.status;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

TransferReport evaluate_with_decoder(GanCheckpoint& gan, StegaDecoder& decoder,
                                     const CodecConfig& decoder_cfg,
                                     const Fingerprint& fingerprint, int num_samples,
                                     uint64_t sample_seed, double threshold) {
  Tensor samples = sample(gan, num_samples, sample_seed);
  std::vector<double> accs, pvals;
  const int chunk = 64;
  for (int off = 0; off < num_samples; off += chunk) {
    int nb = std::min(chunk, num_samples - off);
    Tensor sub({nb, decoder_cfg.channels, decoder_cfg.resolution, decoder_cfg.resolution});
    size_t per = sub.data.size() / static_cast<size_t>(nb);
    std::copy(samples.ptr() + static_cast<size_t>(off) * per,
              samples.ptr() + static_cast<size_t>(off + nb) * per, sub.ptr());
    Tensor probs = decoder.forward(sub);
    for (int i = 0; i < nb; ++i) {
      std::vector<uint8_t> bits(static_cast<size_t>(fingerprint.n()));
      for (int j = 0; j < fingerprint.n(); ++j) {
        bits[static_cast<size_t>(j)] =
            probs.data[static_cast<size_t>(i) * fingerprint.n() + j] >= 0.5f ? 1 : 0;
      }
      auto m = verify_match(Fingerprint(bits), fingerprint, threshold);
      accs.push_back(m.accuracy);
      pvals.push_back(m.p_value);
    }
  }
  TransferReport r = accumulate_report(accs, pvals, fingerprint.n(), threshold);
  r.decoder_free_training = gan.decoder_free;
  return r;
}

namespace {
constexpr char kJointDecMagic[8] = {'F', 'P', 'J', 'D', '0', '0', '0', '1'};
}

void save_joint_decoder(const std::string& path, StegaDecoder& decoder,
                        const CodecConfig& decoder_cfg) {
  std::vector<Param*> ps;
  decoder.collect_params(ps);
  auto blob = nn::serialize_params(ps);
  std::string cfg = decoder_cfg.to_json();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("joint decoder save: cannot write " + path);
  f.write(kJointDecMagic, sizeof(kJointDecMagic));
  uint64_t cfg_len = cfg.size(), blob_len = blob.size();
  f.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  f.write(reinterpret_cast<const char*>(&blob_len), sizeof(blob_len));
  f.write(reinterpret_cast<const char*>(blob.data()),
          static_cast<std::streamsize>(blob.size()));
}

std::pair<std::unique_ptr<StegaDecoder>, CodecConfig> load_joint_decoder(
    const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("joint decoder load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kJointDecMagic, sizeof(magic)) != 0) {
    throw CorruptCheckpoint("joint decoder load: bad magic in " + path);
  }
  uint64_t cfg_len = 0;
  f.read(reinterpret_cast<char*>(&cfg_len), sizeof(cfg_len));
  std::string cfg(cfg_len, '\0');
  f.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
  uint64_t blob_len = 0;
  f.read(reinterpret_cast<char*>(&blob_len), sizeof(blob_len));
  std::vector<uint8_t> blob(blob_len);
  f.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_len));
  if (!f) throw CorruptCheckpoint("joint decoder load: truncated file");
  CodecConfig dc = CodecConfig::from_json(cfg);
  RandomStream rng(dc.seed);
  auto dec = std::make_unique<StegaDecoder>(dc, rng);
  std::vector<Param*> ps;
  dec->collect_params(ps);
  nn::deserialize_params(blob, ps);
  return {std::move(dec), dc};
}

// ---- quality proxy ----------------------------------------------------------

double nearest_train_psnr(const Tensor& samples, const ImageDataset& train,
                          int train_subsample, uint64_t seed) {
  const int N = samples.dim(0);
  const int D = static_cast<int>(samples.numel() / N);
  const int M = std::min(train_subsample, train.count());
  RandomStream rng(seed);
  std::vector<int> idx(static_cast<size_t>(train.count()));
  for (int i = 0; i < train.count(); ++i) idx[static_cast<size_t>(i)] = i;
  rng.shuffle(idx);
  idx.resize(static_cast<size_t>(M));
  Tensor ref = train.to_float(idx);

  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> A(samples.ptr(), N, D);
  Eigen::Map<const RowMat> B(ref.ptr(), M, D);
  Eigen::VectorXf a2 = A.rowwise().squaredNorm();
  Eigen::VectorXf b2 = B.rowwise().squaredNorm();
  RowMat cross = A * B.transpose();  // (N,M)
  double psnr_sum = 0;
  for (int i = 0; i < N; ++i) {
    float best = std::numeric_limits<float>::max();
    for (int j = 0; j < M; ++j) {
      float d2 = a2[i] + b2[j] - 2.0f * cross(i, j);
      best = std::min(best, d2);
    }
    double mse = std::max(static_cast<double>(best) / D, 1e-10);
    psnr_sum += -10.0 * std::log10(mse);
  }
  return psnr_sum / N;
}

// ---- detection / attribution ---------------------------------------------------

std::string DetectionReport::to_json() const {
  json j = {{"num_real", num_real},
            {"num_fake", num_fake},
            {"true_positive", true_positive},
            {"true_negative", true_negative},
            {"false_positive", false_positive},
            {"false_negative", false_negative},
            {"accuracy", accuracy},
            {"threshold", threshold}};
  return j.dump(2);
}

DetectionReport detection_experiment(const Tensor& real_images,
                                     const std::vector<Tensor>& fake_image_sets,
                                     CodecCheckpoint& codec, const Registry& registry,
                                     double threshold) {
  DetectionReport rep;
  rep.threshold = threshold;
  auto is_fake = [&](const DecodedFingerprint& d) {
    return registry.attribute(d, threshold).has_value();
  };
  auto real_decs = decode(codec, real_images);
  rep.num_real = static_cast<int>(real_decs.size());
  for (const auto& d : real_decs) {
    if (is_fake(d)) {
      ++rep.false_positive;
    } else {
      ++rep.true_negative;
    }
  }
  for (const auto& set : fake_image_sets) {
    auto decs = decode(codec, set);
    rep.num_fake += static_cast<int>(decs.size());
    for (const auto& d : decs) {
      if (is_fake(d)) {
        ++rep.true_positive;
      } else {
        ++rep.false_negative;
      }
    }
  }
  int total = rep.num_real + rep.num_fake;
  rep.accuracy = total ? static_cast<double>(rep.true_positive + rep.true_negative) / total : 1.0;
  return rep;
}

std::string AttributionReport::to_json() const {
  json conf;
  for (const auto& [truth, row] : confusion) {
    json r;
    for (const auto& [pred, count] : row) r[pred] = count;
    conf[truth] = std::move(r);
  }
  json j = {{"confusion", std::move(conf)},
            {"accuracy", accuracy},
            {"unknown_rate_for_unregistered", unknown_rate_for_unregistered},
            {"threshold", threshold}};
  return j.dump(2);
}

AttributionReport attribution_experiment(
    const std::vector<std::pair<std::string, Tensor>>& labeled_image_sets,
    CodecCheckpoint& codec, const Registry& registry, double threshold) {
  AttributionReport rep;
  rep.threshold = threshold;
  int64_t correct = 0, total = 0;
  int64_t unreg_total = 0, unreg_unknown = 0;
  for (const auto& [truth, images] : labeled_image_sets) {
    bool truth_registered = registry.find(truth).has_value();
    auto decs = decode(codec, images);
    for (const auto& d : decs) {
      auto hit = registry.attribute(d, threshold);
      std::string pred = hit ? hit->model_id : "unknown";
      rep.confusion[truth][pred] += 1;
      std::string expected = truth_registered ? truth : "unknown";
      if (pred == expected) ++correct;
      ++total;
      if (!truth_registered) {
        ++unreg_total;
        if (pred == "unknown") ++unreg_unknown;
      }
    }
  }
  rep.accuracy = total ? static_cast<double>(correct) / total : 1.0;
  rep.unknown_rate_for_unregistered =
      unreg_total ? static_cast<double>(unreg_unknown) / unreg_total : 1.0;
  return rep;
}

}  // namespace fpforge
