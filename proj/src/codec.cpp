#include "fpforge/codec.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "fpforge/sha256.hpp"

namespace fpforge {

using json = nlohmann::json;
using nn::Param;


namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int enc_stages(int resolution) {
  // Downsample to an 8x8 bottom: 32 -> 2 stages, 64 -> 3, 128 -> 4, ...
  int s = 0;
  for (int r = resolution; r > 8; r /= 2) ++s;
  return s;
}

int dec_stages(int resolution) {
  // Stride-2 convs down to a 4x4 head.
  int s = 0;
  for (int r = resolution; r > 4; r /= 2) ++s;
  return s;
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

}  // namespace

void CodecConfig::validate() const {
  if (!is_pow2(resolution) || resolution < 32) {
    throw std::invalid_argument("codec: resolution must be a power of two >= 32");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("codec: channels must be 1 or 3");
  }
  if (fingerprint_len < 1) throw std::invalid_argument("codec: fingerprint_len must be >= 1");
  if (lambda_max < 0) throw std::invalid_argument("codec: lambda_max must be >= 0");
  if (accuracy_gate <= 0 || accuracy_gate >= 1) {
    throw std::invalid_argument("codec: accuracy_gate must lie in (0,1)");
  }
  if (epochs < 1 || batch_size < 1 || lambda_ramp_iters < 1) {
    throw std::invalid_argument("codec: epochs, batch_size, lambda_ramp_iters must be >= 1");
  }
  if (learning_rate <= 0) throw std::invalid_argument("codec: learning_rate must be > 0");
}

std::string CodecConfig::to_json() const {
  json j = {{"resolution", resolution},
            {"channels", channels},
            {"fingerprint_len", fingerprint_len},
            {"lambda_max", lambda_max},
            {"lambda_ramp_iters", lambda_ramp_iters},
            {"accuracy_gate", accuracy_gate},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"seed", seed},
            {"enc_base_channels", enc_base_channels},
            {"dec_base_channels", dec_base_channels},
            {"holdout_size", holdout_size},
            {"gate_check_every", gate_check_every}};
  return j.dump();
}

CodecConfig CodecConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  CodecConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", c.channels);
  c.fingerprint_len = j.value("fingerprint_len", c.fingerprint_len);
  c.lambda_max = j.value("lambda_max", c.lambda_max);
  c.lambda_ramp_iters = j.value("lambda_ramp_iters", c.lambda_ramp_iters);
  c.accuracy_gate = j.value("accuracy_gate", c.accuracy_gate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.enc_base_channels = j.value("enc_base_channels", c.enc_base_channels);
  c.dec_base_channels = j.value("dec_base_channels", c.dec_base_channels);
  c.holdout_size = j.value("holdout_size", c.holdout_size);
  c.gate_check_every = j.value("gate_check_every", c.gate_check_every);
  return c;
}

// ---- StegaEncoder -----------------------------------------------------------

template <typename S>
StegaEncoderT<S>::StegaEncoderT(const CodecConfig& cfg, RandomStream& rng)
    : stages_(enc_stages(cfg.resolution)),
      channels_(cfg.channels),
      resolution_(cfg.resolution) {
  const int b = cfg.enc_base_channels;
  const int in_ch = cfg.channels + 1;
  fp_fc_ = std::make_unique<nn::LinearT<S>>("enc.fp_fc", cfg.fingerprint_len,
                                            cfg.resolution * cfg.resolution, rng);
  level_ch_.resize(static_cast<size_t>(stages_) + 1);
  for (int s = 0; s <= stages_; ++s) level_ch_[static_cast<size_t>(s)] = std::min(b << s, 128);

  enc_convs_.push_back(
      std::make_unique<nn::Conv2dT<S>>("enc.conv0", in_ch, level_ch_[0], 3, 1, 1, rng));
  enc_relus_.push_back(std::make_unique<nn::ReLUT<S>>());
  for (int s = 1; s <= stages_; ++s) {
    enc_convs_.push_back(std::make_unique<nn::Conv2dT<S>>(
        "enc.down" + std::to_string(s), level_ch_[static_cast<size_t>(s - 1)],
        level_ch_[static_cast<size_t>(s)], 3, 2, 1, rng));
    enc_relus_.push_back(std::make_unique<nn::ReLUT<S>>());
  }
  for (int s = stages_ - 1; s >= 0; --s) {
    ups_.push_back(std::make_unique<nn::Upsample2xT<S>>());
    int in_merged = level_ch_[static_cast<size_t>(s + 1)] + level_ch_[static_cast<size_t>(s)];
    up_convs_.push_back(std::make_unique<nn::Conv2dT<S>>(
        "enc.up" + std::to_string(s), in_merged, level_ch_[static_cast<size_t>(s)], 3, 1, 1,
        rng));
    up_relus_.push_back(std::make_unique<nn::ReLUT<S>>());
  }
  out_conv_ = std::make_unique<nn::Conv2dT<S>>("enc.out", level_ch_[0] + in_ch, cfg.channels,
                                               3, 1, 1, rng);
}

template <typename S>
TensorT<S> StegaEncoderT<S>::forward(const TensorT<S>& images, const TensorT<S>& bits) {
  if (images.ndim() != 4 || images.dim(1) != channels_ || images.dim(2) != resolution_ ||
      images.dim(3) != resolution_) {
    throw std::invalid_argument("encoder: bad image batch shape " + images.shape_str());
  }
  if (bits.ndim() != 2 || bits.dim(0) != images.dim(0)) {
    throw std::invalid_argument("encoder: bits batch mismatch");
  }
  const int N = images.dim(0);
  TensorT<S> fpmap = fp_fc_->forward(bits, true);
  fpmap.reshape({N, 1, resolution_, resolution_});
  TensorT<S> x_in = nn::concat_channels(images, fpmap);

  acts_.assign(static_cast<size_t>(stages_) + 2, TensorT<S>{});
  // acts_[0..stages_] are the post-ReLU encoder levels; acts_[stages_+1] holds x_in.
  acts_[static_cast<size_t>(stages_) + 1] = x_in;

  TensorT<S> cur = enc_relus_[0]->forward(enc_convs_[0]->forward(x_in, true), true);
  acts_[0] = cur;
  for (int s = 1; s <= stages_; ++s) {
    cur = enc_relus_[static_cast<size_t>(s)]->forward(
        enc_convs_[static_cast<size_t>(s)]->forward(cur, true), true);
    acts_[static_cast<size_t>(s)] = cur;
  }
  for (int i = 0; i < stages_; ++i) {
    int s = stages_ - 1 - i;  // skip level
    TensorT<S> u = ups_[static_cast<size_t>(i)]->forward(cur, true);
    TensorT<S> m = nn::concat_channels(u, acts_[static_cast<size_t>(s)]);
    cur = up_relus_[static_cast<size_t>(i)]->forward(
        up_convs_[static_cast<size_t>(i)]->forward(m, true), true);
  }
  TensorT<S> final_in = nn::concat_channels(cur, x_in);
  TensorT<S> residual = out_conv_->forward(final_in, true);
  TensorT<S> stego = images;
  for (size_t i = 0; i < stego.data.size(); ++i) stego.data[i] += residual.data[i];
  return stego;
}

template <typename S>
void StegaEncoderT<S>::backward(const TensorT<S>& grad_stego) {
  const int N = grad_stego.dim(0);
  auto add_to = [](TensorT<S>& acc, const TensorT<S>& g) {
    if (acc.numel() == 0) {
      acc = g;
    } else {
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
    }
  };
  // stego = images + residual, so the residual gradient is grad_stego.
  TensorT<S> g_final = out_conv_->backward(grad_stego);
  TensorT<S> g_cur, g_xin;
  nn::split_channels(g_final, level_ch_[0], g_cur, g_xin);

  std::vector<TensorT<S>> g_acts(static_cast<size_t>(stages_) + 1);
  for (int i = stages_ - 1; i >= 0; --i) {
    int s = stages_ - 1 - i;  // skip level for up step i
    TensorT<S> g = up_relus_[static_cast<size_t>(i)]->backward(g_cur);
    TensorT<S> g_m = up_convs_[static_cast<size_t>(i)]->backward(g);
    TensorT<S> g_u, g_skip;
    nn::split_channels(g_m, level_ch_[static_cast<size_t>(s + 1)], g_u, g_skip);
    add_to(g_acts[static_cast<size_t>(s)], g_skip);
    g_cur = ups_[static_cast<size_t>(i)]->backward(g_u);
  }
  // g_cur is now the gradient on acts_[stages_].
  add_to(g_acts[static_cast<size_t>(stages_)], g_cur);
  for (int s = stages_; s >= 1; --s) {
    TensorT<S> g = enc_relus_[static_cast<size_t>(s)]->backward(g_acts[static_cast<size_t>(s)]);
    TensorT<S> g_prev = enc_convs_[static_cast<size_t>(s)]->backward(g);
    add_to(g_acts[static_cast<size_t>(s - 1)], g_prev);
  }
  TensorT<S> g0 = enc_relus_[0]->backward(g_acts[0]);
  add_to(g_xin, enc_convs_[0]->backward(g0));

  TensorT<S> g_img, g_fpmap;
  nn::split_channels(g_xin, channels_, g_img, g_fpmap);
  g_fpmap.reshape({N, resolution_ * resolution_});
  fp_fc_->backward(g_fpmap);
}

template <typename S>
void StegaEncoderT<S>::collect_params(std::vector<nn::ParamT<S>*>& out) {
  fp_fc_->collect_params(out);
  for (auto& c : enc_convs_) c->collect_params(out);
  for (auto& c : up_convs_) c->collect_params(out);
  out_conv_->collect_params(out);
}

template <typename S>
void StegaEncoderT<S>::zero_grad() {
  std::vector<nn::ParamT<S>*> ps;
  collect_params(ps);
  for (auto* p : ps) p->grad.fill(S(0));
}

// ---- StegaDecoder ------------------------------------------------------------

template <typename S>
StegaDecoderT<S>::StegaDecoderT(const CodecConfig& cfg, RandomStream& rng) {
  const int stages = dec_stages(cfg.resolution);
  int ch_in = cfg.channels;
  for (int s = 0; s < stages; ++s) {
    int ch_out = std::min(cfg.dec_base_channels << s, 128);
    net_.add(std::make_unique<nn::Conv2dT<S>>("dec.conv" + std::to_string(s), ch_in, ch_out,
                                              3, 2, 1, rng));
    net_.add(std::make_unique<nn::ReLUT<S>>());
    ch_in = ch_out;
  }
  net_.add(std::make_unique<nn::FlattenT<S>>());
  net_.add(std::make_unique<nn::LinearT<S>>("dec.fc0", ch_in * 4 * 4, 512, rng));
  net_.add(std::make_unique<nn::ReLUT<S>>());
  net_.add(std::make_unique<nn::LinearT<S>>("dec.fc1", 512, cfg.fingerprint_len, rng));
  net_.add(std::make_unique<nn::SigmoidT<S>>());
}

template <typename S>
TensorT<S> StegaDecoderT<S>::forward(const TensorT<S>& images) {
  return net_.forward(images, true);
}

template <typename S>
TensorT<S> StegaDecoderT<S>::backward(const TensorT<S>& grad_probs) {
  return net_.backward(grad_probs);
}

template <typename S>
void StegaDecoderT<S>::collect_params(std::vector<nn::ParamT<S>*>& out) {
  net_.collect_params(out);
}

template <typename S>
void StegaDecoderT<S>::zero_grad() {
  net_.zero_grad();
}

template class StegaEncoderT<float>;
template class StegaEncoderT<double>;
template class StegaDecoderT<float>;
template class StegaDecoderT<double>;

// ---- CodecCheckpoint -----------------------------------------------------------

CodecCheckpoint::CodecCheckpoint(const CodecConfig& cfg) : config_(cfg) {
  config_.validate();
  RandomStream rng(cfg.seed);
  encoder_ = std::make_unique<StegaEncoder>(config_, rng);
  decoder_ = std::make_unique<StegaDecoder>(config_, rng);
}

std::vector<Param*> CodecCheckpoint::all_params() {
  std::vector<Param*> ps;
  encoder_->collect_params(ps);
  decoder_->collect_params(ps);
  return ps;
}

std::vector<const Param*> CodecCheckpoint::all_params() const {
  std::vector<Param*> ps;
  const_cast<CodecCheckpoint*>(this)->encoder_->collect_params(ps);
  const_cast<CodecCheckpoint*>(this)->decoder_->collect_params(ps);
  return {ps.begin(), ps.end()};
}

std::string CodecCheckpoint::codec_id() const {
  auto params = const_cast<CodecCheckpoint*>(this)->all_params();
  auto blob = nn::serialize_params(params);
  std::string cfg = config_.to_json();
  std::vector<uint8_t> buf(cfg.begin(), cfg.end());
  buf.insert(buf.end(), blob.begin(), blob.end());
  return sha256_hex(buf);
}

namespace {
constexpr char kCodecMagic[8] = {'F', 'P', 'C', 'K', '0', '0', '0', '1'};
}

void CodecCheckpoint::save(const std::string& path) const {
  auto params = const_cast<CodecCheckpoint*>(this)->all_params();
  auto blob = nn::serialize_params(params);
  std::string cfg = config_.to_json();
  std::string id = codec_id();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("codec save: cannot write " + path);
  f.write(kCodecMagic, sizeof(kCodecMagic));
  uint64_t cfg_len = cfg.size(), blob_len = blob.size();
  f.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  f.write(reinterpret_cast<const char*>(&blob_len), sizeof(blob_len));
  f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  f.write(id.data(), static_cast<std::streamsize>(id.size()));
  if (!f) throw IoError("codec save: short write to " + path);
}

CodecCheckpoint CodecCheckpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("codec load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCodecMagic, sizeof(magic)) != 0) {
    throw CorruptCheckpoint("codec load: bad magic in " + path);
  }
  uint64_t cfg_len = 0;
  f.read(reinterpret_cast<char*>(&cfg_len), sizeof(cfg_len));
  if (!f || cfg_len > (1u << 20)) throw CorruptCheckpoint("codec load: bad config length");
  std::string cfg(cfg_len, '\0');
  f.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
  uint64_t blob_len = 0;
  f.read(reinterpret_cast<char*>(&blob_len), sizeof(blob_len));
  if (!f || blob_len > (1ull << 32)) throw CorruptCheckpoint("codec load: bad blob length");
  std::vector<uint8_t> blob(blob_len);
  f.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_len));
  std::string stored_id(64, '\0');
  f.read(stored_id.data(), 64);
  if (!f) throw CorruptCheckpoint("codec load: truncated file " + path);

  CodecCheckpoint ckpt(CodecConfig::from_json(cfg));
  auto params = ckpt.all_params();
  nn::deserialize_params(blob, params);
  if (ckpt.codec_id() != stored_id) {
    throw CorruptCheckpoint("codec load: content hash mismatch in " + path);
  }
  return ckpt;
}

// ---- build / train ---------------------------------------------------------------

CodecCheckpoint build_codec(const CodecConfig& config) { return CodecCheckpoint(config); }

Tensor fingerprint_to_tensor(const Fingerprint& fp, int rows) {
  Tensor t({rows, fp.n()});
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < fp.n(); ++i) {
      t.data[static_cast<size_t>(r) * fp.n() + i] = static_cast<float>(fp.bit(i));
    }
  }
  return t;
}

namespace {

double hard_bit_accuracy(const Tensor& probs, const Tensor& targets) {
  int64_t hits = 0;
  for (size_t i = 0; i < probs.data.size(); ++i) {
    int b = probs.data[i] >= 0.5f ? 1 : 0;
    int t = targets.data[i] >= 0.5f ? 1 : 0;
    hits += b == t ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.numel());
}

Tensor random_bits(int rows, int n, RandomStream& rng) {
  Tensor t({rows, n});
  for (auto& v : t.data) v = static_cast<float>(rng.bit());
  return t;
}

}  // namespace

std::pair<CodecCheckpoint, TrainLog> train_codec(const ImageDataset& dataset,
                                                 const CodecConfig& config,
                                                 std::ostream* progress) {
  config.validate();
  if (dataset.resolution != config.resolution || dataset.channels != config.channels) {
    throw std::invalid_argument("train_codec: dataset geometry does not match config");
  }
  if (dataset.count() < config.batch_size + config.holdout_size) {
    throw std::invalid_argument("train_codec: dataset too small for one batch plus holdout");
  }
  const auto t_start = std::chrono::steady_clock::now();

  CodecCheckpoint ckpt(config);
  auto params = ckpt.all_params();
  nn::Adam opt(config.learning_rate);
  opt.attach(params);

  RandomStream rng(config.seed);
  RandomStream rng_fp = rng.fork(1);
  RandomStream rng_holdout = rng.fork(2);

  std::vector<int> order(static_cast<size_t>(dataset.count()));
  for (int i = 0; i < dataset.count(); ++i) order[static_cast<size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<int> holdout_idx(order.begin(), order.begin() + config.holdout_size);
  std::vector<int> train_idx(order.begin() + config.holdout_size, order.end());

  // Fixed held-out batch with fixed fingerprints, re-evaluated on a cadence.
  Tensor holdout_imgs = dataset.to_float(holdout_idx);
  Tensor holdout_bits = random_bits(config.holdout_size, config.fingerprint_len, rng_holdout);

  auto eval_holdout = [&]() {
    double acc_sum = 0;
    int chunks = 0;
    for (int off = 0; off < config.holdout_size; off += config.batch_size) {
      int nb = std::min(config.batch_size, config.holdout_size - off);
      Tensor imgs({nb, config.channels, config.resolution, config.resolution});
      std::copy(holdout_imgs.ptr() + static_cast<ptrdiff_t>(off) * imgs.numel() / nb,
                holdout_imgs.ptr() + static_cast<ptrdiff_t>(off + nb) * (imgs.numel() / nb),
                imgs.ptr());
      Tensor bits({nb, config.fingerprint_len});
      std::copy(holdout_bits.ptr() + static_cast<ptrdiff_t>(off) * config.fingerprint_len,
                holdout_bits.ptr() + static_cast<ptrdiff_t>(off + nb) * config.fingerprint_len,
                bits.ptr());
      Tensor stego = ckpt.encoder().forward(imgs, bits);
      Tensor probs = ckpt.decoder().forward(stego);
      acc_sum += hard_bit_accuracy(probs, bits);
      ++chunks;
    }
    return acc_sum / chunks;
  };

  TrainLog log;
  const int iters_per_epoch = static_cast<int>(train_idx.size()) / config.batch_size;
  if (iters_per_epoch < 1) throw std::invalid_argument("train_codec: dataset smaller than a batch");
  bool gated = false;
  int64_t gate_iter = -1;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    RandomStream rng_epoch = rng.fork(100 + static_cast<uint64_t>(epoch));
    rng_epoch.shuffle(train_idx);
    for (int it = 0; it < iters_per_epoch; ++it) {
      const int64_t global_iter = static_cast<int64_t>(epoch) * iters_per_epoch + it;
      if (!gated && global_iter % config.gate_check_every == 0) {
        double acc = eval_holdout();
        if (acc >= config.accuracy_gate) {
          gated = true;
          gate_iter = global_iter;
          log.gate_reached_iter = gate_iter;
          log.gate_reached_epoch = epoch;
          if (progress) {
            *progress << "[codec] accuracy gate " << config.accuracy_gate << " reached at iter "
                      << gate_iter << " (epoch " << epoch << ")\n";
          }
        }
      }
      double lambda = 0.0;
      if (gated) {
        lambda = config.lambda_max *
                 std::min(1.0, static_cast<double>(global_iter - gate_iter) /
                                   config.lambda_ramp_iters);
      }

      std::vector<int> batch(train_idx.begin() + static_cast<ptrdiff_t>(it) * config.batch_size,
                             train_idx.begin() +
                                 static_cast<ptrdiff_t>(it + 1) * config.batch_size);
      Tensor imgs = dataset.to_float(batch);
      Tensor bits = random_bits(config.batch_size, config.fingerprint_len, rng_fp);

      Tensor stego = ckpt.encoder().forward(imgs, bits);
      Tensor probs = ckpt.decoder().forward(stego);

      Tensor g_probs, g_stego_mse;
      double bce = nn::bce_loss<float>(probs, bits, &g_probs);
      double mse = nn::mse_loss<float>(stego, imgs, &g_stego_mse);

      ckpt.encoder().zero_grad();
      ckpt.decoder().zero_grad();
      Tensor g_stego = ckpt.decoder().backward(g_probs);
      if (lambda > 0) {
        for (size_t i = 0; i < g_stego.data.size(); ++i) {
          g_stego.data[i] += static_cast<float>(lambda) * g_stego_mse.data[i];
        }
      }
      ckpt.encoder().backward(g_stego);
      opt.step();

      log.iterations.push_back({bce, mse, lambda, hard_bit_accuracy(probs, bits)});
      if (std::isnan(bce) || std::isnan(mse)) {
        throw std::runtime_error("train_codec: loss diverged to NaN at iter " +
                                 std::to_string(global_iter));
      }
    }
    double e_acc = eval_holdout();
    log.epoch_holdout_acc.push_back(e_acc);
    if (progress) {
      const auto& last = log.iterations.back();
      *progress << "[codec] epoch " << epoch << " holdout_acc=" << e_acc
                << " bce=" << last.bce << " mse=" << last.mse << " lambda=" << last.lambda
                << "\n";
      progress->flush();
    }
  }
  if (!gated) {
    log.gate_warning = true;
    if (progress) {
      *progress << "[codec] WARNING: accuracy gate never reached; lambda stayed 0\n";
    }
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(ckpt), std::move(log)};
}

Tensor embed(CodecCheckpoint& ckpt, const Tensor& images, const Fingerprint& fingerprint) {
  std::lock_guard<std::mutex> lock(ckpt.eval_mutex());
  const auto& cfg = ckpt.config();
  if (fingerprint.n() != cfg.fingerprint_len) {
    throw std::invalid_argument("embed: fingerprint length mismatch");
  }
  if (images.ndim() != 4 || images.dim(1) != cfg.channels || images.dim(2) != cfg.resolution ||
      images.dim(3) != cfg.resolution) {
    throw std::invalid_argument("embed: image batch shape mismatch " + images.shape_str());
  }
  Tensor out({images.dim(0), cfg.channels, cfg.resolution, cfg.resolution});
  const int chunk = 64;
  for (int off = 0; off < images.dim(0); off += chunk) {
    int nb = std::min(chunk, images.dim(0) - off);
    Tensor sub({nb, cfg.channels, cfg.resolution, cfg.resolution});
    size_t per = sub.data.size() / static_cast<size_t>(nb);
    std::copy(images.ptr() + static_cast<size_t>(off) * per,
              images.ptr() + static_cast<size_t>(off + nb) * per, sub.ptr());
    Tensor bits = fingerprint_to_tensor(fingerprint, nb);
    Tensor stego = ckpt.encoder().forward(sub, bits);
    for (auto& v : stego.data) v = std::clamp(v, 0.0f, 1.0f);
    std::copy(stego.ptr(), stego.ptr() + stego.data.size(),
              out.ptr() + static_cast<size_t>(off) * per);
  }
  return out;
}

std::vector<DecodedFingerprint> decode(CodecCheckpoint& ckpt, const Tensor& images) {
  std::lock_guard<std::mutex> lock(ckpt.eval_mutex());
  const auto& cfg = ckpt.config();
  if (images.ndim() != 4 || images.dim(1) != cfg.channels || images.dim(2) != cfg.resolution ||
      images.dim(3) != cfg.resolution) {
    throw std::invalid_argument("decode: image batch shape mismatch " + images.shape_str());
  }
  std::vector<DecodedFingerprint> out;
  out.reserve(static_cast<size_t>(images.dim(0)));
  const int chunk = 64;
  for (int off = 0; off < images.dim(0); off += chunk) {
    int nb = std::min(chunk, images.dim(0) - off);
    Tensor sub({nb, cfg.channels, cfg.resolution, cfg.resolution});
    size_t per = sub.data.size() / static_cast<size_t>(nb);
    std::copy(images.ptr() + static_cast<size_t>(off) * per,
              images.ptr() + static_cast<size_t>(off + nb) * per, sub.ptr());
    Tensor probs = ckpt.decoder().forward(sub);
    for (int i = 0; i < nb; ++i) {
      std::vector<double> p(static_cast<size_t>(cfg.fingerprint_len));
      for (int j = 0; j < cfg.fingerprint_len; ++j) {
        p[static_cast<size_t>(j)] =
            std::clamp<double>(probs.data[static_cast<size_t>(i) * cfg.fingerprint_len + j], 0.0, 1.0);
      }
      out.push_back(DecodedFingerprint::from_probs(std::move(p)));
    }
  }
  return out;
}

double bce_fingerprint_loss(const std::vector<double>& probs, const Fingerprint& target) {
  if (static_cast<int>(probs.size()) != target.n()) {
    throw std::invalid_argument("bce_fingerprint_loss: length mismatch");
  }
  Tensor p({1, target.n()});
  for (int i = 0; i < target.n(); ++i) p.data[static_cast<size_t>(i)] = static_cast<float>(probs[static_cast<size_t>(i)]);
  Tensor t = fingerprint_to_tensor(target, 1);
  return nn::bce_loss<float>(p, t, nullptr);
}

double image_mse_loss(const Tensor& stego, const Tensor& cover) {
  return nn::mse_loss<float>(stego, cover, nullptr);
}

std::string TrainLog::to_json() const {
  json j;
  j["gate_reached_iter"] = gate_reached_iter;
  j["gate_reached_epoch"] = gate_reached_epoch;
  j["gate_warning"] = gate_warning;
  j["wall_seconds"] = wall_seconds;
  j["epoch_holdout_acc"] = epoch_holdout_acc;
  json iters = json::array();
  for (const auto& e : iterations) {
    iters.push_back({{"bce", e.bce}, {"mse", e.mse}, {"lambda", e.lambda}, {"acc", e.train_acc}});
  }
  j["iterations"] = std::move(iters);
  return j.dump();
}

}  // namespace fpforge
