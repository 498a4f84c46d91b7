#include "fpforge/gan.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fpforge/sha256.hpp"

namespace fpforge {

using json = nlohmann::json;
using nn::Param;

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int gan_stages(int resolution) {
  int s = 0;
  for (int r = resolution; r > 4; r /= 2) ++s;
  return s;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (!is_pow2(resolution) || resolution < 16) {
    throw std::invalid_argument("gan: resolution must be a power of two >= 16");
  }
  if (channels != 1 && channels != 3) throw std::invalid_argument("gan: channels must be 1 or 3");
  if (latent_dim < 1 || iterations < 1 || batch_size < 2) {
    throw std::invalid_argument("gan: latent_dim, iterations >= 1 and batch_size >= 2");
  }
  if (loss != "non-saturating") {
    throw std::invalid_argument("gan: unsupported loss variant '" + loss + "'");
  }
}

std::string GeneratorConfig::to_json() const {
  json j = {{"latent_dim", latent_dim},
            {"resolution", resolution},
            {"channels", channels},
            {"iterations", iterations},
            {"batch_size", batch_size},
            {"lr_g", lr_g},
            {"lr_d", lr_d},
            {"adam_beta1", adam_beta1},
            {"seed", seed},
            {"loss", loss},
            {"g_base_channels", g_base_channels},
            {"d_base_channels", d_base_channels},
            {"log_every", log_every},
            {"checkpoint_every", checkpoint_every}};
  return j.dump();
}

GeneratorConfig GeneratorConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  GeneratorConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", c.channels);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.seed = j.value("seed", c.seed);
  c.loss = j.value("loss", c.loss);
  c.g_base_channels = j.value("g_base_channels", c.g_base_channels);
  c.d_base_channels = j.value("d_base_channels", c.d_base_channels);
  c.log_every = j.value("log_every", c.log_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  return c;
}

// ---- Generator ----------------------------------------------------------------

Generator::Generator(const GeneratorConfig& cfg, RandomStream& rng) {
  const int stages = gan_stages(cfg.resolution);
  std::vector<int> ch(static_cast<size_t>(stages) + 1);
  for (int i = 0; i <= stages; ++i) {
    ch[static_cast<size_t>(i)] = std::min(cfg.g_base_channels << (stages - i), 256);
  }
  root_ch_ = ch[0];
  fc_ = std::make_unique<nn::Linear>("g.fc", cfg.latent_dim, root_ch_ * 4 * 4, rng);
  body_.add(std::make_unique<nn::BatchNorm2d>("g.bn0", root_ch_));
  body_.add(std::make_unique<nn::ReLU>());
  for (int i = 0; i < stages; ++i) {
    body_.add(std::make_unique<nn::Upsample2x>());
    body_.add(std::make_unique<nn::Conv2d>("g.conv" + std::to_string(i),
                                           ch[static_cast<size_t>(i)],
                                           ch[static_cast<size_t>(i + 1)], 3, 1, 1, rng));
    body_.add(std::make_unique<nn::BatchNorm2d>("g.bn" + std::to_string(i + 1),
                                                ch[static_cast<size_t>(i + 1)]));
    body_.add(std::make_unique<nn::ReLU>());
  }
  body_.add(std::make_unique<nn::Conv2d>("g.out", ch[static_cast<size_t>(stages)],
                                         cfg.channels, 3, 1, 1, rng));
  body_.add(std::make_unique<nn::Tanh>());
}

Tensor Generator::forward(const Tensor& z, bool training) {
  Tensor h = fc_->forward(z, training);
  h.reshape({z.dim(0), root_ch_, 4, 4});
  return body_.forward(h, training);
}

Tensor Generator::backward(const Tensor& grad_out) {
  Tensor gh = body_.backward(grad_out);
  gh.reshape({gh.dim(0), root_ch_ * 4 * 4});
  return fc_->backward(gh);
}

void Generator::collect_params(std::vector<Param*>& out) {
  fc_->collect_params(out);
  body_.collect_params(out);
}

void Generator::collect_buffers(std::vector<Param*>& out) { body_.collect_buffers(out); }

void Generator::zero_grad() {
  std::vector<Param*> ps;
  collect_params(ps);
  for (auto* p : ps) p->grad.fill(0.f);
}

// ---- Discriminator ---------------------------------------------------------------

Discriminator::Discriminator(const GeneratorConfig& cfg, RandomStream& rng) {
  const int stages = gan_stages(cfg.resolution);
  int ch_in = cfg.channels;
  for (int s = 0; s < stages; ++s) {
    int ch_out = std::min(cfg.d_base_channels << s, 256);
    net_.add(std::make_unique<nn::Conv2d>("d.conv" + std::to_string(s), ch_in, ch_out, 3, 2,
                                          1, rng));
    if (s > 0) {
      net_.add(std::make_unique<nn::BatchNorm2d>("d.bn" + std::to_string(s), ch_out));
    }
    net_.add(std::make_unique<nn::LeakyReLU>(0.2));
    ch_in = ch_out;
  }
  net_.add(std::make_unique<nn::Flatten>());
  net_.add(std::make_unique<nn::Linear>("d.fc", ch_in * 4 * 4, 1, rng));
}

Tensor Discriminator::forward(const Tensor& images, bool training) {
  return net_.forward(images, training);
}

Tensor Discriminator::backward(const Tensor& grad_out) { return net_.backward(grad_out); }

void Discriminator::collect_params(std::vector<Param*>& out) { net_.collect_params(out); }

void Discriminator::collect_buffers(std::vector<Param*>& out) { net_.collect_buffers(out); }

void Discriminator::zero_grad() { net_.zero_grad(); }

// ---- GanCheckpoint --------------------------------------------------------------

GanCheckpoint::GanCheckpoint(const GeneratorConfig& cfg) : config(cfg) {
  config.validate();
  RandomStream rng(cfg.seed);
  gen_ = std::make_unique<Generator>(config, rng);
  dis_ = std::make_unique<Discriminator>(config, rng);
}

std::vector<Param*> GanCheckpoint::trainable_gen_params() {
  std::vector<Param*> ps;
  gen_->collect_params(ps);
  return ps;
}

std::vector<Param*> GanCheckpoint::all_state() {
  std::vector<Param*> ps;
  gen_->collect_params(ps);
  gen_->collect_buffers(ps);
  dis_->collect_params(ps);
  dis_->collect_buffers(ps);
  return ps;
}

namespace {
constexpr char kGanMagic[8] = {'F', 'P', 'G', 'N', '0', '0', '0', '1'};

std::string gan_meta_json(const GanCheckpoint& c) {
  json j = {{"config", json::parse(c.config.to_json())},
            {"manifest_ref", c.manifest_ref},
            {"model_id", c.model_id},
            {"status", c.status},
            {"iterations_done", c.iterations_done},
            {"decoder_free", c.decoder_free}};
  return j.dump();
}
}  // namespace

std::string GanCheckpoint::content_id() const {
  auto state = const_cast<GanCheckpoint*>(this)->all_state();
  auto blob = nn::serialize_params(state);
  std::string meta = gan_meta_json(*this);
  std::vector<uint8_t> buf(meta.begin(), meta.end());
  buf.insert(buf.end(), blob.begin(), blob.end());
  return sha256_hex(buf);
}

void GanCheckpoint::save(const std::string& path) const {
  auto state = const_cast<GanCheckpoint*>(this)->all_state();
  auto blob = nn::serialize_params(state);
  std::string meta = gan_meta_json(*this);
  std::string id = content_id();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("gan save: cannot write " + path);
  f.write(kGanMagic, sizeof(kGanMagic));
  uint64_t meta_len = meta.size(), blob_len = blob.size();
  f.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  f.write(reinterpret_cast<const char*>(&blob_len), sizeof(blob_len));
  f.write(reinterpret_cast<const char*>(blob.data()),
          static_cast<std::streamsize>(blob.size()));
  f.write(id.data(), static_cast<std::streamsize>(id.size()));
  if (!f) throw IoError("gan save: short write to " + path);
}

GanCheckpoint GanCheckpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("gan load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kGanMagic, sizeof(magic)) != 0) {
    throw CorruptCheckpoint("gan load: bad magic in " + path);
  }
  uint64_t meta_len = 0;
  f.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  if (!f || meta_len > (1u << 20)) throw CorruptCheckpoint("gan load: bad meta length");
  std::string meta(meta_len, '\0');
  f.read(meta.data(), static_cast<std::streamsize>(meta_len));
  uint64_t blob_len = 0;
  f.read(reinterpret_cast<char*>(&blob_len), sizeof(blob_len));
  if (!f || blob_len > (1ull << 32)) throw CorruptCheckpoint("gan load: bad blob length");
  std::vector<uint8_t> blob(blob_len);
  f.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_len));
  std::string stored_id(64, '\0');
  f.read(stored_id.data(), 64);
  if (!f) throw CorruptCheckpoint("gan load: truncated file " + path);

  json j = json::parse(meta);
  GanCheckpoint ckpt(GeneratorConfig::from_json(j.at("config").dump()));
  ckpt.manifest_ref = j.at("manifest_ref").get<std::string>();
  ckpt.model_id = j.at("model_id").get<std::string>();
  ckpt.status = j.at("status").get<std::string>();
  ckpt.iterations_done = j.at("iterations_done").get<int64_t>();
  ckpt.decoder_free = j.at("decoder_free").get<bool>();
  auto state = ckpt.all_state();
  nn::deserialize_params(blob, state);
  if (ckpt.content_id() != stored_id) {
    throw CorruptCheckpoint("gan load: content hash mismatch in " + path);
  }
  return ckpt;
}

GanCheckpoint GanCheckpoint::clone() const {
  GanCheckpoint copy(config);
  copy.manifest_ref = manifest_ref;
  copy.model_id = model_id;
  copy.status = status;
  copy.iterations_done = iterations_done;
  copy.decoder_free = decoder_free;
  auto src = const_cast<GanCheckpoint*>(this)->all_state();
  auto dst = copy.all_state();
  for (size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  return copy;
}

// ---- training -------------------------------------------------------------------

namespace {

Tensor sample_latents(int count, int latent_dim, RandomStream& rng) {
  Tensor z({count, latent_dim});
  for (auto& v : z.data) v = static_cast<float>(rng.normal());
  return z;
}

}  // namespace

GanTrainResult train_generator(const ImageDataset& data, const GeneratorConfig& config,
                               const std::string& manifest_ref, const std::string& model_id,
                               std::ostream* progress, const std::string& checkpoint_dir,
                               const std::function<void(int64_t, GanCheckpoint&)>& periodic_hook) {
  config.validate();
  if (data.resolution != config.resolution || data.channels != config.channels) {
    throw std::invalid_argument("train_generator: dataset geometry mismatch");
  }
  if (data.count() < config.batch_size) {
    throw std::invalid_argument("train_generator: dataset smaller than one batch");
  }
  const auto t_start = std::chrono::steady_clock::now();

  GanTrainResult result{GanCheckpoint(config)};
  GanCheckpoint& ckpt = result.checkpoint;
  ckpt.manifest_ref = manifest_ref;
  ckpt.model_id = model_id;
  ckpt.decoder_free = true;

  std::vector<Param*> g_params, d_params;
  ckpt.gen().collect_params(g_params);
  ckpt.dis().collect_params(d_params);
  nn::Adam opt_g(config.lr_g, config.adam_beta1);
  nn::Adam opt_d(config.lr_d, config.adam_beta1);
  opt_g.attach(g_params);
  opt_d.attach(d_params);

  RandomStream rng(config.seed);
  RandomStream rng_z = rng.fork(10);
  RandomStream rng_order = rng.fork(11);

  std::vector<int> order(static_cast<size_t>(data.count()));
  for (int i = 0; i < data.count(); ++i) order[static_cast<size_t>(i)] = i;
  rng_order.shuffle(order);
  size_t cursor = 0;
  auto next_real_batch = [&]() {
    std::vector<int> idx(static_cast<size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor >= order.size()) {
        rng_order.shuffle(order);
        cursor = 0;
      }
      idx[static_cast<size_t>(i)] = order[cursor++];
    }
    Tensor imgs = data.to_float(idx);
    // Generator emits tanh range; train the discriminator in the same range.
    for (auto& v : imgs.data) v = v * 2.0f - 1.0f;
    return imgs;
  };

  bool aborted = false;
  for (int64_t iter = 0; iter < config.iterations; ++iter) {
    // Discriminator step. Real and fake go through as separate minibatches
    // so batch-norm statistics match what the generator step sees.
    ckpt.gen().zero_grad();
    ckpt.dis().zero_grad();
    Tensor z1 = sample_latents(config.batch_size, config.latent_dim, rng_z);
    Tensor fake = ckpt.gen().forward(z1, true);
    Tensor real = next_real_batch();
    Tensor real_logits = ckpt.dis().forward(real, true);
    Tensor g_real;
    double d_loss = nn::gan_d_real_loss(real_logits, &g_real);
    ckpt.dis().backward(g_real);
    Tensor fake_logits = ckpt.dis().forward(fake, true);
    Tensor g_fake;
    d_loss += nn::gan_d_fake_loss(fake_logits, &g_fake);
    ckpt.dis().backward(g_fake);
    opt_d.step();

    // Generator step on a fresh latent batch.
    ckpt.dis().zero_grad();
    ckpt.gen().zero_grad();
    Tensor z2 = sample_latents(config.batch_size, config.latent_dim, rng_z);
    Tensor fake2 = ckpt.gen().forward(z2, true);
    Tensor flogits = ckpt.dis().forward(fake2, true);
    Tensor g_flogits;
    double g_loss = nn::gan_g_loss(flogits, &g_flogits);
    Tensor grad_fake = ckpt.dis().backward(g_flogits);
    ckpt.gen().backward(grad_fake);
    opt_g.step();

    if (iter == 0) {
      result.first_d_loss = d_loss;
      result.first_g_loss = g_loss;
    }
    if (std::isnan(d_loss) || std::isnan(g_loss)) {
      ckpt.status = "aborted_nan";
      ckpt.iterations_done = iter + 1;
      aborted = true;
      if (progress) *progress << "[gan] diverged (NaN) at iter " << iter << ", aborting\n";
      break;
    }
    if (iter % config.log_every == 0) {
      result.d_losses.push_back(d_loss);
      result.g_losses.push_back(g_loss);
      if (progress) {
        *progress << "[gan " << model_id << "] iter " << iter << " d_loss=" << d_loss
                  << " g_loss=" << g_loss << "\n";
        progress->flush();
      }
    }
    if (config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0) {
      ckpt.iterations_done = iter + 1;
      if (!checkpoint_dir.empty()) {
        std::filesystem::create_directories(checkpoint_dir);
        ckpt.status = "in_progress";
        ckpt.save((std::filesystem::path(checkpoint_dir) / "gan_checkpoint_latest.bin").string());
      }
      if (periodic_hook) periodic_hook(iter + 1, ckpt);
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

Tensor sample(GanCheckpoint& ckpt, int count, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  std::lock_guard<std::mutex> lock(ckpt.eval_mutex());
  const auto& cfg = ckpt.config;
  RandomStream rng(seed);
  Tensor out({count, cfg.channels, cfg.resolution, cfg.resolution});
  const size_t per = static_cast<size_t>(cfg.channels) * cfg.resolution * cfg.resolution;
  const int chunk = 64;
  for (int off = 0; off < count; off += chunk) {
    int nb = std::min(chunk, count - off);
    Tensor z = sample_latents(nb, cfg.latent_dim, rng);
    Tensor imgs = ckpt.gen().forward(z, false);
    for (auto& v : imgs.data) v = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
    std::copy(imgs.data.begin(), imgs.data.end(), out.data.begin() + static_cast<ptrdiff_t>(off) * static_cast<ptrdiff_t>(per));
  }
  return out;
}

}  // namespace fpforge
