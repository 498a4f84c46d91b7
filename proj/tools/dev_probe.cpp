// Temporary development probe: measures codec/GAN training throughput on
// a small synthetic corpus. Not part of the shipped tool set.
#include <chrono>
#include <filesystem>
#include <iostream>

#include "fpforge/codec.hpp"
#include "fpforge/gan.hpp"
#include "fpforge/image_io.hpp"
#include <fstream>

using namespace fpforge;

namespace {

double mean_decode_acc(CodecCheckpoint& codec, const Tensor& images, const Fingerprint& fp) {
  auto decs = decode(codec, images);
  double sum = 0;
  for (const auto& d : decs) sum += bitwise_accuracy(d.bits, fp);
  return sum / static_cast<double>(decs.size());
}

// End-to-end pilot at 32x32: train codec with the default schedule, embed a
// dataset, train a GAN on it, watch decoded accuracy of samples over time.
int run_pilot(int count, int gan_iters) {
  std::string dir = "/tmp/pilot/synth32";
  if (!std::filesystem::exists(dir)) {
    std::cout << "generating " << count << " synthetic 32x32 images...\n";
    generate_synthetic_images(dir, count, 32, 3, 555);
  }
  ImageDataset ds = ingest_folder(dir, 32, 3);
  std::cout << "dataset: " << ds.count() << "\n";

  CodecConfig ccfg;
  ccfg.resolution = 32;
  ccfg.seed = 11;
  CodecCheckpoint codec = [&] {
    std::string path = "/tmp/pilot/codec32.bin";
    if (std::filesystem::exists(path)) {
      std::cout << "loading cached codec\n";
      return CodecCheckpoint::load(path);
    }
    auto [ckpt, log] = train_codec(ds, ccfg, &std::cout);
    ckpt.save(path);
    std::ofstream lf("/tmp/pilot/codec32_log.json");
    lf << log.to_json();
    return std::move(ckpt);
  }();

  // Embed the whole dataset with one fingerprint; quantize like a PNG save.
  Fingerprint fp = sample_fingerprint(100, 99);
  Tensor all = ds.to_float_range(0, ds.count());
  Tensor stego = embed(codec, all, fp);
  stego = quantize8(stego);
  double rt_acc = mean_decode_acc(codec, stego, fp);
  double mse = image_mse_loss(stego, all);
  std::cout << "roundtrip acc (quantized) = " << rt_acc << "  embed PSNR = "
            << -10.0 * std::log10(std::max(mse, 1e-12)) << " dB\n";

  ImageDataset fpds = ds;
  auto u8 = float_to_u8(stego.ptr(), stego.data.size());
  fpds.pixels = std::move(u8);

  GeneratorConfig gcfg;
  gcfg.resolution = 32;
  gcfg.iterations = gan_iters;
  gcfg.batch_size = 32;
  gcfg.seed = 21;
  gcfg.checkpoint_every = 500;
  auto hook = [&](int64_t iter, GanCheckpoint& g) {
    Tensor samples = sample(g, 100, 1234);
    double acc = mean_decode_acc(codec, samples, fp);
    std::cout << "[transfer] iter " << iter << " sample decode acc = " << acc << std::endl;
  };
  auto result = train_generator(fpds, gcfg, "pilot", "pilot", &std::cout, "", hook);
  result.checkpoint.save("/tmp/pilot/gan32.bin");

  Tensor samples = sample(result.checkpoint, 500, 777);
  std::cout << "FINAL transfer acc over 500 samples = "
            << mean_decode_acc(codec, samples, fp) << "\n";
  // Also save a grid of samples for eyeballing.
  for (int i = 0; i < 8; ++i) {
    save_png_float("/tmp/pilot/sample_" + std::to_string(i) + ".png",
                   samples.ptr() + static_cast<size_t>(i) * 3 * 32 * 32, 3, 32);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::string mode = argc > 1 ? argv[1] : "codec";
  int res = argc > 2 ? std::atoi(argv[2]) : 64;
  int iters = argc > 3 ? std::atoi(argv[3]) : 60;
  int count = argc > 4 ? std::atoi(argv[4]) : 800;

  if (mode == "pilot") return run_pilot(res >= 1000 ? res : 10000, iters >= 500 ? iters : 6000);

  std::string dir = "/tmp/probe_synth_" + std::to_string(res);
  if (!std::filesystem::exists(dir)) {
    std::cout << "generating " << count << " synthetic images at " << res << "...\n";
    generate_synthetic_images(dir, count, res, 3, 1234);
  }
  ImageDataset ds = ingest_folder(dir, res, 3);
  std::cout << "dataset: " << ds.count() << " images\n";

  if (mode == "codec") {
    CodecConfig cfg;
    cfg.resolution = res;
    cfg.holdout_size = 128;
    cfg.batch_size = 64;
    cfg.epochs = std::max(1, iters * cfg.batch_size / std::max(1, ds.count() - cfg.holdout_size));
    cfg.gate_check_every = 50;
    cfg.seed = 7;
    auto t0 = std::chrono::steady_clock::now();
    auto [ckpt, log] = train_codec(ds, cfg, &std::cout);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "iters=" << log.iterations.size() << " wall=" << secs << "s  "
              << secs / log.iterations.size() << " s/iter ("
              << secs / log.iterations.size() / cfg.batch_size * 1000 << " ms/img)\n";
    std::cout << "last bce=" << log.iterations.back().bce
              << " acc=" << log.iterations.back().train_acc << "\n";
  } else {
    GeneratorConfig cfg;
    cfg.resolution = res;
    cfg.iterations = iters;
    cfg.batch_size = 32;
    cfg.checkpoint_every = 0;
    cfg.log_every = 20;
    auto t0 = std::chrono::steady_clock::now();
    auto result = train_generator(ds, cfg, "probe", "probe", &std::cout);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "iters=" << iters << " wall=" << secs << "s  " << secs / iters
              << " s/iter\n";
  }
  return 0;
}
