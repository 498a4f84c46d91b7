// Acceptance suite: one pass/fail line per criterion.
//
// Heavy artifacts (trained codecs, fingerprinted datasets, generators) are
// built on demand into a persistent cache directory (FPFORGE_CACHE, default
// ./fpforge_acceptance_cache) and reused on later runs, so the first run
// trains for hours and subsequent runs only evaluate.
//
// Usage: acceptance [criterion numbers...]   (default: all)

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "binomial_oracle.hpp"
#include "fpforge/ats.hpp"
#include "fpforge/codec.hpp"
#include "fpforge/dataset.hpp"
#include "fpforge/gan.hpp"
#include "fpforge/perturb.hpp"
#include "fpforge/registry.hpp"
#include "fpforge/sha256.hpp"
#include "fpforge/transfer.hpp"

using namespace fpforge;
namespace fs = std::filesystem;

namespace {

// ---- harness ---------------------------------------------------------------

int g_pass = 0, g_fail = 0;
std::vector<std::string> g_lines;

void report(int criterion, bool pass, const std::string& detail) {
  std::ostringstream line;
  line << "CRITERION " << criterion << " " << (pass ? "PASS" : "FAIL") << ": " << detail;
  g_lines.push_back(line.str());
  std::cout << line.str() << std::endl;
  (pass ? g_pass : g_fail) += 1;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string cache_root() {
  if (const char* env = std::getenv("FPFORGE_CACHE")) return env;
  return "fpforge_acceptance_cache";
}

fs::path cache_path(const std::string& leaf) { return fs::path(cache_root()) / leaf; }

void log_stage(const std::string& msg) {
  std::cout << "[stage] " << msg << std::endl;
}

// ---- fixed experiment layout -------------------------------------------------

constexpr int kRes32 = 32, kRes64 = 64, kChannels = 3;
constexpr int kSynth32Count = 12000;  // 10256 codec/GAN train + 1000 real holdout + spare
constexpr int kSynth64Count = 11000;
constexpr int kTrainCount = 10256;  // 10k trained on + 256 internal gate holdout
constexpr int kGanIterations = 4000;
constexpr int kNumModels = 4;
constexpr uint64_t kFingerprintSeedBase = 9000;

ImageDataset subset(const ImageDataset& ds, int begin, int end) {
  ImageDataset out;
  out.resolution = ds.resolution;
  out.channels = ds.channels;
  out.names.assign(ds.names.begin() + begin, ds.names.begin() + end);
  out.pixels.assign(ds.pixels.begin() + static_cast<ptrdiff_t>(begin) * ds.image_bytes(),
                    ds.pixels.begin() + static_cast<ptrdiff_t>(end) * ds.image_bytes());
  return out;
}

const ImageDataset& synth_corpus(int resolution) {
  static ImageDataset ds32, ds64;
  ImageDataset& slot = resolution == kRes32 ? ds32 : ds64;
  if (slot.count() == 0) {
    std::string dir = cache_path(resolution == kRes32 ? "synth32" : "synth64").string();
    int want = resolution == kRes32 ? kSynth32Count : kSynth64Count;
    if (!fs::exists(fs::path(dir) / "synth_000000.png")) {
      log_stage("generating " + std::to_string(want) + " synthetic images at " +
                std::to_string(resolution));
      generate_synthetic_images(dir, want, resolution, kChannels,
                                resolution == kRes32 ? 101 : 102);
    }
    slot = ingest_folder(dir, resolution, kChannels);
    if (slot.count() != want) {
      throw std::runtime_error("synthetic corpus incomplete; delete " + dir + " and rerun");
    }
  }
  return slot;
}

CodecCheckpoint& trained_codec(int resolution, const std::string& leaf, uint64_t seed,
                               TrainLog* log_out = nullptr) {
  static std::map<std::string, std::unique_ptr<CodecCheckpoint>> cache;
  auto it = cache.find(leaf);
  if (it != cache.end() && !log_out) return *it->second;

  fs::path dir = cache_path(leaf);
  fs::path ckpt_path = dir / "codec.bin";
  fs::path log_path = dir / "train_log.json";
  if (!fs::exists(ckpt_path)) {
    log_stage("training codec " + leaf + " (resolution " + std::to_string(resolution) + ")");
    CodecConfig cfg;  // paper defaults: n=100, lambda 10, ramp 3k, 30 epochs, batch 64
    cfg.resolution = resolution;
    cfg.channels = kChannels;
    cfg.seed = seed;
    ImageDataset train = subset(synth_corpus(resolution), 0, kTrainCount);
    auto [ckpt, log] = train_codec(train, cfg, &std::cout);
    fs::create_directories(dir);
    ckpt.save(ckpt_path.string());
    std::ofstream lf(log_path);
    lf << log.to_json() << "\n";
  }
  if (log_out) {
    std::ifstream lf(log_path);
    std::string text((std::istreambuf_iterator<char>(lf)), std::istreambuf_iterator<char>());
    auto j = nlohmann::json::parse(text);
    log_out->gate_reached_iter = j.at("gate_reached_iter").get<int64_t>();
    log_out->gate_reached_epoch = j.at("gate_reached_epoch").get<int>();
    log_out->gate_warning = j.at("gate_warning").get<bool>();
    log_out->epoch_holdout_acc = j.at("epoch_holdout_acc").get<std::vector<double>>();
  }
  if (it == cache.end()) {
    it = cache.emplace(leaf, std::make_unique<CodecCheckpoint>(
                                 CodecCheckpoint::load(ckpt_path.string())))
             .first;
  }
  return *it->second;
}

Fingerprint model_fingerprint(int model) {
  return sample_fingerprint(100, kFingerprintSeedBase + static_cast<uint64_t>(model));
}

const DatasetManifest& fingerprinted_set(int model) {
  static std::map<int, DatasetManifest> cache;
  auto it = cache.find(model);
  if (it != cache.end()) return it->second;
  std::string leaf = "fp32_m" + std::to_string(model);
  fs::path dir = cache_path(leaf);
  fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    log_stage("embedding fingerprint into training set for model " + std::to_string(model));
    CodecCheckpoint& codec = trained_codec(kRes32, "codec32", 201);
    ImageDataset train = subset(synth_corpus(kRes32), 0, kTrainCount);
    fingerprint_dataset(codec, train, model_fingerprint(model), dir.string(),
                        /*overwrite=*/true, &std::cout);
  }
  return cache.emplace(model, DatasetManifest::load(manifest_path.string())).first->second;
}

GanCheckpoint& trained_gan(const std::string& leaf,
                           const std::function<GanCheckpoint()>& build) {
  static std::map<std::string, std::unique_ptr<GanCheckpoint>> cache;
  auto it = cache.find(leaf);
  if (it != cache.end()) return *it->second;
  fs::path path = cache_path(leaf) / "gan.bin";
  if (!fs::exists(path)) {
    GanCheckpoint ckpt = build();
    fs::create_directories(cache_path(leaf));
    ckpt.save(path.string());
  }
  return *cache.emplace(leaf, std::make_unique<GanCheckpoint>(GanCheckpoint::load(path.string())))
              .first->second;
}

GeneratorConfig gan_config(uint64_t seed) {
  GeneratorConfig cfg;
  cfg.resolution = kRes32;
  cfg.channels = kChannels;
  cfg.iterations = kGanIterations;
  cfg.batch_size = 32;
  cfg.seed = seed;
  cfg.checkpoint_every = 1000;
  cfg.log_every = 500;
  return cfg;
}

GanCheckpoint& fingerprinted_gan(int model) {
  std::string leaf = "gan_m" + std::to_string(model);
  return trained_gan(leaf, [&] {
    const DatasetManifest& manifest = fingerprinted_set(model);
    log_stage("training generator on fingerprinted data: model " + std::to_string(model));
    ImageDataset data = load_manifest_images(manifest, kRes32, kChannels);
    auto result = train_generator(data, gan_config(301 + static_cast<uint64_t>(model)),
                                  manifest.out_dir, "m" + std::to_string(model), &std::cout,
                                  cache_path(leaf).string());
    return std::move(result.checkpoint);
  });
}

GanCheckpoint& clean_gan() {
  return trained_gan("gan_clean", [&] {
    log_stage("training generator on clean data (negative control)");
    ImageDataset data = subset(synth_corpus(kRes32), 0, kTrainCount);
    auto result = train_generator(data, gan_config(305), "clean:synth32", "clean-control",
                                  &std::cout, cache_path("gan_clean").string());
    return std::move(result.checkpoint);
  });
}

const DatasetManifest& lsb_set() {
  static DatasetManifest manifest;
  fs::path path = cache_path("lsb32") / "manifest.json";
  if (manifest.records.empty()) {
    if (!fs::exists(path)) {
      log_stage("building LSB control dataset");
      ImageDataset train = subset(synth_corpus(kRes32), 0, kTrainCount);
      lsb_embed_baseline(train, model_fingerprint(9), cache_path("lsb32").string(), true);
    }
    manifest = DatasetManifest::load(path.string());
  }
  return manifest;
}

GanCheckpoint& lsb_gan() {
  return trained_gan("gan_lsb", [&] {
    log_stage("training generator on LSB-embedded data (conventional control)");
    ImageDataset data = load_manifest_images(lsb_set(), kRes32, kChannels);
    auto result = train_generator(data, gan_config(306), lsb_set().out_dir, "lsb-control",
                                  &std::cout, cache_path("gan_lsb").string());
    return std::move(result.checkpoint);
  });
}

struct JointArtifacts {
  GanCheckpoint gan;
  std::unique_ptr<StegaDecoder> decoder;
  CodecConfig decoder_cfg;
};

JointArtifacts& joint_baseline() {
  static std::unique_ptr<JointArtifacts> cache;
  if (cache) return *cache;
  fs::path dir = cache_path("joint");
  fs::path gan_path = dir / "gan.bin";
  fs::path dec_path = dir / "joint_decoder.bin";
  if (!fs::exists(gan_path)) {
    log_stage("training joint fingerprinting baseline (eta=1.0)");
    ImageDataset data = subset(synth_corpus(kRes32), 0, kTrainCount);
    auto result =
        train_joint_baseline(data, model_fingerprint(8), gan_config(307), 1.0, &std::cout);
    fs::create_directories(dir);
    result.checkpoint.save(gan_path.string());
    save_joint_decoder(dec_path.string(), *result.decoder, result.decoder_config);
  }
  auto [dec, dcfg] = load_joint_decoder(dec_path.string());
  cache = std::make_unique<JointArtifacts>(JointArtifacts{
      GanCheckpoint::load(gan_path.string()), std::move(dec), dcfg});
  return *cache;
}

CodecCheckpoint& shadow_codec() { return trained_codec(kRes32, "shadow32", 931); }

Tensor quantized_samples(GanCheckpoint& gan, int count, uint64_t seed) {
  return quantize8(sample(gan, count, seed));
}

double mean_accuracy(CodecCheckpoint& codec, const Tensor& images, const Fingerprint& fp) {
  auto decs = decode(codec, images);
  double sum = 0;
  for (const auto& d : decs) sum += bitwise_accuracy(d.bits, fp);
  return sum / static_cast<double>(decs.size());
}

// ---- criteria ---------------------------------------------------------------

// 1. Binomial matcher exactness and runtime.
void criterion_1() {
  Timer oracle_timer;
  long double expect75 = binomial_oracle::oracle_pvalue(75, 100);
  double got75 = match_pvalue(75, 100);
  bool quote_ok = std::abs(got75 - 2.80e-7) / 2.80e-7 <= 0.02;

  double max_rel = 0;
  Timer impl_timer;
  // Implementation sweep timing: every (k,n) with n <= 128.
  std::vector<double> impl_values;
  impl_values.reserve(128 * 129 / 2 + 200);
  for (int n = 1; n <= 128; ++n) {
    for (int k = 0; k <= n; ++k) impl_values.push_back(match_pvalue(k, n));
  }
  double impl_secs = impl_timer.secs();

  size_t idx = 0;
  for (int n = 1; n <= 128; ++n) {
    auto row = binomial_oracle::oracle_row(n);
    for (int k = 0; k <= n; ++k) {
      long double expect = binomial_oracle::oracle_tail(row, k, n);
      double got = impl_values[idx++];
      double rel = expect == 0.0L
                       ? std::abs(got)
                       : static_cast<double>(fabsl(got - expect) / fabsl(expect));
      max_rel = std::max(max_rel, rel);
    }
  }
  bool pass = quote_ok && max_rel <= 1e-12 && impl_secs < 1.0;
  std::ostringstream d;
  d << "p(75,100)=" << got75 << " (quote 2.80e-7, oracle " << static_cast<double>(expect75)
    << "), max rel err over n<=128: " << max_rel << ", impl sweep " << impl_secs << "s"
    << " (oracle cross-check " << oracle_timer.secs() << "s total)";
  report(1, pass, d.str());
}

// 2. Codec training at 64x64 on >=10k images with the default schedule.
void criterion_2() {
  TrainLog log;
  CodecCheckpoint& codec = trained_codec(kRes64, "codec64", 202, &log);
  // Roundtrip on 500 images never seen in training, through the 8-bit grid.
  ImageDataset holdout = subset(synth_corpus(kRes64), kTrainCount, kTrainCount + 500);
  Fingerprint fp = sample_fingerprint(100, 777);
  Tensor imgs = holdout.to_float_range(0, holdout.count());
  Tensor stego = quantize8(embed(codec, imgs, fp));
  double acc = mean_accuracy(codec, stego, fp);
  bool gate_ok = !log.gate_warning && log.gate_reached_epoch >= 0 && log.gate_reached_epoch < 5;
  bool pass = acc >= 0.95 && gate_ok;
  std::ostringstream d;
  d << "held-out roundtrip acc " << acc << " (need >= 0.95), gate at epoch "
    << log.gate_reached_epoch << " iter " << log.gate_reached_iter << " (need < 5 epochs)";
  report(2, pass, d.str());
}

// 3. Fidelity: PSNR >= 30 dB, magnified difference images, fingerprinted GAN
//    training converged.
void criterion_3() {
  CodecCheckpoint& codec = trained_codec(kRes64, "codec64", 202);
  ImageDataset originals = subset(synth_corpus(kRes64), 0, 1000);
  Fingerprint fp = sample_fingerprint(100, 778);
  Tensor imgs = originals.to_float_range(0, originals.count());
  Tensor stego = embed(codec, imgs, fp);

  ImageDataset stego_ds = originals;
  stego_ds.pixels = float_to_u8(stego.ptr(), stego.data.size());
  fs::path out = cache_path("fidelity64");
  FidelityMetrics fm = fidelity_report(originals, stego_ds, out.string(), 16);

  bool diffs_ok = fs::exists(out / "diff_0.png") && fs::exists(out / "diff_15.png");
  bool converged = fingerprinted_gan(0).status == "completed";
  bool pass = fm.mean_psnr_db >= 30.0 && diffs_ok && converged;
  std::ostringstream d;
  d << "embed PSNR " << fm.mean_psnr_db << " dB (need >= 30), 10x diff images "
    << (diffs_ok ? "emitted" : "MISSING") << ", fingerprinted GAN status "
    << fingerprinted_gan(0).status;
  report(3, pass, d.str());
}

// 4. Transferability at desk scale plus the clean-data negative control.
void criterion_4() {
  CodecCheckpoint& codec = trained_codec(kRes32, "codec32", 201);
  Fingerprint fp = model_fingerprint(0);
  TransferReport r = evaluate_transferability(fingerprinted_gan(0), codec, fp, 1000, 401);
  TransferReport clean = evaluate_transferability(clean_gan(), codec, fp, 1000, 402);
  bool pass = r.mean_accuracy >= 0.90 && r.p_value_at_mean_accuracy < 1e-15 &&
              clean.mean_accuracy >= 0.47 && clean.mean_accuracy <= 0.53;
  std::ostringstream d;
  d << "generated bit acc " << r.mean_accuracy << " (need >= 0.90), p at mean "
    << r.p_value_at_mean_accuracy << " (need < 1e-15), clean control " << clean.mean_accuracy
    << " (need 0.50 +/- 0.03)";
  report(4, pass, d.str());
}

// 5. Conventional-steganography (LSB) negative control.
void criterion_5() {
  Fingerprint fp = model_fingerprint(9);
  // Still-image roundtrip on the saved dataset must be exact.
  ImageDataset lsb_images = load_manifest_images(lsb_set(), kRes32, kChannels);
  double rt = 0;
  const int check = 200;
  for (int i = 0; i < check; ++i) rt += bitwise_accuracy(lsb_decode(lsb_images, i, fp.n()), fp);
  rt /= check;

  Tensor samples = quantized_samples(lsb_gan(), 1000, 403);
  const size_t per = static_cast<size_t>(kChannels) * kRes32 * kRes32;
  auto u8 = float_to_u8(samples.ptr(), samples.data.size());
  double acc = 0;
  for (int i = 0; i < samples.dim(0); ++i) {
    acc += bitwise_accuracy(lsb_decode(u8.data() + static_cast<size_t>(i) * per, per, fp.n()), fp);
  }
  acc /= samples.dim(0);
  bool pass = rt == 1.0 && acc >= 0.45 && acc <= 0.60;
  std::ostringstream d;
  d << "still-image LSB roundtrip " << rt << " (need 1.0), generated decode " << acc
    << " (need in [0.45, 0.60])";
  report(5, pass, d.str());
}

// 6. Detection and attribution with four registered models.
void criterion_6() {
  CodecCheckpoint& codec = trained_codec(kRes32, "codec32", 201);
  Registry registry;
  for (int m = 0; m < kNumModels; ++m) {
    registry.register_model("m" + std::to_string(m), model_fingerprint(m), codec.codec_id());
  }
  ImageDataset real_holdout = subset(synth_corpus(kRes32), kTrainCount, kTrainCount + 1000);
  Tensor real = real_holdout.to_float_range(0, real_holdout.count());

  std::vector<Tensor> fakes;
  std::vector<std::pair<std::string, Tensor>> labeled;
  for (int m = 0; m < kNumModels; ++m) {
    Tensor s = quantized_samples(fingerprinted_gan(m), 1000, 500 + static_cast<uint64_t>(m));
    fakes.push_back(s);
    labeled.emplace_back("m" + std::to_string(m), std::move(s));
  }
  DetectionReport det = detection_experiment(real, fakes, codec, registry);
  AttributionReport att = attribution_experiment(labeled, codec, registry);

  Tensor unreg = quantized_samples(clean_gan(), 1000, 504);
  AttributionReport unknown_rep =
      attribution_experiment({{"clean-control", unreg}}, codec, registry);

  bool pass = det.accuracy >= 0.99 && att.accuracy >= 0.99 &&
              unknown_rep.unknown_rate_for_unregistered >= 0.99;
  std::ostringstream d;
  d << "detection acc " << det.accuracy << " (FP " << det.false_positive << ", FN "
    << det.false_negative << "), attribution acc " << att.accuracy << ", unregistered->unknown "
    << unknown_rep.unknown_rate_for_unregistered << " (all need >= 0.99)";
  report(6, pass, d.str());
}

// 7. Robustness properties and working-range extraction on stored
//    full-scale-shaped fixtures.
void criterion_7() {
  CodecCheckpoint& codec = trained_codec(kRes32, "codec32", 201);
  Fingerprint fp = model_fingerprint(0);
  Tensor generated = quantized_samples(fingerprinted_gan(0), 200, 601);
  // Fingerprinted real training images serve as the reference upper bound.
  ImageDataset fpds = load_manifest_images(fingerprinted_set(0), kRes32, kChannels);
  Tensor reference = fpds.to_float_range(0, 200);

  const double ci_slack = 0.025;  // sampling tolerance at 200 images/point
  bool identity_ok = true, monotone_ok = true, ref_ok = true;
  std::ostringstream notes;

  for (PerturbKind kind : {PerturbKind::gaussian_noise, PerturbKind::gaussian_blur,
                           PerturbKind::jpeg, PerturbKind::center_crop}) {
    auto grid = default_grid(kind, kRes32);
    SweepResult sweep = sweep_image(generated, codec, fp, kind, grid, reference, 602);

    // Zero-magnitude identity: mild-end decode equals the unperturbed decode
    // exactly (bitwise). The mild end is the last grid point for
    // larger-is-milder kinds, the first otherwise.
    double zero_mag = larger_is_milder(kind) ? grid.back() : grid.front();
    Tensor unpert = perturb_image(generated, {kind, zero_mag}, 603);
    if (unpert.data != generated.data) {
      identity_ok = false;
      notes << perturb_kind_name(kind) << ": zero-magnitude not exact; ";
    }
    // Monotone non-increasing from mild to harsh within CI; reference curve
    // dominates the generated curve within CI.
    std::vector<size_t> order(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
      order[i] = larger_is_milder(kind) ? grid.size() - 1 - i : i;
    }
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      if (sweep.generated_acc[order[i + 1]] > sweep.generated_acc[order[i]] + ci_slack) {
        monotone_ok = false;
        notes << perturb_kind_name(kind) << ": rise at index " << i << "; ";
      }
    }
    for (size_t i = 0; i < grid.size(); ++i) {
      if (sweep.reference[i] < sweep.generated_acc[i] - ci_slack) {
        ref_ok = false;
        notes << perturb_kind_name(kind) << ": reference below generated at " << grid[i]
              << "; ";
      }
    }
    emit_plot(sweep, (cache_path("sweeps") / (std::string(perturb_kind_name(kind)) + ".svg"))
                         .string());
    std::ofstream sf(cache_path("sweeps") / (std::string(perturb_kind_name(kind)) + ".json"));
    sf << sweep.to_json() << "\n";
  }

  // Model perturbations: identity at sigma 0 plus sweeps recorded.
  {
    GanCheckpoint& gan = fingerprinted_gan(0);
    GanCheckpoint same = perturb_generator(gan, {PerturbKind::weight_noise, 0.0}, 604);
    Tensor a = sample(gan, 16, 605);
    Tensor b = sample(same, 16, 605);
    if (a.data != b.data) {
      identity_ok = false;
      notes << "weight_noise sigma 0 not exact; ";
    }
    ImageDataset train = subset(synth_corpus(kRes32), 0, 2000);
    for (PerturbKind kind : {PerturbKind::weight_quantize, PerturbKind::weight_noise}) {
      SweepResult sweep =
          sweep_model(gan, codec, fp, kind, default_grid(kind, kRes32), 128, train, 606);
      emit_plot(sweep, (cache_path("sweeps") / (std::string(perturb_kind_name(kind)) + ".svg"))
                           .string());
      std::ofstream sf(cache_path("sweeps") /
                       (std::string(perturb_kind_name(kind)) + ".json"));
      sf << sweep.to_json() << "\n";
    }
  }

  // Working-range extraction on stored full-scale-shaped fixtures must
  // reproduce the published intervals exactly.
  SweepResult noise_fix;
  noise_fix.kind = PerturbKind::gaussian_noise;
  noise_fix.grid = {0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15};
  noise_fix.generated_acc = {0.98, 0.90, 0.75, 0.68, 0.62, 0.57, 0.54};
  noise_fix.reference = {1.0, 0.97, 0.88, 0.80, 0.72, 0.66, 0.60};
  SweepResult jpeg_fix;
  jpeg_fix.kind = PerturbKind::jpeg;
  jpeg_fix.grid = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  jpeg_fix.generated_acc = {0.55, 0.60, 0.66, 0.71, 0.75, 0.82, 0.88, 0.93, 0.97, 0.98};
  jpeg_fix.reference = {0.60, 0.66, 0.72, 0.78, 0.84, 0.90, 0.94, 0.97, 0.99, 1.0};
  WorkingRange wn = working_range(noise_fix, 0.75);
  WorkingRange wj = working_range(jpeg_fix, 0.75);
  bool fixtures_ok = !wn.empty && std::abs(wn.lo - 0.0) < 1e-12 &&
                     std::abs(wn.hi - 0.05) < 1e-12 && !wj.empty &&
                     std::abs(wj.lo - 50.0) < 1e-12 && std::abs(wj.hi - 100.0) < 1e-12;
  if (!fixtures_ok) notes << "fixture working ranges wrong; ";

  bool pass = identity_ok && monotone_ok && ref_ok && fixtures_ok;
  std::ostringstream d;
  d << "identity " << (identity_ok ? "exact" : "BROKEN") << ", monotone "
    << (monotone_ok ? "ok" : "BROKEN") << ", reference-dominates "
    << (ref_ok ? "ok" : "BROKEN") << ", fixture ranges noise [" << wn.lo << "," << wn.hi
    << "] jpeg [" << wj.lo << "," << wj.hi << "]";
  if (!notes.str().empty()) d << " | " << notes.str();
  report(7, pass, d.str());
}

// 8. Joint baseline: decodable fingerprint but strictly worse quality proxy
//    than clean training on the same budget.
void criterion_8() {
  JointArtifacts& joint = joint_baseline();
  Fingerprint fp = model_fingerprint(8);
  TransferReport r = evaluate_with_decoder(joint.gan, *joint.decoder, joint.decoder_cfg, fp,
                                           1000, 801);
  ImageDataset train = subset(synth_corpus(kRes32), 0, kTrainCount);
  Tensor joint_samples = quantized_samples(joint.gan, 1000, 802);
  Tensor clean_samples = quantized_samples(clean_gan(), 1000, 803);
  double joint_proxy = nearest_train_psnr(joint_samples, train, 1000, 11);
  double clean_proxy = nearest_train_psnr(clean_samples, train, 1000, 11);
  bool pass = r.mean_accuracy >= 0.85 && joint_proxy < clean_proxy;
  std::ostringstream d;
  d << "joint fingerprint acc " << r.mean_accuracy << " (need >= 0.85), quality proxy "
    << joint_proxy << " dB vs clean " << clean_proxy
    << " dB (joint must be strictly worse; proxy = nearest-train PSNR, an FID stand-in)";
  report(8, pass, d.str());
}

// 9. Secrecy: ATS attack near chance against an independent shadow codec,
//    clearly above chance when the shadow IS the victim codec.
void criterion_9() {
  CodecCheckpoint& victim = trained_codec(kRes32, "codec32", 201);
  CodecCheckpoint& shadow = shadow_codec();

  Tensor fingerprinted = quantized_samples(fingerprinted_gan(0), 250, 901);
  Tensor clean = quantized_samples(clean_gan(), 250, 902);
  Tensor all({500, kChannels, kRes32, kRes32});
  std::copy(fingerprinted.data.begin(), fingerprinted.data.end(), all.data.begin());
  std::copy(clean.data.begin(), clean.data.end(), all.data.begin() + fingerprinted.numel());
  std::vector<int> labels(250, 1);
  labels.insert(labels.end(), 250, 0);

  AtsReport attack = ats_attack(all, labels, shadow, 903);
  AtsReport control = ats_attack(all, labels, victim, 904);
  bool pass = attack.accuracy >= 0.45 && attack.accuracy <= 0.55 && control.accuracy >= 0.8;
  std::ostringstream d;
  d << "ATS accuracy " << attack.accuracy << " (need in [0.45, 0.55]; paper reports 0.502), "
    << "same-codec positive control " << control.accuracy << " (need >= 0.8)";
  report(9, pass, d.str());
}

// 10. Property suites complete quickly with no training involved.
void criterion_10() {
  Timer timer;
  bool ok = true;
  std::ostringstream notes;

  // Gradient check of the codec losses through a small encoder/decoder pair
  // in double precision.
  {
    CodecConfig cfg;
    cfg.resolution = kRes32;
    cfg.fingerprint_len = 12;
    cfg.enc_base_channels = 3;
    cfg.dec_base_channels = 4;
    cfg.seed = 5;
    RandomStream rng(21);
    StegaEncoderT<double> enc(cfg, rng);
    StegaDecoderT<double> dec(cfg, rng);
    TensorT<double> imgs({2, 3, kRes32, kRes32});
    RandomStream drng(31);
    for (auto& v : imgs.data) v = drng.uniform();
    TensorT<double> bits({2, 12});
    for (auto& v : bits.data) v = drng.bit();
    const double lambda = 2.0;
    auto loss_value = [&]() {
      TensorT<double> stego = enc.forward(imgs, bits);
      TensorT<double> probs = dec.forward(stego);
      return nn::bce_loss<double>(probs, bits, nullptr) +
             lambda * nn::mse_loss<double>(stego, imgs, nullptr);
    };
    TensorT<double> stego = enc.forward(imgs, bits);
    TensorT<double> probs = dec.forward(stego);
    TensorT<double> g_probs, g_mse;
    nn::bce_loss<double>(probs, bits, &g_probs);
    nn::mse_loss<double>(stego, imgs, &g_mse);
    enc.zero_grad();
    dec.zero_grad();
    TensorT<double> g_stego = dec.backward(g_probs);
    for (size_t i = 0; i < g_stego.data.size(); ++i) g_stego.data[i] += lambda * g_mse.data[i];
    enc.backward(g_stego);
    std::vector<nn::ParamT<double>*> params;
    enc.collect_params(params);
    dec.collect_params(params);
    RandomStream pick(7);
    int checked = 0, failed = 0;
    for (auto* p : params) {
      for (int probe = 0; probe < 2; ++probe) {
        size_t idx = static_cast<size_t>(pick.uniform_index(p->value.data.size()));
        double orig = p->value.data[idx];
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        p->value.data[idx] = orig + h;
        double lp = loss_value();
        p->value.data[idx] = orig - h;
        double lm = loss_value();
        p->value.data[idx] = orig;
        double fd = (lp - lm) / (2 * h);
        double denom = std::max(std::abs(fd), std::abs(p->grad.data[idx]));
        if (denom < 1e-9) continue;
        ++checked;
        if (std::abs(fd - p->grad.data[idx]) / denom > 1e-3) ++failed;
      }
    }
    if (failed > 0 || checked < 20) {
      ok = false;
      notes << "gradcheck failed " << failed << "/" << checked << "; ";
    }
  }

  // Fingerprint serialization round trip.
  for (uint64_t s = 0; s < 50 && ok; ++s) {
    auto fp = sample_fingerprint(100, s);
    if (!(Fingerprint::from_hex(fp.to_hex(), 100) == fp)) {
      ok = false;
      notes << "fingerprint hex roundtrip broken; ";
    }
  }

  // Registry collision rejection.
  {
    Registry reg;
    auto w = sample_fingerprint(100, 3);
    reg.register_model("a", w, "c");
    auto near = w.bits();
    near[0] ^= 1u;
    bool rejected = false;
    try {
      reg.register_model("b", Fingerprint(near), "c");
    } catch (const CollisionError&) {
      rejected = true;
    }
    if (!rejected) {
      ok = false;
      notes << "registry collision not rejected; ";
    }
  }

  // Manifest hash integrity.
  {
    fs::path dir = cache_path("c10_manifest");
    fs::remove_all(dir);
    generate_synthetic_images(dir.string(), 4, kRes32, kChannels, 55);
    ImageDataset ds = ingest_folder(dir.string(), kRes32, kChannels);
    Fingerprint fp = sample_fingerprint(100, 56);
    fs::path out = cache_path("c10_lsb");
    fs::remove_all(out);
    DatasetManifest m = lsb_embed_baseline(ds, fp, out.string(), true);
    {
      std::fstream f(out / m.records[0].path,
                     std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(64);
      char b;
      f.read(&b, 1);
      f.seekp(64);
      b ^= 0x01;
      f.write(&b, 1);
    }
    bool caught = false;
    try {
      load_manifest_images(m, kRes32, kChannels);
    } catch (const IntegrityError&) {
      caught = true;
    }
    if (!caught) {
      ok = false;
      notes << "manifest tamper not detected; ";
    }
  }

  double secs = timer.secs();
  bool pass = ok && secs < 600.0;
  std::ostringstream d;
  d << "property suite " << (ok ? "clean" : notes.str()) << " in " << secs
    << "s (need < 600s, no training involved)";
  report(10, pass, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

  fs::create_directories(cache_path("sweeps"));
  std::cout << "acceptance cache: " << fs::absolute(cache_root()) << "\n";

  Timer total;
  try {
    if (want(1)) criterion_1();
    if (want(2)) criterion_2();
    if (want(3)) criterion_3();
    if (want(4)) criterion_4();
    if (want(5)) criterion_5();
    if (want(6)) criterion_6();
    if (want(7)) criterion_7();
    if (want(8)) criterion_8();
    if (want(9)) criterion_9();
    if (want(10)) criterion_10();
  } catch (const std::exception& e) {
    std::cerr << "acceptance aborted: " << e.what() << "\n";
    return 2;
  }

  std::cout << "----------------------------------------\n";
  for (const auto& line : g_lines) std::cout << line << "\n";
  std::cout << g_pass << " passed, " << g_fail << " failed (" << total.secs() << "s)\n";
  return g_fail == 0 ? 0 : 1;
}
