// fpforge: fingerprint generative-model training data, evaluate transfer,
// and run detection/attribution and robustness experiments.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fpforge/ats.hpp"
#include "fpforge/codec.hpp"
#include "fpforge/dataset.hpp"
#include "fpforge/gan.hpp"
#include "fpforge/perturb.hpp"
#include "fpforge/registry.hpp"
#include "fpforge/sha256.hpp"
#include "fpforge/transfer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace fpforge;

namespace {

// Config file support: JSON, applied between defaults and CLI flags.
json load_config_file(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream f(argv[i + 1]);
      if (!f) throw std::invalid_argument(std::string("cannot open config file ") + argv[i + 1]);
      return json::parse(f);
    }
  }
  return json::object();
}

template <typename T>
void cfg_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void write_run_report(const std::string& out_dir, const std::string& subcommand,
                      const json& config, const json& metrics,
                      const json& inputs = json::object()) {
  fs::create_directories(out_dir);
  json j = {{"tool_version", kToolVersion}, {"subcommand", subcommand},
            {"created_at", rfc3339_now()},  {"config", config},
            {"inputs", inputs},             {"metrics", metrics}};
  std::ofstream f(fs::path(out_dir) / "run_report.json");
  f << j.dump(2) << "\n";
}

Fingerprint resolve_fingerprint(const std::string& hex, int64_t seed, int n) {
  if (!hex.empty()) return Fingerprint::from_hex(hex, n);
  if (seed >= 0) return sample_fingerprint(n, static_cast<uint64_t>(seed));
  throw std::invalid_argument("provide --fingerprint or --fingerprint-seed");
}

// Report/artifact directories default under FPFORGE_CACHE when it is set.
std::string cache_fallback(const std::string& leaf) {
  if (const char* env = std::getenv("FPFORGE_CACHE")) {
    return (fs::path(env) / leaf).string();
  }
  return leaf;
}

void add_codec_config_options(CLI::App* cmd, CodecConfig& cfg) {
  cmd->add_option("--resolution", cfg.resolution, "square image resolution");
  cmd->add_option("--channels", cfg.channels, "1 or 3");
  cmd->add_option("--fingerprint-len", cfg.fingerprint_len, "bits per fingerprint");
  cmd->add_option("--lambda-max", cfg.lambda_max, "image-loss weight after ramp");
  cmd->add_option("--lambda-ramp-iters", cfg.lambda_ramp_iters);
  cmd->add_option("--accuracy-gate", cfg.accuracy_gate);
  cmd->add_option("--epochs", cfg.epochs);
  cmd->add_option("--batch-size", cfg.batch_size);
  cmd->add_option("--learning-rate", cfg.learning_rate);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_option("--enc-base-channels", cfg.enc_base_channels);
  cmd->add_option("--dec-base-channels", cfg.dec_base_channels);
}

void apply_codec_config_json(const json& j, CodecConfig& cfg) {
  if (j.empty()) return;
  cfg = CodecConfig::from_json(j.dump());
}

void add_gan_config_options(CLI::App* cmd, GeneratorConfig& cfg) {
  cmd->add_option("--latent-dim", cfg.latent_dim);
  cmd->add_option("--resolution", cfg.resolution);
  cmd->add_option("--channels", cfg.channels);
  cmd->add_option("--iterations", cfg.iterations);
  cmd->add_option("--batch-size", cfg.batch_size);
  cmd->add_option("--lr-g", cfg.lr_g);
  cmd->add_option("--lr-d", cfg.lr_d);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_option("--g-base-channels", cfg.g_base_channels);
  cmd->add_option("--d-base-channels", cfg.d_base_channels);
  cmd->add_option("--checkpoint-every", cfg.checkpoint_every);
}

void apply_gan_config_json(const json& j, GeneratorConfig& cfg) {
  if (j.empty()) return;
  cfg = GeneratorConfig::from_json(j.dump());
}

void save_samples_png(const Tensor& images, const std::string& out_dir,
                      const std::string& prefix) {
  fs::create_directories(out_dir);
  const int C = images.dim(1), res = images.dim(2);
  const size_t per = static_cast<size_t>(C) * res * res;
  for (int i = 0; i < images.dim(0); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06d.png", prefix.c_str(), i);
    save_png_float((fs::path(out_dir) / name).string(), images.ptr() + i * per, C, res);
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"artificial fingerprinting for generative models"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");
  json file_cfg = load_config_file(argc, argv);

  // ---- synth-data -----------------------------------------------------------
  auto* synth = app.add_subcommand("synth-data", "generate a procedural image folder");
  struct {
    std::string out;
    int count = 1000;
    int resolution = 32;
    int channels = 3;
    uint64_t seed = 1;
  } sd;
  cfg_get(file_cfg, "count", sd.count);
  cfg_get(file_cfg, "resolution", sd.resolution);
  cfg_get(file_cfg, "seed", sd.seed);
  synth->add_option("--out", sd.out)->required();
  synth->add_option("--count", sd.count);
  synth->add_option("--resolution", sd.resolution);
  synth->add_option("--channels", sd.channels);
  synth->add_option("--seed", sd.seed);
  synth->callback([&] {
    generate_synthetic_images(sd.out, sd.count, sd.resolution, sd.channels, sd.seed);
    write_run_report(sd.out, "synth-data",
                     {{"count", sd.count},
                      {"resolution", sd.resolution},
                      {"channels", sd.channels},
                      {"seed", sd.seed}},
                     {{"generated", sd.count}});
    std::cout << "wrote " << sd.count << " images to " << sd.out << "\n";
  });

  // ---- train-codec -----------------------------------------------------------
  auto* tc = app.add_subcommand("train-codec", "train the steganography encoder/decoder");
  struct {
    std::string data, out;
  } tc_args;
  CodecConfig tc_cfg;
  apply_codec_config_json(file_cfg, tc_cfg);
  tc->add_option("--data", tc_args.data, "training image folder")->required();
  tc->add_option("--out", tc_args.out, "output directory")->required();
  add_codec_config_options(tc, tc_cfg);
  tc->callback([&] {
    ImageDataset ds = ingest_folder(tc_args.data, tc_cfg.resolution, tc_cfg.channels);
    auto [ckpt, log] = train_codec(ds, tc_cfg, &std::cout);
    fs::create_directories(tc_args.out);
    std::string ckpt_path = (fs::path(tc_args.out) / "codec.bin").string();
    ckpt.save(ckpt_path);
    std::ofstream lf(fs::path(tc_args.out) / "train_log.json");
    lf << log.to_json() << "\n";
    write_run_report(tc_args.out, "train-codec", json::parse(tc_cfg.to_json()),
                     {{"codec_id", ckpt.codec_id()},
                      {"final_holdout_acc", log.epoch_holdout_acc.back()},
                      {"gate_reached_iter", log.gate_reached_iter},
                      {"gate_reached_epoch", log.gate_reached_epoch},
                      {"gate_warning", log.gate_warning},
                      {"wall_seconds", log.wall_seconds}},
                     {{"data_dir", tc_args.data}, {"num_images", ds.count()}});
    std::cout << "codec " << ckpt.codec_id().substr(0, 12) << " saved to " << ckpt_path
              << " (holdout acc " << log.epoch_holdout_acc.back() << ")\n";
    if (log.gate_warning) std::cout << "WARNING: accuracy gate never reached\n";
  });

  // ---- embed-dataset -----------------------------------------------------------
  auto* ed = app.add_subcommand("embed-dataset", "fingerprint every image of a folder");
  struct {
    std::string codec, data, out, fingerprint_hex;
    int64_t fingerprint_seed = -1;
    bool overwrite = false;
  } ed_args;
  ed->add_option("--codec", ed_args.codec)->required();
  ed->add_option("--data", ed_args.data)->required();
  ed->add_option("--out", ed_args.out)->required();
  ed->add_option("--fingerprint", ed_args.fingerprint_hex, "hex fingerprint");
  ed->add_option("--fingerprint-seed", ed_args.fingerprint_seed, "sample fingerprint from seed");
  ed->add_flag("--overwrite", ed_args.overwrite);
  ed->callback([&] {
    CodecCheckpoint ckpt = CodecCheckpoint::load(ed_args.codec);
    ImageDataset ds =
        ingest_folder(ed_args.data, ckpt.config().resolution, ckpt.config().channels);
    Fingerprint fp = resolve_fingerprint(ed_args.fingerprint_hex, ed_args.fingerprint_seed,
                                         ckpt.config().fingerprint_len);
    DatasetManifest m =
        fingerprint_dataset(ckpt, ds, fp, ed_args.out, ed_args.overwrite, &std::cout);
    write_run_report(ed_args.out, "embed-dataset",
                     {{"codec", ed_args.codec},
                      {"fingerprint_hex", fp.to_hex()},
                      {"fingerprint_seed", ed_args.fingerprint_seed}},
                     {{"records", m.records.size()}, {"codec_id", m.codec_id}},
                     {{"data_dir", ed_args.data}});
    std::cout << "embedded " << m.records.size() << " images; manifest at " << ed_args.out
              << "/manifest.json\n";
  });

  // ---- verify-dataset -----------------------------------------------------------
  auto* vd = app.add_subcommand("verify-dataset", "re-decode a fingerprinted dataset");
  struct {
    std::string codec, manifest, fingerprint_hex;
  } vd_args;
  vd->add_option("--codec", vd_args.codec)->required();
  vd->add_option("--manifest", vd_args.manifest)->required();
  vd->add_option("--fingerprint", vd_args.fingerprint_hex, "defaults to the manifest entry");
  vd->callback([&] {
    CodecCheckpoint ckpt = CodecCheckpoint::load(vd_args.codec);
    DatasetManifest m = DatasetManifest::load(vd_args.manifest);
    Fingerprint fp = vd_args.fingerprint_hex.empty()
                         ? m.fingerprint()
                         : Fingerprint::from_hex(vd_args.fingerprint_hex, m.fingerprint_len);
    VerifyStats stats = verify_dataset(ckpt, m, fp);
    json metrics = {{"mean_accuracy", stats.mean_accuracy},
                    {"min_accuracy", stats.min_accuracy},
                    {"checked", stats.checked},
                    {"failures", stats.failures}};
    write_run_report(fs::path(vd_args.manifest).parent_path().string(), "verify-dataset",
                     {{"codec", vd_args.codec}}, metrics);
    std::cout << "verify: mean acc " << stats.mean_accuracy << ", min " << stats.min_accuracy
              << ", " << stats.failures.size() << " failures\n";
  });

  // ---- fidelity-report -----------------------------------------------------------
  auto* fr = app.add_subcommand("fidelity-report", "pixel metrics plus difference images");
  struct {
    std::string original, processed, out;
    int resolution = 0;
    int channels = 3;
    int diff_count = 16;
  } fr_args;
  fr->add_option("--original", fr_args.original)->required();
  fr->add_option("--processed", fr_args.processed)->required();
  fr->add_option("--out", fr_args.out)->required();
  fr->add_option("--resolution", fr_args.resolution, "ingest resolution (required)")->required();
  fr->add_option("--channels", fr_args.channels);
  fr->add_option("--diff-count", fr_args.diff_count);
  fr->callback([&] {
    ImageDataset a = ingest_folder(fr_args.original, fr_args.resolution, fr_args.channels);
    ImageDataset b = ingest_folder(fr_args.processed, fr_args.resolution, fr_args.channels);
    FidelityMetrics fm = fidelity_report(a, b, fr_args.out, fr_args.diff_count);
    write_run_report(fr_args.out, "fidelity-report",
                     {{"original", fr_args.original}, {"processed", fr_args.processed}},
                     json::parse(fm.to_json()));
    std::cout << "fidelity: mean PSNR " << fm.mean_psnr_db << " dB, mean MSE " << fm.mean_mse
              << ", max |dev| " << fm.max_abs_deviation << "\n";
  });

  // ---- train-gan -----------------------------------------------------------
  auto* tg = app.add_subcommand("train-gan", "adversarial training on an image folder/manifest");
  struct {
    std::string manifest, data, out, model_id = "model";
  } tg_args;
  GeneratorConfig tg_cfg;
  apply_gan_config_json(file_cfg, tg_cfg);
  tg->add_option("--manifest", tg_args.manifest, "fingerprinted-dataset manifest");
  tg->add_option("--data", tg_args.data, "plain image folder (clean training)");
  tg->add_option("--out", tg_args.out)->required();
  tg->add_option("--model-id", tg_args.model_id);
  add_gan_config_options(tg, tg_cfg);
  tg->callback([&] {
    ImageDataset ds;
    std::string manifest_ref = "clean:" + tg_args.data;
    if (!tg_args.manifest.empty()) {
      DatasetManifest m = DatasetManifest::load(tg_args.manifest);
      ds = load_manifest_images(m, tg_cfg.resolution, tg_cfg.channels);
      manifest_ref = tg_args.manifest;
    } else if (!tg_args.data.empty()) {
      ds = ingest_folder(tg_args.data, tg_cfg.resolution, tg_cfg.channels);
    } else {
      throw std::invalid_argument("train-gan: provide --manifest or --data");
    }
    auto result = train_generator(ds, tg_cfg, manifest_ref, tg_args.model_id, &std::cout,
                                  tg_args.out);
    fs::create_directories(tg_args.out);
    std::string path = (fs::path(tg_args.out) / "gan.bin").string();
    result.checkpoint.save(path);
    write_run_report(tg_args.out, "train-gan", json::parse(tg_cfg.to_json()),
                     {{"status", result.status},
                      {"model_id", tg_args.model_id},
                      {"content_id", result.checkpoint.content_id()},
                      {"decoder_free_training", result.checkpoint.decoder_free},
                      {"first_d_loss", result.first_d_loss},
                      {"first_g_loss", result.first_g_loss},
                      {"wall_seconds", result.wall_seconds}},
                     {{"manifest_ref", manifest_ref}, {"num_images", ds.count()}});
    std::cout << "gan '" << tg_args.model_id << "' " << result.status << ", saved to " << path
              << "\n";
    if (result.status != "completed") std::exit(2);
  });

  // ---- train-joint-baseline -----------------------------------------------------
  auto* tj = app.add_subcommand("train-joint-baseline",
                                "joint fingerprint+generation training on clean data");
  struct {
    std::string data, out, fingerprint_hex;
    int64_t fingerprint_seed = -1;
    double eta = 1.0;
    int fingerprint_len = 100;
  } tj_args;
  GeneratorConfig tj_cfg;
  apply_gan_config_json(file_cfg, tj_cfg);
  tj->add_option("--data", tj_args.data)->required();
  tj->add_option("--out", tj_args.out)->required();
  tj->add_option("--fingerprint", tj_args.fingerprint_hex);
  tj->add_option("--fingerprint-seed", tj_args.fingerprint_seed);
  tj->add_option("--fingerprint-len", tj_args.fingerprint_len);
  tj->add_option("--eta", tj_args.eta);
  add_gan_config_options(tj, tj_cfg);
  tj->callback([&] {
    ImageDataset ds = ingest_folder(tj_args.data, tj_cfg.resolution, tj_cfg.channels);
    Fingerprint fp = resolve_fingerprint(tj_args.fingerprint_hex, tj_args.fingerprint_seed,
                                         tj_args.fingerprint_len);
    auto result = train_joint_baseline(ds, fp, tj_cfg, tj_args.eta, &std::cout);
    fs::create_directories(tj_args.out);
    result.checkpoint.save((fs::path(tj_args.out) / "gan.bin").string());
    save_joint_decoder((fs::path(tj_args.out) / "joint_decoder.bin").string(),
                       *result.decoder, result.decoder_config);
    auto report = evaluate_with_decoder(result.checkpoint, *result.decoder,
                                        result.decoder_config, fp, 256, 4242);
    write_run_report(tj_args.out, "train-joint-baseline", json::parse(tj_cfg.to_json()),
                     {{"status", result.status},
                      {"eta", tj_args.eta},
                      {"fingerprint_hex", fp.to_hex()},
                      {"decoder_free_training", false},
                      {"fingerprint_acc_256", report.mean_accuracy},
                      {"wall_seconds", result.wall_seconds}},
                     {{"data_dir", tj_args.data}});
    std::cout << "joint baseline " << result.status << "; fingerprint acc "
              << report.mean_accuracy << "\n";
    if (result.status != "completed") std::exit(2);
  });

  // ---- eval-transfer -----------------------------------------------------------
  auto* et = app.add_subcommand("eval-transfer", "decode fingerprints from generated samples");
  struct {
    std::string gan, codec, fingerprint_hex, out = cache_fallback("eval_transfer");
    int samples = 1000;
    uint64_t seed = 1;
    double threshold = 0.75;
  } et_args;
  et->add_option("--gan", et_args.gan)->required();
  et->add_option("--codec", et_args.codec)->required();
  et->add_option("--fingerprint", et_args.fingerprint_hex)->required();
  et->add_option("--samples", et_args.samples);
  et->add_option("--seed", et_args.seed);
  et->add_option("--threshold", et_args.threshold);
  et->add_option("--out", et_args.out);
  et->callback([&] {
    GanCheckpoint gan = GanCheckpoint::load(et_args.gan);
    CodecCheckpoint codec = CodecCheckpoint::load(et_args.codec);
    Fingerprint fp = Fingerprint::from_hex(et_args.fingerprint_hex,
                                           codec.config().fingerprint_len);
    TransferReport r = evaluate_transferability(gan, codec, fp, et_args.samples, et_args.seed,
                                                et_args.threshold);
    fs::create_directories(et_args.out);
    std::ofstream rf(fs::path(et_args.out) / "transfer_report.json");
    rf << r.to_json() << "\n";
    write_run_report(et_args.out, "eval-transfer",
                     {{"gan", et_args.gan},
                      {"codec", et_args.codec},
                      {"samples", et_args.samples},
                      {"seed", et_args.seed}},
                     {{"mean_accuracy", r.mean_accuracy},
                      {"accuracy_ci95", r.accuracy_ci95},
                      {"p_value_at_mean", r.p_value_at_mean_accuracy},
                      {"median_p_value", r.median_p_value},
                      {"pass_fraction", r.pass_fraction}});
    std::cout << "model " << gan.model_id << ": bit acc " << r.mean_accuracy << " +/- "
              << r.accuracy_ci95 << ", p-value " << r.p_value_at_mean_accuracy << " over "
              << r.num_samples << " samples\n";
  });

  // ---- detect -----------------------------------------------------------
  auto* dt = app.add_subcommand("detect", "real-vs-fake detection over image folders");
  struct {
    std::string codec, registry, real_dir, out = cache_fallback("detect_report");
    std::vector<std::string> fake_dirs;
    double threshold = 0.75;
  } dt_args;
  dt->add_option("--codec", dt_args.codec)->required();
  dt->add_option("--registry", dt_args.registry)->required();
  dt->add_option("--real", dt_args.real_dir)->required();
  dt->add_option("--fake", dt_args.fake_dirs, "folder(s) of generated images")->required();
  dt->add_option("--threshold", dt_args.threshold);
  dt->add_option("--out", dt_args.out);
  dt->callback([&] {
    CodecCheckpoint codec = CodecCheckpoint::load(dt_args.codec);
    Registry reg = Registry::load(dt_args.registry);
    const auto& cfg = codec.config();
    ImageDataset real = ingest_folder(dt_args.real_dir, cfg.resolution, cfg.channels);
    Tensor real_t = real.to_float_range(0, real.count());
    std::vector<Tensor> fakes;
    for (const auto& d : dt_args.fake_dirs) {
      ImageDataset f = ingest_folder(d, cfg.resolution, cfg.channels);
      fakes.push_back(f.to_float_range(0, f.count()));
    }
    DetectionReport rep = detection_experiment(real_t, fakes, codec, reg, dt_args.threshold);
    fs::create_directories(dt_args.out);
    std::ofstream rf(fs::path(dt_args.out) / "detection_report.json");
    rf << rep.to_json() << "\n";
    write_run_report(dt_args.out, "detect",
                     {{"codec", dt_args.codec},
                      {"registry", dt_args.registry},
                      {"threshold", dt_args.threshold}},
                     json::parse(rep.to_json()));
    std::cout << "detection acc " << rep.accuracy << " (" << rep.num_real << " real, "
              << rep.num_fake << " fake; FP " << rep.false_positive << ", FN "
              << rep.false_negative << ")\n";
  });

  // ---- attribute -----------------------------------------------------------
  auto* at = app.add_subcommand("attribute", "multi-source attribution over labeled folders");
  struct {
    std::string codec, registry, out = cache_fallback("attribute_report");
    std::vector<std::string> sets;  // label:folder
    double threshold = 0.75;
  } at_args;
  at->add_option("--codec", at_args.codec)->required();
  at->add_option("--registry", at_args.registry)->required();
  at->add_option("--set", at_args.sets, "label:folder (label 'unknown' for unregistered)")
      ->required();
  at->add_option("--threshold", at_args.threshold);
  at->add_option("--out", at_args.out);
  at->callback([&] {
    CodecCheckpoint codec = CodecCheckpoint::load(at_args.codec);
    Registry reg = Registry::load(at_args.registry);
    const auto& cfg = codec.config();
    std::vector<std::pair<std::string, Tensor>> labeled;
    for (const auto& s : at_args.sets) {
      auto colon = s.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("--set expects label:folder, got " + s);
      }
      ImageDataset ds = ingest_folder(s.substr(colon + 1), cfg.resolution, cfg.channels);
      labeled.emplace_back(s.substr(0, colon), ds.to_float_range(0, ds.count()));
    }
    AttributionReport rep = attribution_experiment(labeled, codec, reg, at_args.threshold);
    fs::create_directories(at_args.out);
    std::ofstream rf(fs::path(at_args.out) / "attribution_report.json");
    rf << rep.to_json() << "\n";
    write_run_report(at_args.out, "attribute",
                     {{"codec", at_args.codec}, {"registry", at_args.registry}},
                     json::parse(rep.to_json()));
    std::cout << "attribution acc " << rep.accuracy << ", unknown rate "
              << rep.unknown_rate_for_unregistered << "\n";
  });

  // ---- bench-image -----------------------------------------------------------
  auto* bi = app.add_subcommand("bench-image", "image-perturbation robustness sweep");
  struct {
    std::string codec, fingerprint_hex, images, reference, out = cache_fallback("bench_image"), kind =
        "gaussian_noise";
    std::vector<double> grid;
    uint64_t seed = 1;
    double threshold = 0.75;
  } bi_args;
  bi->add_option("--codec", bi_args.codec)->required();
  bi->add_option("--fingerprint", bi_args.fingerprint_hex)->required();
  bi->add_option("--images", bi_args.images, "generated images folder")->required();
  bi->add_option("--reference", bi_args.reference, "fingerprinted real images folder")
      ->required();
  bi->add_option("--kind", bi_args.kind);
  bi->add_option("--grid", bi_args.grid, "magnitudes (default: published axes)");
  bi->add_option("--seed", bi_args.seed);
  bi->add_option("--threshold", bi_args.threshold);
  bi->add_option("--out", bi_args.out);
  bi->callback([&] {
    CodecCheckpoint codec = CodecCheckpoint::load(bi_args.codec);
    const auto& cfg = codec.config();
    Fingerprint fp = Fingerprint::from_hex(bi_args.fingerprint_hex, cfg.fingerprint_len);
    PerturbKind kind = perturb_kind_from_name(bi_args.kind);
    ImageDataset gen = ingest_folder(bi_args.images, cfg.resolution, cfg.channels);
    ImageDataset ref = ingest_folder(bi_args.reference, cfg.resolution, cfg.channels);
    std::vector<double> grid =
        bi_args.grid.empty() ? default_grid(kind, cfg.resolution) : bi_args.grid;
    SweepResult sweep =
        sweep_image(gen.to_float_range(0, gen.count()), codec, fp, kind, grid,
                    ref.to_float_range(0, ref.count()), bi_args.seed);
    fs::create_directories(bi_args.out);
    std::ofstream sf(fs::path(bi_args.out) / (bi_args.kind + "_sweep.json"));
    sf << sweep.to_json() << "\n";
    emit_plot(sweep, (fs::path(bi_args.out) / (bi_args.kind + ".svg")).string(),
              bi_args.threshold);
    WorkingRange wr = working_range(sweep, bi_args.threshold);
    write_run_report(bi_args.out, "bench-image",
                     {{"kind", bi_args.kind}, {"grid", grid}, {"seed", bi_args.seed}},
                     {{"sweep", json::parse(sweep.to_json())},
                      {"working_range",
                       wr.empty ? json(nullptr) : json(std::vector<double>{wr.lo, wr.hi})}});
    std::cout << bi_args.kind << " working range: ";
    if (wr.empty) {
      std::cout << "(empty)\n";
    } else {
      std::cout << "[" << wr.lo << ", " << wr.hi << "]\n";
    }
  });

  // ---- bench-model -----------------------------------------------------------
  auto* bm = app.add_subcommand("bench-model", "model-perturbation robustness sweep");
  struct {
    std::string gan, codec, fingerprint_hex, quality_ref, out = cache_fallback("bench_model"),
                                                          kind = "weight_noise";
    std::vector<double> grid;
    int samples = 256;
    uint64_t seed = 1;
    double threshold = 0.75;
  } bm_args;
  bm->add_option("--gan", bm_args.gan)->required();
  bm->add_option("--codec", bm_args.codec)->required();
  bm->add_option("--fingerprint", bm_args.fingerprint_hex)->required();
  bm->add_option("--quality-ref", bm_args.quality_ref, "training images for the proxy")
      ->required();
  bm->add_option("--kind", bm_args.kind);
  bm->add_option("--grid", bm_args.grid);
  bm->add_option("--samples", bm_args.samples);
  bm->add_option("--seed", bm_args.seed);
  bm->add_option("--threshold", bm_args.threshold);
  bm->add_option("--out", bm_args.out);
  bm->callback([&] {
    GanCheckpoint gan = GanCheckpoint::load(bm_args.gan);
    CodecCheckpoint codec = CodecCheckpoint::load(bm_args.codec);
    const auto& cfg = codec.config();
    Fingerprint fp = Fingerprint::from_hex(bm_args.fingerprint_hex, cfg.fingerprint_len);
    PerturbKind kind = perturb_kind_from_name(bm_args.kind);
    ImageDataset qref = ingest_folder(bm_args.quality_ref, cfg.resolution, cfg.channels);
    std::vector<double> grid =
        bm_args.grid.empty() ? default_grid(kind, cfg.resolution) : bm_args.grid;
    SweepResult sweep =
        sweep_model(gan, codec, fp, kind, grid, bm_args.samples, qref, bm_args.seed);
    fs::create_directories(bm_args.out);
    std::ofstream sf(fs::path(bm_args.out) / (bm_args.kind + "_sweep.json"));
    sf << sweep.to_json() << "\n";
    emit_plot(sweep, (fs::path(bm_args.out) / (bm_args.kind + ".svg")).string(),
              bm_args.threshold);
    WorkingRange wr = working_range(sweep, bm_args.threshold);
    write_run_report(bm_args.out, "bench-model",
                     {{"kind", bm_args.kind}, {"grid", grid}, {"seed", bm_args.seed}},
                     {{"sweep", json::parse(sweep.to_json())},
                      {"working_range",
                       wr.empty ? json(nullptr) : json(std::vector<double>{wr.lo, wr.hi})}});
    std::cout << bm_args.kind << " sweep done\n";
  });

  // ---- attack-ats -----------------------------------------------------------
  auto* aa = app.add_subcommand("attack-ats", "artificial-training-sets secrecy attack");
  struct {
    std::string shadow, positives, negatives, out = cache_fallback("ats_report");
    uint64_t seed = 1;
  } aa_args;
  aa->add_option("--shadow", aa_args.shadow, "shadow codec checkpoint")->required();
  aa->add_option("--positives", aa_args.positives, "fingerprinted test images")->required();
  aa->add_option("--negatives", aa_args.negatives, "clean test images")->required();
  aa->add_option("--seed", aa_args.seed);
  aa->add_option("--out", aa_args.out);
  aa->callback([&] {
    CodecCheckpoint shadow = CodecCheckpoint::load(aa_args.shadow);
    const auto& cfg = shadow.config();
    ImageDataset pos = ingest_folder(aa_args.positives, cfg.resolution, cfg.channels);
    ImageDataset neg = ingest_folder(aa_args.negatives, cfg.resolution, cfg.channels);
    Tensor pt = pos.to_float_range(0, pos.count());
    Tensor nt = neg.to_float_range(0, neg.count());
    Tensor all({pos.count() + neg.count(), cfg.channels, cfg.resolution, cfg.resolution});
    std::copy(pt.data.begin(), pt.data.end(), all.data.begin());
    std::copy(nt.data.begin(), nt.data.end(), all.data.begin() + pt.numel());
    std::vector<int> labels(static_cast<size_t>(pos.count()), 1);
    labels.insert(labels.end(), static_cast<size_t>(neg.count()), 0);
    fs::create_directories(aa_args.out);
    AtsReport rep = ats_attack(all, labels, shadow, aa_args.seed,
                               (fs::path(aa_args.out) / "ats_svm.yaml").string());
    std::ofstream rf(fs::path(aa_args.out) / "ats_report.json");
    rf << rep.to_json() << "\n";
    write_run_report(aa_args.out, "attack-ats",
                     {{"shadow", aa_args.shadow}, {"seed", aa_args.seed}},
                     json::parse(rep.to_json()));
    std::cout << "ATS attack accuracy " << rep.accuracy << "\n";
  });

  // ---- lsb-control -----------------------------------------------------------
  auto* lc = app.add_subcommand("lsb-control", "conventional-steganography LSB control");
  struct {
    std::string data, out, fingerprint_hex;
    int64_t fingerprint_seed = -1;
    int resolution = 32;
    int channels = 3;
    int fingerprint_len = 100;
    bool overwrite = false;
  } lc_args;
  lc->add_option("--data", lc_args.data)->required();
  lc->add_option("--out", lc_args.out)->required();
  lc->add_option("--fingerprint", lc_args.fingerprint_hex);
  lc->add_option("--fingerprint-seed", lc_args.fingerprint_seed);
  lc->add_option("--fingerprint-len", lc_args.fingerprint_len);
  lc->add_option("--resolution", lc_args.resolution);
  lc->add_option("--channels", lc_args.channels);
  lc->add_flag("--overwrite", lc_args.overwrite);
  lc->callback([&] {
    ImageDataset ds = ingest_folder(lc_args.data, lc_args.resolution, lc_args.channels);
    Fingerprint fp = resolve_fingerprint(lc_args.fingerprint_hex, lc_args.fingerprint_seed,
                                         lc_args.fingerprint_len);
    DatasetManifest m = lsb_embed_baseline(ds, fp, lc_args.out, lc_args.overwrite);
    // Roundtrip check on the saved files.
    ImageDataset back = load_manifest_images(m, lc_args.resolution, lc_args.channels);
    double acc_sum = 0;
    for (int i = 0; i < back.count(); ++i) {
      acc_sum += bitwise_accuracy(lsb_decode(back, i, fp.n()), fp);
    }
    double rt = acc_sum / back.count();
    write_run_report(lc_args.out, "lsb-control",
                     {{"fingerprint_hex", fp.to_hex()},
                      {"resolution", lc_args.resolution}},
                     {{"records", m.records.size()}, {"roundtrip_accuracy", rt}},
                     {{"data_dir", lc_args.data}});
    std::cout << "lsb control: " << m.records.size() << " images, roundtrip acc " << rt
              << "\n";
  });

  // ---- registry -----------------------------------------------------------
  auto* rg = app.add_subcommand("registry", "manage the fingerprint registry");
  auto* rga = rg->add_subcommand("add", "register a model fingerprint");
  struct {
    std::string file, model_id, fingerprint_hex, codec;
    int64_t fingerprint_seed = -1;
    int n = 100;
    double threshold = 0.75;
  } rga_args;
  rga->add_option("--registry", rga_args.file)->required();
  rga->add_option("--model-id", rga_args.model_id)->required();
  rga->add_option("--fingerprint", rga_args.fingerprint_hex);
  rga->add_option("--fingerprint-seed", rga_args.fingerprint_seed);
  rga->add_option("--n", rga_args.n);
  rga->add_option("--codec", rga_args.codec, "codec checkpoint (for its content id)");
  rga->add_option("--threshold", rga_args.threshold);
  rga->callback([&] {
    Registry reg = fs::exists(rga_args.file) ? Registry::load(rga_args.file) : Registry();
    Fingerprint fp =
        resolve_fingerprint(rga_args.fingerprint_hex, rga_args.fingerprint_seed, rga_args.n);
    std::string codec_id = "unspecified";
    if (!rga_args.codec.empty()) {
      codec_id = CodecCheckpoint::load(rga_args.codec).codec_id();
    }
    reg.register_model(rga_args.model_id, fp, codec_id, rga_args.threshold);
    reg.save(rga_args.file);
    std::cout << "registered '" << rga_args.model_id << "' (" << reg.size()
              << " entries total)\n";
  });
  auto* rgl = rg->add_subcommand("list", "list registry entries");
  std::string rgl_file;
  rgl->add_option("--registry", rgl_file)->required();
  rgl->callback([&] {
    Registry reg = Registry::load(rgl_file);
    for (const auto& e : reg.entries()) {
      std::cout << e.model_id << "  n=" << e.fingerprint.n() << "  fp=" << e.fingerprint.to_hex()
                << "  codec=" << e.codec_id.substr(0, 12) << "  " << e.created_at << "\n";
    }
    std::cout << reg.size() << " entries\n";
  });
  rg->require_subcommand(1);

  // ---- sample -----------------------------------------------------------
  auto* sm = app.add_subcommand("sample", "generate images from a trained model");
  struct {
    std::string gan, out;
    int count = 64;
    uint64_t seed = 1;
  } sm_args;
  sm->add_option("--gan", sm_args.gan)->required();
  sm->add_option("--out", sm_args.out)->required();
  sm->add_option("--count", sm_args.count);
  sm->add_option("--seed", sm_args.seed);
  sm->callback([&] {
    GanCheckpoint gan = GanCheckpoint::load(sm_args.gan);
    Tensor imgs = sample(gan, sm_args.count, sm_args.seed);
    save_samples_png(imgs, sm_args.out, "sample");
    write_run_report(sm_args.out, "sample",
                     {{"gan", sm_args.gan}, {"count", sm_args.count}, {"seed", sm_args.seed}},
                     {{"written", sm_args.count}, {"model_id", gan.model_id}});
    std::cout << "wrote " << sm_args.count << " samples to " << sm_args.out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);      // prints usage/help
    return code == 0 ? 0 : 1;    // any parse failure is a validation error
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
