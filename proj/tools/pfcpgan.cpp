// pfcpgan <generate|train|eval|ablate|reconstruct> [flags]
//
// Exit codes: 0 success, 2 configuration, 3 I/O, 4 numeric abort, 5 protocol violation.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pfcpgan/pfcpgan.hpp"

namespace fs = std::filesystem;
using namespace pfcpgan;

namespace {

enum Exit { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4, kProtocol = 5 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> precision;
  bool force = false;
  std::string out;
  std::string data;
  bool plot = false;
};

RunConfig resolve_config(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) {
    rc.data.seed = *c.seed;
    rc.train.seed = *c.seed;
    rc.eval.folds.seed = *c.seed;
  }
  rc.sync();
  rc.validate();
  return rc;
}

fs::path output_dir(const Common& c, const char* command) {
  if (!c.out.empty()) return c.out;
  if (const char* root = std::getenv("PFCPGAN_RUN_ROOT"); root && *root) return fs::path(root) / command;
  throw ConfigError("--out not given and PFCPGAN_RUN_ROOT is not set");
}

// Refuses to reuse a non-empty directory unless forced.
void prepare_out(const fs::path& out, bool force) {
  std::error_code ec;
  if (fs::exists(out, ec) && !fs::is_directory(out, ec)) throw IoError(out.string() + ": exists and is not a directory");
  if (fs::exists(out, ec) && !fs::is_empty(out, ec) && !force)
    throw IoError(out.string() + ": directory is not empty (use --force)");
  fs::create_directories(out, ec);
  if (ec) throw IoError(out.string() + ": cannot create directory: " + ec.message());
}

std::string dataset_digest(std::span<const ImageSample> data) {
  std::string buf;
  for (const auto& s : data) {
    buf += std::to_string(s.subject_id) + "/" + domain_name(s.domain) + "/" + format_yaw(s.yaw_deg) + ":";
    for (float p : s.pixels) buf += char(to_byte(p));
  }
  return "sha256:" + sha256_hex(buf.data(), buf.size());
}

// Dataset from --data, or synthesized from the [data] section.
Dataset obtain_dataset(const Common& c, const RunConfig& rc) {
  if (c.data.empty()) return generate_synthetic_dataset(rc.data);
  Dataset d = load_dataset(c.data, rc.data.image_size);
  if (d.empty()) throw DataError(c.data + ": dataset is empty");
  return d;
}

int precision_of(const Common& c) {
  const int p = c.precision.value_or(32);
  if (p != 32 && p != 64) throw ConfigError("--precision must be 32 or 64");
  return p;
}

template <typename Fn>
auto dispatch(int precision, Fn&& fn) {
  if (precision == 64) return fn(double{});
  return fn(float{});
}

int precision_of_checkpoint(const Common& c, const fs::path& ckpt) {
  const std::string dtype = checkpoint_dtype(ckpt);
  const int p = dtype == "float64" ? 64 : 32;
  if (c.precision && *c.precision != p)
    throw ConfigError("--precision " + std::to_string(*c.precision) + " does not match checkpoint dtype " + dtype);
  return p;
}

// Simple ROC rendering: white background, curve in black, diagonal in grey.
void plot_roc(const fs::path& path, const RocCurve& roc) {
  constexpr int kSize = 256;
  Image8 im{kSize, kSize, 1, std::vector<unsigned char>(kSize * kSize, 255)};
  auto dot = [&](double fx, double gy, unsigned char v) {
    const int x = std::clamp(int(std::lround(fx * (kSize - 1))), 0, kSize - 1);
    const int y = std::clamp(int(std::lround((1.0 - gy) * (kSize - 1))), 0, kSize - 1);
    im.bytes[std::size_t(y) * kSize + std::size_t(x)] = v;
  };
  auto line = [&](double x0, double y0, double x1, double y1, unsigned char v) {
    for (int i = 0; i <= 4 * kSize; ++i) {
      const double t = double(i) / (4 * kSize);
      dot(x0 + t * (x1 - x0), y0 + t * (y1 - y0), v);
    }
  };
  line(0, 0, 1, 1, 180);
  for (std::size_t i = 0; i + 1 < roc.points.size(); ++i)
    line(roc.points[i].far, roc.points[i].gar, roc.points[i + 1].far, roc.points[i + 1].gar, 0);
  write_png(path, im);
}

int cmd_generate(const Common& c) {
  const RunConfig rc = resolve_config(c);
  const fs::path out = output_dir(c, "data");
  prepare_out(out, c.force);
  const Dataset d = generate_synthetic_dataset(rc.data);
  export_dataset(out, d);
  Json meta;
  meta["generator"] = "synthetic-glyphs";
  meta["spec"] = to_json(rc.data);
  meta["seed"] = rc.data.seed;
  meta["n_samples"] = d.size();
  meta["digest"] = dataset_digest(d);
  write_text_file(out / "dataset_meta.json", meta.dump(2) + "\n");
  std::cout << "wrote " << d.size() << " images for " << rc.data.n_subjects << " subjects to " << out.string() << "\n";
  return kOk;
}

struct TrainFlags {
  std::string resume;
  std::optional<std::int64_t> max_steps;
  std::string preset;
};

int cmd_train(const Common& c, const TrainFlags& f) {
  RunConfig rc = resolve_config(c);
  if (f.max_steps) rc.train.max_steps = *f.max_steps;
  if (!f.preset.empty()) rc.train.ablation_preset = parse_preset(f.preset);
  rc.validate();
  const fs::path out = output_dir(c, "train");
  if (f.resume.empty())
    prepare_out(out, c.force);
  else
    fs::create_directories(out);

  const Dataset data = obtain_dataset(c, rc);
  const int precision = f.resume.empty() ? precision_of(c) : precision_of_checkpoint(c, f.resume);

  return dispatch(precision, [&]<typename T>(T) {
    TrainOptions opts;
    opts.out_dir = out;
    opts.on_log = [](const TrainLogRecord& r) {
      std::cout << "step " << r.step << " l_cpl " << r.losses.l_cpl << " total " << r.losses.total << "\n";
    };
    TrainResult<T> r;
    TrainConfig cfg = rc.train;
    if (f.resume.empty()) {
      write_text_file(out / "config.ini", to_ini(rc));
      r = train<T>(data, rc.model, cfg, opts);
    } else {
      LoadedCheckpoint<T> ck = load_checkpoint<T>(f.resume);
      // Everything but the stopping point comes from the checkpoint.
      const std::int64_t until = cfg.max_steps;
      cfg = ck.train_config;
      cfg.max_steps = until;
      rc.train = cfg;
      rc.model = ck.state.config;
      write_text_file(out / "config.ini", to_ini(rc));
      r = train_from(std::move(ck.state), std::move(ck.optimizer), data, cfg, opts);
    }
    Json meta;
    meta["precision"] = precision;
    meta["seeds"] = {{"data", rc.data.seed}, {"train", cfg.seed}, {"model", r.state.seeds.model},
                     {"folds", rc.eval.folds.seed}};
    meta["data"] = c.data.empty() ? std::string("synthetic") : c.data;
    meta["data_digest"] = dataset_digest(data);
    meta["resumed_from"] = f.resume;
    meta["final_step"] = r.state.step;
    Json ckpts = Json::array();
    for (const auto& p : r.checkpoints) ckpts.push_back(fs::relative(p, out).string());
    meta["checkpoints"] = ckpts;
    write_text_file(out / "run_meta.json", meta.dump(2) + "\n");
    std::cout << "trained to step " << r.state.step << "; run directory " << out.string() << "\n";
    return int(kOk);
  });
}

struct EvalFlags {
  std::string ckpt;
  std::string protocol = "folds";
  bool holdout = false;
};

int cmd_eval(const Common& c, const EvalFlags& f) {
  const RunConfig rc = resolve_config(c);
  const fs::path out = output_dir(c, "eval");
  prepare_out(out, c.force);
  const Dataset data = obtain_dataset(c, rc);
  const int precision = precision_of_checkpoint(c, f.ckpt);
  return dispatch(precision, [&]<typename T>(T) {
    const LoadedCheckpoint<T> ck = load_checkpoint<T>(f.ckpt);
    const auto& s = ck.state;
    std::vector<int> subjects = subjects_of(data);
    if (f.holdout) subjects = make_holdout_split(data, rc.eval).fold.test_subjects;

    if (f.protocol == "folds" && f.holdout) {
      const HoldoutSplit split = make_holdout_split(data, rc.eval);
      const EvalReport rep = evaluate_fold(s, data, split.fold, rc.eval);
      const EvalReport reports[] = {rep};
      write_eval_report(out / "eval_report.csv", reports, {});
      write_roc(out / "roc.csv", rep.roc);
      if (c.plot) plot_roc(out / "roc.png", rep.roc);
      std::cout << "eer " << rep.eer << "\nauc " << rep.auc << "\n";
      return int(kOk);
    }
    if (f.protocol == "folds") {
      Rng rng(rc.eval.folds.seed);
      const Dataset scope = subset_by_subjects(data, subjects);
      const auto folds = build_folds(scope, rc.eval.folds, rng);
      const FoldSummary fs_ = evaluate_folds(s, scope, folds, rc.eval);
      write_eval_report(out / "eval_report.csv", fs_.reports, fs_.summary);
      std::vector<ScoredPair> pooled;
      for (const auto& fold : folds) {
        const auto sc = score_pairs(s, scope, fold.test_pairs, rc.eval.scorer);
        pooled.insert(pooled.end(), sc.begin(), sc.end());
      }
      const RocCurve roc = roc_from_scored(pooled);
      write_roc(out / "roc.csv", roc);
      if (c.plot) plot_roc(out / "roc.png", roc);
      for (const auto& [name, ms] : fs_.summary)
        if (name == "eer" || name == "auc") std::cout << name << " " << ms.mean << " +- " << ms.std << "\n";
      return int(kOk);
    }
    if (f.protocol != "identify" && f.protocol != "yaw")
      throw ConfigError("--protocol must be folds, identify or yaw");

    const auto gallery = gallery_indices(data, subjects);
    const auto probes = profile_indices(data, subjects);
    if (probes.empty()) throw ProtocolError("no profile probes in the evaluation data");
    const IdentificationResult id = identify(s, data, gallery, probes, rc.eval.ks, rc.eval.scorer);

    // Every probe against every gallery entry, genuine when the subjects agree.
    std::vector<ScoredPair> all;
    std::vector<PairExample> pairs;
    for (std::size_t p : probes)
      for (std::size_t g : gallery) pairs.push_back({p, g, data[p].subject_id == data[g].subject_id ? 0 : 1});
    all = score_pairs(s, data, pairs, rc.eval.scorer);
    EvalReport rep = verification_report(roc_from_scored(all), rc.eval.far_targets);
    rep.rank_k = id.rank_k;
    if (f.protocol == "yaw") {
      const auto bins = evaluate_by_yaw(s, data, gallery, probes, rc.eval.yaw_bins, rc.eval.scorer);
      std::map<double, double> per;
      for (const auto& [edge, b] : bins) per[edge] = b.rank1;
      rep.per_yaw_rank1 = per;
      write_yaw_rank1(out / "yaw_rank1.csv", bins, rc.eval.yaw_bins);
    }
    const EvalReport reports[] = {rep};
    write_eval_report(out / "eval_report.csv", reports, {});
    write_roc(out / "roc.csv", rep.roc);
    if (c.plot) plot_roc(out / "roc.png", rep.roc);
    for (const auto& [k, v] : rep.rank_k) std::cout << "rank" << k << " " << v << "\n";
    return int(kOk);
  });
}

int cmd_ablate(const Common& c, std::optional<std::int64_t> max_steps) {
  RunConfig rc = resolve_config(c);
  if (max_steps) rc.train.max_steps = *max_steps;
  rc.validate();
  const fs::path out = output_dir(c, "ablate");
  prepare_out(out, c.force);
  const Dataset data = obtain_dataset(c, rc);
  write_text_file(out / "config.ini", to_ini(rc));
  return dispatch(precision_of(c), [&]<typename T>(T) {
    const auto results = run_ablation_suite<T>(data, rc, out);
    write_ablation_csv(out / "ablation.csv", results);
    for (const auto& [preset, e] : results) {
      const EvalReport reports[] = {e.report};
      write_eval_report(out / (std::string("eval_report_") + preset_name(preset) + ".csv"), reports, {});
      if (c.plot) plot_roc(out / (std::string("roc_") + preset_name(preset) + ".png"), e.report.roc);
      std::cout << preset_name(preset) << " eer " << e.report.eer << " auc " << e.report.auc << "\n";
    }
    return int(kOk);
  });
}

struct ReconFlags {
  std::string ckpt;
  std::string direction = "p2f";
  int count = 4;
  bool zero_skips = false;
};

int cmd_reconstruct(const Common& c, const ReconFlags& f) {
  const RunConfig rc = resolve_config(c);
  if (f.direction != "p2f" && f.direction != "f2p") throw ConfigError("--direction must be p2f or f2p");
  if (f.count < 1) throw ConfigError("--count must be >= 1");
  const Domain source = f.direction == "p2f" ? Domain::kProfile : Domain::kFrontal;
  const Domain target = source == Domain::kProfile ? Domain::kFrontal : Domain::kProfile;
  const fs::path out = output_dir(c, "reconstruct");
  prepare_out(out, c.force);
  const Dataset data = obtain_dataset(c, rc);

  std::vector<std::size_t> inputs;
  std::map<int, std::size_t> reference;  // first target-domain sample per subject
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].domain == source && int(inputs.size()) < f.count) inputs.push_back(i);
    if (data[i].domain == target && !reference.count(data[i].subject_id)) reference[data[i].subject_id] = i;
  }
  if (inputs.empty())
    throw ProtocolError(std::string("no ") + domain_name(source) + " images to reconstruct from in the data");

  return dispatch(precision_of_checkpoint(c, f.ckpt), [&]<typename T>(T) {
    const LoadedCheckpoint<T> ck = load_checkpoint<T>(f.ckpt);
    std::vector<std::vector<float>> in_px, rec_px;
    std::ofstream mse(out / "recon_mse.csv");
    if (!mse) throw IoError((out / "recon_mse.csv").string() + ": cannot open for writing");
    mse << "sample_id,subject_id,mse\n";
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i : inputs) {
      const ImageSample& s = data[i];
      in_px.push_back(s.pixels);
      rec_px.push_back(cross_reconstruct<T>(ck.state, s, target, f.zero_skips || rc.eval.zero_skips));
      auto ref = reference.find(s.subject_id);
      if (ref == reference.end()) continue;
      const double e = mean_squared_error(rec_px.back(), data[ref->second].pixels);
      mse << s.sample_id << "," << s.subject_id << "," << detail::num(e) << "\n";
      total += e;
      ++n;
    }
    if (n > 0) mse << "mean,," << detail::num(total / double(n)) << "\n";
    if (!mse.flush()) throw IoError((out / "recon_mse.csv").string() + ": write failed");
    constexpr std::size_t kPerPanel = 4;
    for (std::size_t p = 0; p * kPerPanel < in_px.size(); ++p) {
      const std::size_t b = p * kPerPanel, e = std::min(in_px.size(), b + kPerPanel);
      char name[64];
      std::snprintf(name, sizeof name, "panel_%03zu.png", p);
      write_png(out / name, make_panel(data[inputs[0]].shape, std::span(in_px).subspan(b, e - b),
                                       std::span(rec_px).subspan(b, e - b)));
    }
    std::cout << "reconstructed " << inputs.size() << " images into " << out.string() << "\n";
    return int(kOk);
  });
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Coupled profile/frontal GAN: data generation, training, evaluation"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--config,config", c.config, "Run configuration (INI)");
    sub->add_option("--seed", c.seed, "Overrides every seed in the config");
    sub->add_option("--precision", c.precision, "Arithmetic width: 32 or 64");
    sub->add_option("--out", c.out, "Output directory (default $PFCPGAN_RUN_ROOT/<command>)");
    sub->add_flag("--force", c.force, "Write into a non-empty output directory");
    if (with_data) sub->add_option("--data", c.data, "Dataset directory (default: synthesize from [data])");
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, false);

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, true);
  tr->add_option("--resume", tf.resume, "Checkpoint directory to continue from");
  tr->add_option("--max-steps", tf.max_steps, "Total number of steps to reach");
  tr->add_option("--preset", tf.preset, "cpl_l2 | cpl_l2_gan | full");

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, true);
  ev->add_option("--ckpt", ef.ckpt, "Checkpoint directory")->required();
  ev->add_option("--protocol", ef.protocol, "folds | identify | yaw");
  ev->add_flag("--holdout", ef.holdout, "Evaluate only the held-out fold's subjects");
  ev->add_flag("--plot", c.plot, "Also render roc.png");

  std::optional<std::int64_t> ablate_steps;
  auto* ab = app.add_subcommand("ablate", "Train and compare the three loss presets");
  add_common(ab, true);
  ab->add_option("--max-steps", ablate_steps, "Steps per preset");
  ab->add_flag("--plot", c.plot, "Also render per-preset ROC images");

  ReconFlags rf;
  auto* rc = app.add_subcommand("reconstruct", "Cross-domain reconstruction panels");
  add_common(rc, true);
  rc->add_option("--ckpt", rf.ckpt, "Checkpoint directory")->required();
  rc->add_option("--direction", rf.direction, "p2f | f2p");
  rc->add_option("--count", rf.count, "Number of input images");
  rc->add_flag("--zero-skips", rf.zero_skips, "Decode from the bottleneck only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(c);
    if (tr->parsed()) return cmd_train(c, tf);
    if (ev->parsed()) return cmd_eval(c, ef);
    if (ab->parsed()) return cmd_ablate(c, ablate_steps);
    if (rc->parsed()) return cmd_reconstruct(c, rf);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IngestionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kIo;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kProtocol;
  }
  return kOk;
}
