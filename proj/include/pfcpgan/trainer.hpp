#pragma once

// Coupled training loop. One step = one discriminator update per domain on the
// current generator outputs, then one Adam update of both generators on
//   l_cpl + lambda_1 (gan_pr + gan_fr) + lambda_2 (perc_pr + perc_fr) + lambda_3 (l2_pr + l2_fr)
// with terms disabled by the ablation preset contributing exactly zero.
//
// Determinism: everything runs on one thread, batches are drawn from a stream
// keyed by (seed, step), and every reduction has a fixed order, so a run is a
// pure function of (seed, data, config, precision, build). Resuming from a
// checkpoint reproduces the uninterrupted run bit for bit.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "pfcpgan/checkpoint.hpp"
#include "pfcpgan/config.hpp"
#include "pfcpgan/data.hpp"
#include "pfcpgan/losses.hpp"
#include "pfcpgan/networks.hpp"
#include "pfcpgan/optim.hpp"
#include "pfcpgan/rng.hpp"

namespace pfcpgan {

inline constexpr const char* kTrainLogHeader = "step,l_cpl,l_gan_pr,l_gan_fr,l_l2,l_perc,total,d_loss_pr,d_loss_fr,seconds";

struct TrainLogRecord {
  std::int64_t step = 0;
  LossBreakdown losses;
  double seconds = 0.0;
  int n_genuine = 0;
  int n_impostor = 0;
};

inline std::string format_log_row(const TrainLogRecord& r) {
  char buf[512];
  const auto& l = r.losses;
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", (long long)r.step, l.l_cpl,
                l.l_gan_profile, l.l_gan_frontal, l.l_l2, l.l_perceptual, l.total, l.d_loss_profile, l.d_loss_frontal,
                r.seconds);
  return buf;
}

/// Generator forward pass of one domain, kept for the backward pass.
template <typename T>
struct DomainForward {
  Encoding<T> encoding;
  DecoderTape<T> tape;

  const Tensor<T>& output() const { return tape.output; }
};

template <typename T>
DomainForward<T> forward_domain(const Generator<T>& g, const Tensor<T>& x) {
  DomainForward<T> f;
  f.encoding = encode(g, x);
  decode(g, f.encoding.embedding, f.encoding.batch, f.encoding.skips, &f.tape);
  return f;
}

/// Frozen-network features of every dataset image, computed once per run in
/// fixed-size chunks so the values never depend on batch composition.
template <typename T>
class PerceptualTargets {
 public:
  PerceptualTargets() = default;
  PerceptualTargets(const PerceptualNet<T>& p, std::span<const ImageSample> samples) {
    constexpr std::size_t kChunk = 64;
    for (std::size_t s = 0; s < samples.size(); s += kChunk) {
      std::vector<const ImageSample*> ptrs;
      for (std::size_t i = s; i < std::min(samples.size(), s + kChunk); ++i) ptrs.push_back(&samples[i]);
      const Tensor<T> f = perceptual_features(p, to_tensor<T>(ptrs));
      per_ = f.sample_size();
      c_ = f.c();
      h_ = f.h();
      w_ = f.w();
      values_.insert(values_.end(), f.data(), f.data() + f.size());
    }
  }

  bool empty() const { return values_.empty(); }

  Tensor<T> gather(std::span<const std::size_t> indices) const {
    Tensor<T> out(int(indices.size()), c_, h_, w_);
    for (std::size_t i = 0; i < indices.size(); ++i)
      std::copy_n(values_.data() + indices[i] * per_, per_, out.sample(int(i)));
    return out;
  }

 private:
  std::vector<T> values_;
  std::size_t per_ = 0;
  int c_ = 0, h_ = 0, w_ = 0;
};

/// Gradients of both generators.
template <typename T>
struct GeneratorGrads {
  ParamSet<T> profile;
  ParamSet<T> frontal;
};

/// Generator-side objective at fixed discriminators. Returns the loss terms
/// (masked by preset) and, when grads is non-null, accumulates their gradients.
/// Target features may be null, in which case they are computed from x.
template <typename T>
LossTerms generator_objective(const ModelState<T>& s, const Tensor<T>& x_pr, const Tensor<T>& x_fr,
                              const DomainForward<T>& f_pr, const DomainForward<T>& f_fr, std::span<const int> labels,
                              const LossConfig& lc, AblationPreset preset,
                              const std::type_identity_t<Tensor<T>>* target_pr,
                              const std::type_identity_t<Tensor<T>>* target_fr,
                              std::type_identity_t<GeneratorGrads<T>>* grads) {
  const int batch = x_pr.n();
  const int dim = s.config.embedding_dim;
  LossTerms terms;
  std::vector<T> dz_pr, dz_fr;
  if (grads) {
    dz_pr.assign(std::size_t(batch) * dim, T(0));
    dz_fr.assign(std::size_t(batch) * dim, T(0));
  }
  terms.l_cpl = double(coupling_loss<T>(f_pr.encoding.embedding, f_fr.encoding.embedding, labels, dim, T(lc.margin),
                                        lc.contrastive_form, dz_pr, dz_fr));

  auto domain = [&](const Generator<T>& g, const Discriminator<T>& d, const Tensor<T>& x, const DomainForward<T>& f,
                    const Tensor<T>* target, std::vector<T>& dz, ParamSet<T>* pg, double& l_gan, double& l_perc) {
    const Tensor<T>& out = f.output();
    Tensor<T> d_out = grads ? Tensor<T>(out.n(), out.c(), out.h(), out.w()) : Tensor<T>();
    auto accumulate = [&](const Tensor<T>& g_term, double w) {
      const T tw = T(w);
      for (std::size_t i = 0; i < d_out.size(); ++i) d_out.data()[i] += tw * g_term.data()[i];
    };

    Tensor<T> d_l2 = grads ? Tensor<T>(out.n(), out.c(), out.h(), out.w()) : Tensor<T>();
    terms.l_l2 += double(l2_reconstruction_loss(out, x, grads ? &d_l2 : nullptr));
    if (grads) accumulate(d_l2, lc.lambda_3);

    if (uses_gan(preset)) {
      DiscriminatorTape<T> tape;
      const Tensor<T> logits = discriminate(d, x, out, grads ? &tape : nullptr);
      l_gan = generator_adversarial_loss<T>(logits.values(), lc.gan_form);
      if (grads) {
        Tensor<T> dl(logits.n(), logits.c(), logits.h(), logits.w());
        generator_loss_grad<T>(logits.values(), lc.gan_form, dl.values());
        Tensor<T> d_cand;
        discriminate_backward(d, tape, dl, nullptr, &d_cand);
        accumulate(d_cand, lc.lambda_1);
      }
    }

    if (uses_perceptual(preset)) {
      PerceptualTape<T> tape;
      const Tensor<T> feat = perceptual_features(s.perceptual, out, grads ? &tape : nullptr);
      const Tensor<T> own_target = target ? Tensor<T>() : perceptual_features(s.perceptual, x);
      const Tensor<T>& tgt = target ? *target : own_target;
      Tensor<T> d_feat = grads ? Tensor<T>(feat.n(), feat.c(), feat.h(), feat.w()) : Tensor<T>();
      l_perc = double(feature_l1(feat, tgt, grads ? &d_feat : nullptr));
      terms.l_perceptual += l_perc;
      if (grads) accumulate(perceptual_backward(s.perceptual, tape, d_feat), lc.lambda_2);
    }

    if (grads) {
      std::vector<Tensor<T>> d_skips;
      std::vector<T> d_emb = decode_backward(g, f.tape, d_out, pg, &d_skips);
      for (std::size_t i = 0; i < d_emb.size(); ++i) d_emb[i] += dz[i];
      encode_backward(g, x, f.encoding, d_emb, d_skips, pg);
    }
  };

  double perc_pr = 0, perc_fr = 0;
  domain(s.gen_profile, s.disc_profile, x_pr, f_pr, target_pr, dz_pr, grads ? &grads->profile : nullptr,
         terms.l_gan_profile, perc_pr);
  domain(s.gen_frontal, s.disc_frontal, x_fr, f_fr, target_fr, dz_fr, grads ? &grads->frontal : nullptr,
         terms.l_gan_frontal, perc_fr);
  return terms;
}

/// Discriminator loss of one domain on (x, x) real and (x, fake) fake inputs;
/// accumulates its gradient into grads when non-null.
template <typename T>
double discriminator_objective(const Discriminator<T>& d, const Tensor<T>& x, const Tensor<T>& fake, GanForm form,
                               std::type_identity_t<ParamSet<T>>* grads) {
  DiscriminatorTape<T> tr, tf;
  const Tensor<T> real_logits = discriminate(d, x, x, grads ? &tr : nullptr);
  const Tensor<T> fake_logits = discriminate(d, x, fake, grads ? &tf : nullptr);
  const AdversarialLosses adv = adversarial_losses<T>(real_logits.values(), fake_logits.values(), form);
  if (grads) {
    Tensor<T> dr(real_logits.n(), 1, real_logits.h(), real_logits.w());
    Tensor<T> df(fake_logits.n(), 1, fake_logits.h(), fake_logits.w());
    discriminator_loss_grad<T>(real_logits.values(), fake_logits.values(), dr.values(), df.values());
    discriminate_backward(d, tr, dr, grads, nullptr);
    discriminate_backward(d, tf, df, grads, nullptr);
  }
  return adv.d_loss;
}

inline void check_balanced(std::span<const PairExample> batch) {
  std::size_t genuine = 0;
  for (const auto& p : batch) {
    if (p.label_y != 0 && p.label_y != 1) throw DataError("pair label must be 0 or 1");
    genuine += p.label_y == 0;
  }
  if (batch.empty() || 2 * genuine != batch.size())
    throw DataError("unbalanced batch: " + std::to_string(genuine) + " genuine of " + std::to_string(batch.size()));
}

/// One training step on an explicit batch of pairs indexing into `samples`.
/// Mutates state and optimizer states in place and returns the loss breakdown.
template <typename T>
LossBreakdown train_step(ModelState<T>& state, std::span<const ImageSample> samples, std::span<const PairExample> batch,
                         const TrainConfig& cfg, OptimizerStates<T>& opt,
                         const PerceptualTargets<T>* targets = nullptr) {
  check_balanced(batch);
  for (const auto& p : batch)
    if (p.profile >= samples.size() || p.frontal >= samples.size())
      throw DataError("pair index outside the dataset");
  const LossConfig& lc = cfg.loss_config;
  const AblationPreset preset = cfg.ablation_preset;

  std::vector<const ImageSample*> pp, fp;
  std::vector<std::size_t> pi, fi;
  std::vector<int> labels;
  for (const auto& p : batch) {
    pp.push_back(&samples[p.profile]);
    fp.push_back(&samples[p.frontal]);
    pi.push_back(p.profile);
    fi.push_back(p.frontal);
    labels.push_back(p.label_y);
  }
  const Tensor<T> x_pr = to_tensor<T>(pp);
  const Tensor<T> x_fr = to_tensor<T>(fp);

  // Generator parameters do not change during the discriminator update, so one
  // forward pass serves both halves of the step.
  const DomainForward<T> f_pr = forward_domain(state.gen_profile, x_pr);
  const DomainForward<T> f_fr = forward_domain(state.gen_frontal, x_fr);

  LossBreakdown out;
  if (uses_gan(preset)) {
    auto update = [&](Discriminator<T>& d, const Tensor<T>& x, const Tensor<T>& fake, AdamState<T>& st) {
      ParamSet<T> g = d.params.zeros_like();
      const double loss = discriminator_objective(d, x, fake, lc.gan_form, &g);
      if (!std::isfinite(loss)) throw NumericError("step " + std::to_string(state.step + 1) + ": non-finite d_loss");
      clip_global_norm(g, cfg.grad_clip);
      adam_step(d.params, g, st, cfg.adam());
      return loss;
    };
    out.d_loss_profile = update(state.disc_profile, x_pr, f_pr.output(), opt.disc_profile);
    out.d_loss_frontal = update(state.disc_frontal, x_fr, f_fr.output(), opt.disc_frontal);
  }

  std::optional<Tensor<T>> t_pr, t_fr;
  if (uses_perceptual(preset) && targets && !targets->empty()) {
    t_pr = targets->gather(pi);
    t_fr = targets->gather(fi);
  }
  GeneratorGrads<T> grads{state.gen_profile.params.zeros_like(), state.gen_frontal.params.zeros_like()};
  const LossTerms terms = generator_objective(state, x_pr, x_fr, f_pr, f_fr, labels, lc, preset,
                                              t_pr ? &*t_pr : nullptr, t_fr ? &*t_fr : nullptr, &grads);
  const LossBreakdown b = total_objective(terms, lc);
  out.l_cpl = b.l_cpl;
  out.l_gan_profile = b.l_gan_profile;
  out.l_gan_frontal = b.l_gan_frontal;
  out.l_l2 = b.l_l2;
  out.l_perceptual = b.l_perceptual;
  out.total = b.total;
  if (!out.finite()) throw NumericError("step " + std::to_string(state.step + 1) + ": non-finite loss " + format_log_row({std::int64_t(state.step + 1), out, 0.0, 0, 0}));

  clip_global_norm(grads.profile, cfg.grad_clip);
  clip_global_norm(grads.frontal, cfg.grad_clip);
  adam_step(state.gen_profile.params, grads.profile, opt.gen_profile, cfg.adam());
  adam_step(state.gen_frontal.params, grads.frontal, opt.gen_frontal, cfg.adam());
  state.step += 1;
  return out;
}

/// Batch used at a given (0-based) step; independent of every other step.
inline std::vector<PairExample> batch_for_step(const PairSampler& sampler, const TrainConfig& cfg, std::uint64_t step) {
  Rng rng(derive_seed(cfg.seed, {0x6261746368ULL, step}));
  return sampler.sample(cfg.batch_size, rng);
}

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing is written to disk
  std::function<void(const TrainLogRecord&)> on_log;
};

template <typename T>
struct TrainResult {
  ModelState<T> state;
  OptimizerStates<T> optimizer;
  std::vector<TrainLogRecord> logs;
  std::vector<std::filesystem::path> checkpoints;
};

namespace detail {

// Opens train_log.csv for appending. When resuming, rows after the resume step are dropped.
inline std::ofstream open_train_log(const std::filesystem::path& path, std::uint64_t resume_step) {
  std::vector<std::string> keep;
  if (resume_step > 0 && std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoull(line.substr(0, line.find(','))) <= resume_step) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << kTrainLogHeader << "\n";
  for (const auto& l : keep) out << l << "\n";
  out.flush();
  return out;
}

inline std::filesystem::path checkpoint_dir(const std::filesystem::path& out_dir, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08llu", (unsigned long long)step);
  return out_dir / "checkpoints" / buf;
}

}  // namespace detail

/// Continues training `state` until cfg.max_steps steps have been completed in total.
template <typename T>
TrainResult<T> train_from(ModelState<T> state, OptimizerStates<T> opt, std::span<const ImageSample> dataset,
                          const TrainConfig& cfg, const TrainOptions& options = {}) {
  cfg.validate();
  TrainResult<T> r{std::move(state), std::move(opt), {}, {}};
  const std::uint64_t start = r.state.step;
  const std::uint64_t end = std::uint64_t(cfg.max_steps);

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw IoError(options.out_dir.string() + ": cannot create run directory: " + ec.message());
    log = detail::open_train_log(options.out_dir / "train_log.csv", start);
  }
  auto checkpoint = [&] {
    if (options.out_dir.empty()) return;
    const auto dir = detail::checkpoint_dir(options.out_dir, r.state.step);
    save_checkpoint(r.state, r.optimizer, cfg, dir);
    r.checkpoints.push_back(dir);
  };
  if (start >= end) {
    if (start == 0) checkpoint();
    return r;
  }

  const PairSampler sampler(dataset);
  PerceptualTargets<T> targets;
  if (uses_perceptual(cfg.ablation_preset)) targets = PerceptualTargets<T>(r.state.perceptual, dataset);

  const auto t0 = std::chrono::steady_clock::now();
  while (r.state.step < end) {
    const auto batch = batch_for_step(sampler, cfg, r.state.step);
    LossBreakdown b;
    try {
      b = train_step(r.state, dataset, batch, cfg, r.optimizer, &targets);
    } catch (const NumericError& e) {
      if (!options.out_dir.empty())
        write_text_file(options.out_dir / "abort.txt", std::string("numeric abort: ") + e.what() + "\n");
      throw;
    }
    const std::int64_t step = std::int64_t(r.state.step);
    if (step % cfg.log_every == 0) {
      TrainLogRecord rec;
      rec.step = step;
      rec.losses = b;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.n_genuine = rec.n_impostor = cfg.batch_size / 2;
      if (log.is_open()) {
        log << format_log_row(rec) << "\n";
        log.flush();
        if (!log) throw IoError((options.out_dir / "train_log.csv").string() + ": write failed");
      }
      if (options.on_log) options.on_log(rec);
      r.logs.push_back(rec);
    }
    if (step % cfg.checkpoint_every == 0 && r.state.step < end) checkpoint();
  }
  checkpoint();
  return r;
}

/// Trains a freshly initialized model; the model seed is the training seed.
template <typename T>
TrainResult<T> train(std::span<const ImageSample> dataset, const GeneratorConfig& model, const TrainConfig& cfg,
                     const TrainOptions& options = {}) {
  cfg.validate();
  ModelState<T> s = init_model<T>(model, cfg.seed);
  OptimizerStates<T> opt = OptimizerStates<T>::for_model(s);
  return train_from(std::move(s), std::move(opt), dataset, cfg, options);
}

/// Trailing moving average with the given window (shorter at the start).
inline std::vector<double> moving_average(std::span<const double> v, std::size_t window) {
  std::vector<double> out;
  double sum = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= window) sum -= v[i - window];
    out.push_back(sum / double(std::min(i + 1, window)));
  }
  return out;
}

}  // namespace pfcpgan
