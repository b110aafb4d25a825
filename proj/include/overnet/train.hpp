#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "overnet/checkpoint.hpp"
#include "overnet/config.hpp"
#include "overnet/degrade.hpp"
#include "overnet/image.hpp"
#include "overnet/loss.hpp"
#include "overnet/metrics.hpp"
#include "overnet/model.hpp"

namespace overnet {

struct TrainImage {
  std::string name;
  Tensor4f hr, lr;
};

inline std::vector<std::string> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("read " + dir + ": " + ec.message());
  std::vector<std::string> out;
  for (const auto& ent : it)
    if (ent.is_regular_file() && ent.path().extension() == ".png")
      out.push_back(ent.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

// Reads every PNG in dir, crops to a multiple of the model factor, and
// degrades once; the LR image is fixed for the whole run (any noise is
// drawn per image from the run seed, not per step).
inline std::vector<TrainImage> load_training_set(const std::string& dir,
                                                 const TrainConfig& cfg) {
  const auto paths = list_pngs(dir);
  if (paths.empty()) throw UsageError("no .png images in " + dir);
  const std::size_t n = cfg.model.max_scale;
  const Degradation deg = cfg.train_degradation();
  std::vector<TrainImage> out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    TrainImage im;
    im.name = std::filesystem::path(paths[i]).filename().string();
    im.hr = modcrop(png_read(paths[i]), n);
    im.lr = degrade(im.hr, deg,
                    RandomStream(cfg.seed, "degrade-seed", i).next_u64());
    if (im.lr.h < cfg.patch || im.lr.w < cfg.patch)
      throw UsageError(im.name + ": needs at least " +
                       std::to_string(cfg.patch * n) +
                       " pixels per side for patch " +
                       std::to_string(cfg.patch));
    out.push_back(std::move(im));
  }
  return out;
}

struct TrainLogEntry {
  std::uint64_t step;
  double lr, loss;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainImage> images)
      : cfg_(std::move(cfg)), images_(std::move(images)) {
    cfg_.validate();
    if (images_.empty()) throw UsageError("training set is empty");
    register_params(params_, cfg_.model);
    init_params(params_, cfg_.seed);
  }

  ParamStore<float>& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<TrainLogEntry>& history() const { return history_; }

  // Replaces parameters, optimizer state and step position with a saved
  // run. The checkpoint must describe the same model.
  void restore(const Checkpoint& ck) {
    if (model_config_text(ck.model) != model_config_text(cfg_.model))
      throw ConfigError("checkpoint model does not match the training config");
    params_ = ck.params;
  }

  // lr0 * 0.5^(step/halve); the factor is a power of two, so ldexp keeps
  // the schedule exact at every boundary.
  double lr_at(std::uint64_t step) const {
    return std::ldexp(cfg_.lr0, -static_cast<int>(step / cfg_.halve_every));
  }

  // Loss of the current parameters on the batch of a given step; no
  // gradients, no update. Step 0 of a fresh run is the initial loss.
  double probe_loss(std::uint64_t step) {
    auto [lrb, hrb] = make_batch(step);
    return batch_loss(lrb, hrb)->val.data[0];
  }

  // Runs from the current step position to total_iters. Logged lines are
  // step<TAB>lr<TAB>loss every 50 steps plus the final step.
  void run(std::ostream* log = nullptr, const std::string& ckpt_path = {}) {
    while (params_.step_count < cfg_.total_iters) {
      const std::uint64_t step = params_.step_count;
      const double lr = lr_at(step);
      double loss_val = 0.0;
      try {
        auto [lrb, hrb] = make_batch(step);
        params_.zero_grads();
        auto loss = batch_loss(lrb, hrb);
        loss_val = static_cast<double>(loss->val.data[0]);
        if (!std::isfinite(loss_val))
          throw NumericError("non-finite loss " + detail::real_str(loss_val));
        backward(loss, params_);
        adam_step(params_, lr);
      } catch (const NumericError& e) {
        abort_non_finite(step, lr, e.what());
      }
      if (step % 50 == 0 || step + 1 == cfg_.total_iters) {
        history_.push_back({step, lr, loss_val});
        if (log)
          *log << step << '\t' << detail::real_str(lr) << '\t'
               << detail::real_str(loss_val) << '\n';
      }
      if (!ckpt_path.empty() && cfg_.checkpoint_every != 0 &&
          params_.step_count % cfg_.checkpoint_every == 0 &&
          params_.step_count < cfg_.total_iters)
        save_checkpoint(ckpt_path, params_, cfg_.model,
                        train_config_text(cfg_));
    }
    if (!ckpt_path.empty())
      save_checkpoint(ckpt_path, params_, cfg_.model, train_config_text(cfg_));
  }

 private:
  // Batch composition is a pure function of (seed, step), so a resumed
  // run replays the exact sample sequence of the unbroken one.
  std::pair<Tensor4f, Tensor4f> make_batch(std::uint64_t step) const {
    const std::size_t n = cfg_.model.max_scale;
    const std::size_t p = cfg_.patch;
    Tensor4f lrb(cfg_.batch_size, 3, p, p);
    Tensor4f hrb(cfg_.batch_size, 3, p * n, p * n);
    RandomStream rs(cfg_.seed, "batch", step);
    for (std::size_t b = 0; b < cfg_.batch_size; ++b) {
      const std::size_t idx = rs.next_index(images_.size());
      const std::uint64_t pseed = rs.next_u64();
      const PatchPair pp =
          sample_patch(images_[idx].hr, images_[idx].lr, p, n, pseed);
      std::copy(pp.lr.data.begin(), pp.lr.data.end(),
                lrb.data.begin() + static_cast<std::ptrdiff_t>(b * 3 * p * p));
      std::copy(pp.hr.data.begin(), pp.hr.data.end(),
                hrb.data.begin() +
                    static_cast<std::ptrdiff_t>(b * 3 * p * n * p * n));
    }
    return {std::move(lrb), std::move(hrb)};
  }

  Value<float> batch_loss(const Tensor4f& lrb, const Tensor4f& hrb) {
    auto fwd =
        overnet_forward(params_, cfg_.model, lrb, cfg_.scale_set.scales);
    std::vector<ScaledOutput<float>> outs;
    for (std::size_t i = 0; i < cfg_.scale_set.scales.size(); ++i)
      outs.push_back({cfg_.scale_set.scales[i], fwd.per_scale[i]});
    return multiscale_l1(outs, hrb, cfg_.scale_set, cfg_.patch, cfg_.patch);
  }

  [[noreturn]] void abort_non_finite(std::uint64_t step, double lr,
                                     const std::string& what) {
    std::string msg = "training aborted at step " + std::to_string(step) +
                      ": " + what + " (lr " + detail::real_str(lr) + ")";
    for (const auto& name : params_.names()) {
      for (float v : params_.get(name).value.data)
        if (!std::isfinite(v)) {
          msg += "; first non-finite parameter: " + name;
          throw NumericError(msg);
        }
    }
    msg += "; parameters all finite (activation overflow)";
    throw NumericError(msg);
  }

  TrainConfig cfg_;
  std::vector<TrainImage> images_;
  ParamStore<float> params_;
  std::vector<TrainLogEntry> history_;
};

inline Checkpoint train(const TrainConfig& cfg, const std::string& data_dir,
                        std::ostream* log = nullptr,
                        const std::string& ckpt_path = {}) {
  Trainer t(cfg, load_training_set(data_dir, cfg));
  t.run(log, ckpt_path);
  Checkpoint ck;
  ck.model = cfg.model;
  ck.train_config_text = train_config_text(cfg);
  ck.params = t.params();
  return ck;
}

// Per-image, per-scale Y-channel scores of a checkpointed model against a
// directory of ground-truth images, next to a pure-bicubic reference.
//
// The reference routes through the same canonical x-N grid as the model
// head (upscale by N, then resize to the requested scale): it is exactly
// what the network emits when every learned branch is dead, so the
// zero-parameter model scores identically to its baseline column at every
// scale, not merely at x-N.
inline EvalReport evaluate(ParamStore<float>& ps, const ModelConfig& cfg,
                           const std::string& dir, const ScaleSet& scales,
                           const Degradation& degradation,
                           std::uint64_t seed = 0, bool crop = true) {
  const auto t0 = std::chrono::steady_clock::now();
  scales.check_max(static_cast<std::int64_t>(cfg.max_scale), "evaluate");
  const auto paths = list_pngs(dir);
  if (paths.empty()) throw UsageError("no .png images in " + dir);
  const std::size_t n = cfg.max_scale;
  Degradation deg = degradation;
  deg.scale = Rational(static_cast<std::int64_t>(n), 1);

  EvalReport rep;
  std::string fp = model_config_text(cfg);
  std::replace(fp.begin(), fp.end(), '\n', ';');
  rep.config_fingerprint = fp;

  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::string name = std::filesystem::path(paths[i]).filename().string();
    const Tensor4f hr = modcrop(png_read(paths[i]), n);
    const Tensor4f lr =
        degrade(hr, deg, RandomStream(seed, "degrade-seed", i).next_u64());
    Tensor4f up_n = resize(lr, hr.h, hr.w, ResampleKernel::Cubic);
    for (const auto& s : scales.scales) {
      const std::size_t oh = s.scale_up(lr.h), ow = s.scale_up(lr.w);
      const bool at_max = s == Rational(static_cast<std::int64_t>(n), 1);
      const Tensor4f target =
          at_max ? hr : resize(hr, oh, ow, ResampleKernel::Cubic);
      const Tensor4f pred = predict(ps, cfg, lr, s);
      Tensor4f base = at_max ? up_n : resize(up_n, oh, ow, ResampleKernel::Cubic);
      clamp01(base);
      EvalRow row;
      row.name = name;
      row.scale = s;
      row.psnr_db = psnr(pred, target, s, crop);
      row.ssim_val = ssim(pred, target, s, crop);
      row.base_psnr_db = psnr(base, target, s, crop);
      row.base_ssim_val = ssim(base, target, s, crop);
      rep.rows.push_back(std::move(row));
    }
  }
  std::sort(rep.rows.begin(), rep.rows.end(),
            [](const EvalRow& a, const EvalRow& b) {
              if (a.name != b.name) return a.name < b.name;
              return a.scale < b.scale;
            });
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

}  // namespace overnet
