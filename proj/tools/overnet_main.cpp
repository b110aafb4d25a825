// Command-line front end: train | sr | eval | degrade | gradcheck | inspect.
//
// stdout carries data (reports, measurements); stderr carries logs and
// diagnostics. Exit codes: 2 config/usage, 3 file I/O, 4 numeric, 5 scale
// overflow.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "overnet/checkpoint.hpp"
#include "overnet/config.hpp"
#include "overnet/gradcheck.hpp"
#include "overnet/train.hpp"

namespace {

using namespace overnet;

struct TrainArgs {
  std::string config_path, data_dir, out_path = "overnet.ovnt", resume_path;
  bool paper_scale = false;
  // Raw key=value overrides collected from flags; they reuse the config
  // parser so flag and file values cannot drift apart.
  std::map<std::string, std::string> overrides;
};

int run_train(const TrainArgs& a) {
  TrainConfig base;
  if (a.paper_scale) apply_paper_scale(base);

  std::set<std::string> file_keys;
  TrainConfig cfg = base;
  if (!a.config_path.empty()) {
    std::ifstream f(a.config_path);
    if (!f) throw ConfigError("config file not found: " + a.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      const auto kv = detail::parse_kv_line(line);
      if (kv) file_keys.insert(kv->first);
    }
    cfg = parse_train_config_text(text, base);
  }
  for (const auto& [key, val] : a.overrides) apply_train_key(cfg, key, val);
  cfg.validate();

  // Effective settings with provenance, so a run can be reproduced from
  // its log alone.
  {
    std::istringstream lines(train_config_text(cfg));
    std::string line;
    while (std::getline(lines, line)) {
      const std::string key = line.substr(0, line.find(' '));
      const char* src = a.overrides.count(key)        ? "flag"
                        : file_keys.count(key)        ? "file"
                        : a.paper_scale               ? "default/paper"
                                                      : "default";
      std::fprintf(stderr, "# %s  [%s]\n", line.c_str(), src);
    }
  }

  Trainer t(cfg, load_training_set(a.data_dir, cfg));
  if (!a.resume_path.empty()) {
    t.restore(load_checkpoint(a.resume_path));
    std::fprintf(stderr, "# resumed at step %llu\n",
                 static_cast<unsigned long long>(t.params().step_count));
  }
  t.run(&std::cerr, a.out_path);
  std::fprintf(stderr, "checkpoint written: %s\n", a.out_path.c_str());
  return 0;
}

struct SrArgs {
  std::string ckpt, in_path, out_path, scale = "4";
};

int run_sr(const SrArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  const Rational s = Rational::parse(a.scale);
  const auto n = static_cast<std::int64_t>(ck.model.max_scale);
  if (Rational(n, 1) < s)
    throw ScaleError("scale " + s.str() + " exceeds the model maximum " +
                     std::to_string(n));
  const Tensor4f lr = png_read(a.in_path);
  const Tensor4f out = predict(ck.params, ck.model, lr, s);
  png_write(a.out_path, out);
  std::fprintf(stderr, "%zux%zu -> %zux%zu (x%s) written: %s\n", lr.w, lr.h,
               out.w, out.h, s.str().c_str(), a.out_path.c_str());
  return 0;
}

struct EvalArgs {
  std::string ckpt, data_dir, scales, kind = "bi";
  double blur_sigma = 1.6, noise_level = 30.0;
  std::size_t kernel_size = 7;
  bool blur_first = false, no_crop = false;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  ScaleSet scales;
  if (!a.scales.empty()) {
    scales = ScaleSet::parse(a.scales);
  } else if (!ck.train_config_text.empty()) {
    scales = parse_train_config_text(ck.train_config_text).scale_set;
  } else {
    std::string all;
    for (std::size_t v = 2; v <= ck.model.max_scale; ++v)
      all += (all.empty() ? "" : ",") + std::to_string(v);
    scales = ScaleSet::parse(all);
  }
  Degradation deg;
  deg.kind = parse_degrade_kind(a.kind);
  deg.blur_sigma = a.blur_sigma;
  deg.noise_level = a.noise_level;
  deg.kernel_size = a.kernel_size;
  deg.blur_first = a.blur_first;

  const EvalReport rep = evaluate(ck.params, ck.model, a.data_dir, scales,
                                  deg, a.seed, !a.no_crop);
  std::cout << rep.machine_lines();
  std::cerr << rep.table();
  std::fprintf(stderr, "# %zu images, %.2f s\n", rep.rows.size() / scales.scales.size(),
               rep.wall_seconds);
  return 0;
}

struct DegradeArgs {
  std::string in_path, out_path, kind = "bi", scale = "4";
  double blur_sigma = 1.6, noise_level = 30.0;
  std::size_t kernel_size = 7;
  bool blur_first = false;
  std::uint64_t seed = 0;
};

int run_degrade(const DegradeArgs& a) {
  Degradation d;
  d.kind = parse_degrade_kind(a.kind);
  d.scale = Rational::parse(a.scale);
  d.blur_sigma = a.blur_sigma;
  d.noise_level = a.noise_level;
  d.kernel_size = a.kernel_size;
  d.blur_first = a.blur_first;
  const Tensor4f hr = png_read(a.in_path);
  const Tensor4f lr = degrade(hr, d, a.seed);
  png_write(a.out_path, lr);
  std::fprintf(stderr, "%zux%zu -> %zux%zu written: %s\n", hr.w, hr.h, lr.w,
               lr.h, a.out_path.c_str());
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t coords = 25;
  double eps = 1e-3, tol = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  const ModelConfig cfg = tiny_model_config();
  ParamStore<double> ps;
  register_params(ps, cfg);
  init_params(ps, a.seed);

  Tensor4d lr(1, 3, 6, 6);
  RandomStream rs(a.seed, "gradcheck-input", 0);
  for (auto& v : lr.data) v = 0.1 + 0.8 * rs.next_double();
  // Constant target far outside the output range keeps the L1 loss away
  // from its kink, so central differences stay valid.
  Tensor4d target(1, 3, 6 * cfg.max_scale, 6 * cfg.max_scale);
  target.fill(4.5);

  const FdReport rep = fd_check(
      ps,
      [&](ParamStore<double>& st) {
        auto r = overnet_forward(st, cfg, lr);
        return mean_abs_diff(r.canonical, target);
      },
      FdOptions{a.eps, a.coords, a.seed});
  std::printf("worst relative error %.3e over %zu coordinates"
              " (%zu kink skips)\n",
              rep.worst_rel, rep.checked, rep.kink_skips);
  if (!rep.ok(a.tol)) {
    std::fprintf(stderr, "gradient check FAILED (tolerance %.1e)\n", a.tol);
    return 4;
  }
  return 0;
}

struct InspectArgs {
  std::string ckpt;
};

int run_inspect(const InspectArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  std::cout << model_config_text(ck.model);
  std::cout << "param_count = " << param_count(ck.model) << "\n";
  std::cout << "step_count = " << ck.params.step_count << "\n";
  if (!ck.train_config_text.empty()) {
    std::cout << "\n# training config\n" << ck.train_config_text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-scale single-image super-resolution toolkit"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "fit a model to a directory of images");
  train_cmd->add_option("--config", ta.config_path, "key = value settings file");
  train_cmd->add_option("--data", ta.data_dir, "directory of ground-truth PNGs")
      ->required();
  train_cmd->add_option("--out", ta.out_path, "checkpoint path (default overnet.ovnt)");
  train_cmd->add_option("--resume", ta.resume_path, "continue from a checkpoint");
  train_cmd->add_flag("--paper-scale", ta.paper_scale,
                      "full-protocol schedule and batch size");
  // Individual overrides; highest precedence.
  std::map<std::string, std::string> flag_vals;
  for (const char* key :
       {"lr0", "halve_every", "batch_size", "patch", "total_iters", "seed",
        "checkpoint_every", "scale_set", "degradation", "blur_sigma",
        "kernel_size", "noise_level", "blur_first"}) {
    std::string flag = "--" + std::string(key);
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    train_cmd->add_option_function<std::string>(
        flag,
        [&ta, key](const std::string& v) { ta.overrides[key] = v; },
        std::string("overrides config key ") + key);
  }

  SrArgs sa;
  auto* sr_cmd = app.add_subcommand("sr", "upscale one image with a checkpoint");
  sr_cmd->add_option("--ckpt", sa.ckpt, "model checkpoint")->required();
  sr_cmd->add_option("--in", sa.in_path, "low-resolution input PNG")->required();
  sr_cmd->add_option("--out", sa.out_path, "output PNG")->required();
  sr_cmd->add_option("--scale", sa.scale,
                     "upscale factor, e.g. 2, 2.5, or 3/2");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against ground truth");
  eval_cmd->add_option("--ckpt", ea.ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--data", ea.data_dir, "directory of ground-truth PNGs")
      ->required();
  eval_cmd->add_option("--scales", ea.scales,
                       "comma list (default: the checkpoint's training scales)");
  eval_cmd->add_option("--degradation", ea.kind, "bi | bd | dn");
  eval_cmd->add_option("--blur-sigma", ea.blur_sigma, "bd blur width");
  eval_cmd->add_option("--kernel-size", ea.kernel_size, "bd blur taps");
  eval_cmd->add_option("--noise-level", ea.noise_level, "dn sigma, 8-bit units");
  eval_cmd->add_flag("--blur-first", ea.blur_first, "bd: blur before downsampling");
  eval_cmd->add_flag("--no-crop", ea.no_crop, "score full frames without border crop");
  eval_cmd->add_option("--seed", ea.seed, "noise seed for dn");

  DegradeArgs da;
  auto* deg_cmd = app.add_subcommand("degrade", "produce a low-resolution image");
  deg_cmd->add_option("--in", da.in_path, "input PNG")->required();
  deg_cmd->add_option("--out", da.out_path, "output PNG")->required();
  deg_cmd->add_option("--kind", da.kind, "bi | bd | dn");
  deg_cmd->add_option("--scale", da.scale, "downscale factor");
  deg_cmd->add_option("--blur-sigma", da.blur_sigma, "bd blur width");
  deg_cmd->add_option("--kernel-size", da.kernel_size, "bd blur taps");
  deg_cmd->add_option("--noise-level", da.noise_level, "dn sigma, 8-bit units");
  deg_cmd->add_flag("--blur-first", da.blur_first, "bd: blur before downsampling");
  deg_cmd->add_option("--seed", da.seed, "noise seed for dn");

  GradcheckArgs ga;
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "finite-difference audit of the backward pass");
  gc_cmd->add_option("--seed", ga.seed, "sampling seed");
  gc_cmd->add_option("--coords", ga.coords, "sampled coordinates");
  gc_cmd->add_option("--eps", ga.eps, "probe step");
  gc_cmd->add_option("--tol", ga.tol, "failure threshold");

  InspectArgs ia;
  auto* ins_cmd = app.add_subcommand("inspect", "print a checkpoint's configuration");
  ins_cmd->add_option("--ckpt", ia.ckpt, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return run_train(ta);
    if (sr_cmd->parsed()) return run_sr(sa);
    if (eval_cmd->parsed()) return run_eval(ea);
    if (deg_cmd->parsed()) return run_degrade(da);
    if (gc_cmd->parsed()) return run_gradcheck(ga);
    if (ins_cmd->parsed()) return run_inspect(ia);
  } catch (const ScaleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
