#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "overnet/checkpoint.hpp"
#include "overnet/config.hpp"
#include "overnet/train.hpp"
#include "testing.hpp"

using namespace overnet;
using Catch::Matchers::ContainsSubstring;
using testing_util::synth_image;
using testing_util::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run_cli(const TempDir& dir, const std::string& args) {
  static int n = 0;
  const std::string out_f = dir.file("cli-out-" + std::to_string(n));
  const std::string err_f = dir.file("cli-err-" + std::to_string(n));
  ++n;
  const std::string cmd = std::string(OVERNET_CLI_PATH) + " " + args + " >" +
                          out_f + " 2>" + err_f;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_f);
  r.err = slurp(err_f);
  return r;
}

ModelConfig micro_model() {
  ModelConfig m;
  m.base_channels = 8;
  m.num_ldgs = 1;
  m.rbs_per_ldg = 1;
  m.expansion_ratio = 2;
  return m;
}

std::string write_zero_ckpt(const TempDir& dir, const ModelConfig& cfg) {
  ParamStore<float> ps;
  register_params(ps, cfg);
  const std::string path = dir.file("zero.ovnt");
  save_checkpoint(path, ps, cfg, "");
  return path;
}

}  // namespace

TEST_CASE("sr produces the rounded output geometry", "[cli]") {
  TempDir dir("cli-sr");
  const std::string ckpt = write_zero_ckpt(dir, micro_model());
  png_write(dir.file("in32x48.png"), synth_image(32, 48, 1));
  png_write(dir.file("in40.png"), synth_image(40, 40, 2));

  REQUIRE(run_cli(dir, "sr --ckpt " + ckpt + " --in " + dir.file("in32x48.png") +
                           " --out " + dir.file("up2.png") + " --scale 2")
              .exit_code == 0);
  const Tensor4f up2 = png_read(dir.file("up2.png"));
  REQUIRE(up2.h == 64);
  REQUIRE(up2.w == 96);

  REQUIRE(run_cli(dir, "sr --ckpt " + ckpt + " --in " + dir.file("in40.png") +
                           " --out " + dir.file("up25.png") + " --scale 2.5")
              .exit_code == 0);
  const Tensor4f up25 = png_read(dir.file("up25.png"));
  REQUIRE(up25.h == 100);
  REQUIRE(up25.w == 100);
}

TEST_CASE("zero-parameter sr is bicubic within quantization", "[cli]") {
  TempDir dir("cli-zero");
  const std::string ckpt = write_zero_ckpt(dir, micro_model());
  const Tensor4f lr = synth_image(16, 16, 3);
  png_write(dir.file("lr.png"), lr);

  REQUIRE(run_cli(dir, "sr --ckpt " + ckpt + " --in " + dir.file("lr.png") +
                           " --out " + dir.file("up.png") + " --scale 3")
              .exit_code == 0);
  const Tensor4f up = png_read(dir.file("up.png"));
  // The PNG round trip of the input quantized the reference's source too,
  // so compare against bicubic of the decoded bytes.
  Tensor4f ref = resize(png_read(dir.file("lr.png")), 48, 48,
                        ResampleKernel::Cubic);
  clamp01(ref);
  REQUIRE(testing_util::max_abs_diff(up, ref) <= 1.0 / 255.0 + 1e-6);
}

TEST_CASE("scale beyond the checkpoint exits with code five", "[cli]") {
  TempDir dir("cli-overscale");
  const std::string ckpt = write_zero_ckpt(dir, micro_model());
  png_write(dir.file("lr.png"), synth_image(16, 16, 4));
  const RunResult r =
      run_cli(dir, "sr --ckpt " + ckpt + " --in " + dir.file("lr.png") +
                       " --out " + dir.file("x.png") + " --scale 5");
  REQUIRE(r.exit_code == 5);
  REQUIRE_THAT(r.err, ContainsSubstring("scale"));
}

TEST_CASE("missing inputs map to config and io exit codes", "[cli]") {
  TempDir dir("cli-errs");
  png_write(dir.file("a.png"), synth_image(48, 48, 5));
  const RunResult miss_cfg = run_cli(
      dir, "train --config /nonexistent/run.cfg --data " + dir.path.string());
  REQUIRE(miss_cfg.exit_code == 2);
  REQUIRE_THAT(miss_cfg.err, ContainsSubstring("/nonexistent/run.cfg"));

  REQUIRE(run_cli(dir, "eval --ckpt " + dir.file("absent.ovnt") + " --data " +
                           dir.path.string())
              .exit_code == 3);
  const std::string ckpt = write_zero_ckpt(dir, micro_model());
  REQUIRE(run_cli(dir, "sr --ckpt " + ckpt + " --in " + dir.file("absent.png") +
                           " --out " + dir.file("x.png"))
              .exit_code == 3);
}

TEST_CASE("duplicate config keys exit with code two and the key name",
          "[cli]") {
  TempDir dir("cli-dup");
  png_write(dir.file("a.png"), synth_image(48, 48, 6));
  {
    std::ofstream f(dir.file("dup.cfg"));
    f << "seed = 1\nseed = 2\n";
  }
  const RunResult r = run_cli(dir, "train --config " + dir.file("dup.cfg") +
                                       " --data " + dir.path.string());
  REQUIRE(r.exit_code == 2);
  REQUIRE_THAT(r.err, ContainsSubstring("seed"));
}

TEST_CASE("degraded dn output with zero noise matches bi bitwise", "[cli]") {
  TempDir dir("cli-dn0");
  png_write(dir.file("hr.png"), synth_image(48, 48, 7));
  REQUIRE(run_cli(dir, "degrade --in " + dir.file("hr.png") + " --out " +
                           dir.file("dn.png") +
                           " --kind dn --noise-level 0 --scale 3")
              .exit_code == 0);
  REQUIRE(run_cli(dir, "degrade --in " + dir.file("hr.png") + " --out " +
                           dir.file("bi.png") + " --kind bi --scale 3")
              .exit_code == 0);
  REQUIRE(slurp(dir.file("dn.png")) == slurp(dir.file("bi.png")));
  REQUIRE(!slurp(dir.file("dn.png")).empty());
}

TEST_CASE("inspect reports the enumerated parameter total", "[cli]") {
  TempDir dir("cli-inspect");
  const ModelConfig cfg = micro_model();
  const std::string ckpt = write_zero_ckpt(dir, cfg);
  const RunResult r = run_cli(dir, "inspect --ckpt " + ckpt);
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("param_count = " +
                                        std::to_string(param_count(cfg))));
  ParamStore<float> ps;
  register_params(ps, cfg);
  REQUIRE(param_count(cfg) == ps.param_count());
}

TEST_CASE("train emits tab-separated progress and a loadable checkpoint",
          "[cli]") {
  TempDir dir("cli-train");
  png_write(dir.file("a.png"), synth_image(48, 48, 8));
  {
    std::ofstream f(dir.file("run.cfg"));
    f << "total_iters = 2\nbatch_size = 1\npatch = 8\nscale_set = 2,4\n"
      << "model.base_channels = 8\nmodel.num_ldgs = 1\n"
      << "model.rbs_per_ldg = 1\nmodel.expansion_ratio = 2\n";
  }
  const RunResult r = run_cli(
      dir, "train --config " + dir.file("run.cfg") + " --data " +
               dir.path.string() + " --out " + dir.file("run.ovnt") +
               " --seed 5");
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.err, ContainsSubstring("0\t0.001\t"));
  REQUIRE_THAT(r.err, ContainsSubstring("seed = 5  [flag]"));
  const Checkpoint ck = load_checkpoint(dir.file("run.ovnt"));
  REQUIRE(ck.params.step_count == 2);
  // stdout stays clean: reports only.
  REQUIRE(r.out.empty());
}

TEST_CASE("eval prints machine rows on stdout only", "[cli]") {
  TempDir dir("cli-eval");
  png_write(dir.file("a.png"), synth_image(48, 48, 9));
  const std::string ckpt = write_zero_ckpt(dir, micro_model());
  const RunResult r = run_cli(
      dir, "eval --ckpt " + ckpt + " --data " + dir.path.string() +
               " --scales 2,4");
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("a.png\t2\t"));
  REQUIRE_THAT(r.out, ContainsSubstring("mean\t4\t"));
  const RunResult again = run_cli(
      dir, "eval --ckpt " + ckpt + " --data " + dir.path.string() +
               " --scales 2,4");
  REQUIRE(again.out == r.out);
}

TEST_CASE("gradcheck passes and prints its worst error", "[cli]") {
  TempDir dir("cli-gradcheck");
  const RunResult r = run_cli(dir, "gradcheck --coords 6 --seed 2");
  REQUIRE(r.exit_code == 0);
  REQUIRE_THAT(r.out, ContainsSubstring("worst relative error"));
}
