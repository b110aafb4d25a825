#include <catch2/catch_amalgamated.hpp>
#include <functional>

#include "overnet/gradcheck.hpp"
#include "overnet/ops.hpp"
#include "testing.hpp"

using namespace overnet;

namespace {

Tensor4d cotangent(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                   std::uint64_t seed) {
  Tensor4d r(n, c, h, w);
  testing_util::fill_uniform(r, seed, "cotangent", -1.0, 1.0);
  return r;
}

// Runs fd_check over 20 seeds for one op builder; the builder fills the
// store and returns the loss-graph factory for that seed.
using LossFn = std::function<Value<double>(ParamStore<double>&)>;
using Builder = std::function<LossFn(ParamStore<double>&, std::uint64_t)>;

void check_op_over_seeds(const char* what, const Builder& build) {
  INFO(what);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ParamStore<double> ps;
    auto loss_fn = build(ps, seed);
    auto rep = fd_check(ps, loss_fn, {.eps = 1e-3, .coords = 0, .seed = seed});
    INFO("seed " << seed << " worst_rel " << rep.worst_rel << " checked "
                 << rep.checked << " kink_skips " << rep.kink_skips);
    REQUIRE(rep.ok(1e-4));
  }
}

}  // namespace

TEST_CASE("finite differences confirm relu gradients", "[gradcheck]") {
  check_op_over_seeds("relu", [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 2, 3, 4, 5);
    // Inputs held away from the kink at 0.
    testing_util::fill_signed_away_from_zero(x.value, seed, "x", 0.1, 1.0);
    auto r = cotangent(2, 3, 4, 5, seed + 100);
    return [r](ParamStore<double>& s) {
      return dot_const(relu(s.leaf("x")), r);
    };
  });
}

TEST_CASE("finite differences confirm sigmoid gradients", "[gradcheck]") {
  check_op_over_seeds("sigmoid",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 2, 3, 4);
    testing_util::fill_uniform(x.value, seed, "x", -3.0, 3.0);
    auto r = cotangent(1, 2, 3, 4, seed + 100);
    return [r](ParamStore<double>& s) {
      return dot_const(sigmoid(s.leaf("x")), r);
    };
  });
}

TEST_CASE("finite differences confirm add and broadcast add", "[gradcheck]") {
  check_op_over_seeds("add", [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& a = ps.add("a", 1, 2, 3, 3);
    auto& b = ps.add("b", 1, 2, 3, 3);
    auto& s = ps.add("s", 1, 2, 1, 1);
    testing_util::fill_uniform(a.value, seed, "a", -1.0, 1.0);
    testing_util::fill_uniform(b.value, seed, "b", -1.0, 1.0);
    testing_util::fill_uniform(s.value, seed, "s", -1.0, 1.0);
    auto r = cotangent(1, 2, 3, 3, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(add_channels(add(st.leaf("a"), st.leaf("b")),
                                    st.leaf("s")),
                       r);
    };
  });
}

TEST_CASE("finite differences confirm the gating ops", "[gradcheck]") {
  check_op_over_seeds("gates", [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 2, 3, 3, 3);
    auto& g = ps.add("g", 2, 3, 1, 1);
    auto& lam = ps.add("lam", 1, 1, 1, 1);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    testing_util::fill_uniform(g.value, seed, "g", -1.0, 1.0);
    testing_util::fill_uniform(lam.value, seed, "lam", 0.5, 1.5);
    auto r = cotangent(2, 3, 3, 3, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(
          scale_gate(mul_channels(st.leaf("x"), st.leaf("g")),
                     st.leaf("lam")),
          r);
    };
  });
}

TEST_CASE("finite differences confirm pooling and concatenation",
          "[gradcheck]") {
  check_op_over_seeds("pool-concat",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& a = ps.add("a", 1, 2, 4, 4);
    auto& b = ps.add("b", 1, 3, 4, 4);
    testing_util::fill_uniform(a.value, seed, "a", -1.0, 1.0);
    testing_util::fill_uniform(b.value, seed, "b", -1.0, 1.0);
    auto r = cotangent(1, 5, 1, 1, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(
          global_avg_pool(concat_channels<double>(
              {st.leaf("a"), st.leaf("b")})),
          r);
    };
  });
}

TEST_CASE("finite differences confirm pixel shuffle", "[gradcheck]") {
  check_op_over_seeds("pixel-shuffle",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 8, 3, 4);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    auto r = cotangent(1, 2, 6, 8, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(pixel_shuffle(st.leaf("x"), 2), r);
    };
  });
}

TEST_CASE("finite differences confirm resampling in both directions",
          "[gradcheck]") {
  check_op_over_seeds("resize-up",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 2, 5, 6);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    auto r = cotangent(1, 2, 11, 9, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(resize_value(st.leaf("x"), 11, 9), r);
    };
  });
  check_op_over_seeds("resize-down",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 2, 12, 10);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    auto r = cotangent(1, 2, 5, 7, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(
          resize_value(st.leaf("x"), 5, 7, ResampleKernel::Linear), r);
    };
  });
}

TEST_CASE("finite differences confirm convolution gradients", "[gradcheck]") {
  check_op_over_seeds("conv3x3",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 2, 3, 5, 4);
    auto& w = ps.add("w", 4, 3, 3, 3);
    auto& b = ps.add("b", 4, 1, 1, 1);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    testing_util::fill_uniform(w.value, seed, "w", -0.5, 0.5);
    testing_util::fill_uniform(b.value, seed, "b", -0.1, 0.1);
    auto r = cotangent(2, 4, 5, 4, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(conv2d(st.leaf("x"), st.leaf("w"), st.leaf("b")), r);
    };
  });
  check_op_over_seeds("conv1x1",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 4, 4, 4);
    auto& w = ps.add("w", 3, 4, 1, 1);
    auto& b = ps.add("b", 3, 1, 1, 1);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    testing_util::fill_uniform(w.value, seed, "w", -0.5, 0.5);
    testing_util::fill_uniform(b.value, seed, "b", -0.1, 0.1);
    auto r = cotangent(1, 3, 4, 4, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(conv2d(st.leaf("x"), st.leaf("w"), st.leaf("b")), r);
    };
  });
}

TEST_CASE("finite differences confirm weight normalization", "[gradcheck]") {
  check_op_over_seeds("weight-norm",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 2, 4, 4);
    auto& v = ps.add("v", 3, 2, 3, 3);
    auto& g = ps.add("g", 3, 1, 1, 1);
    auto& b = ps.add("b", 3, 1, 1, 1);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    // Direction rows with O(1) norms: the 1/|v|^2 curvature of the
    // normalization would otherwise dominate the eps^2 truncation term.
    testing_util::fill_signed_away_from_zero(v.value, seed, "v", 1.0, 1.0);
    testing_util::fill_uniform(g.value, seed, "g", 0.5, 1.5);
    testing_util::fill_uniform(b.value, seed, "b", -0.1, 0.1);
    auto r = cotangent(1, 3, 4, 4, seed + 100);
    return [r](ParamStore<double>& st) {
      return dot_const(
          conv2d(st.leaf("x"), weight_norm(st.leaf("v"), st.leaf("g")),
                 st.leaf("b")),
          r);
    };
  });
}

TEST_CASE("finite differences confirm the absolute-error reduction",
          "[gradcheck]") {
  check_op_over_seeds("mean-abs-diff",
                      [](ParamStore<double>& ps, std::uint64_t seed) {
    auto& x = ps.add("x", 1, 3, 4, 4);
    testing_util::fill_uniform(x.value, seed, "x", -1.0, 1.0);
    // Targets at distance >= 2 from every prediction: the |.| kink sits far
    // outside the probe interval.
    Tensor4d target(1, 3, 4, 4);
    testing_util::fill_uniform(target, seed + 50, "t", 3.0, 4.0);
    return [target](ParamStore<double>& st) {
      return mean_abs_diff(st.leaf("x"), target);
    };
  });
}

TEST_CASE("kink detection discards probes that straddle a relu corner",
          "[gradcheck]") {
  ParamStore<double> ps;
  auto& x = ps.add("x", 1, 1, 1, 2);
  // First coordinate sits inside the probe radius of the kink at 0; a
  // +-1e-3 probe must straddle it and be skipped, not compared.
  x.value.data = {2e-4, 0.7};
  auto rep = fd_check(
      ps,
      [](ParamStore<double>& st) { return sum_all(relu(st.leaf("x"))); },
      {.eps = 1e-3, .coords = 0, .seed = 0});
  REQUIRE(rep.kink_skips == 1);
  REQUIRE(rep.checked == 1);
  REQUIRE(rep.worst_rel <= 1e-10);
}
