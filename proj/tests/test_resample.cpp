#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "overnet/ops.hpp"
#include "overnet/resample.hpp"
#include "testing.hpp"

using namespace overnet;

namespace {

// Direct evaluation of the piecewise cubic (a = -0.5), written out
// independently of the library kernel.
double keys_direct(double x) {
  x = std::fabs(x);
  if (x <= 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

}  // namespace

TEST_CASE("upscale-by-2 weight rows match the closed-form kernel",
          "[resample]") {
  const auto tab = detail::get_table(8, 16, ResampleKernel::Cubic);

  SECTION("interior row (output position 4)") {
    // Source center u = 1.75; taps at 0..3 with offsets -1.75..1.25.
    REQUIRE(tab->starts[4] == 0);
    const double expected[4] = {keys_direct(-1.75), keys_direct(-0.75),
                                keys_direct(0.25), keys_direct(1.25)};
    for (int t = 0; t < 4; ++t)
      REQUIRE(tab->weights[4 * tab->taps + t] ==
              Catch::Approx(expected[t]).margin(1e-12));
    // Literal values of the piecewise cubic at those offsets.
    REQUIRE(expected[0] == Catch::Approx(-0.0234375));
    REQUIRE(expected[1] == Catch::Approx(0.2265625));
    REQUIRE(expected[2] == Catch::Approx(0.8671875));
    REQUIRE(expected[3] == Catch::Approx(-0.0703125));
  }
  SECTION("edge row (output position 0) folds clamped taps") {
    // u = -0.25; taps -2..1 clamp to source 0, so the out-of-range weights
    // collapse onto the first sample.
    REQUIRE(tab->starts[0] == 0);
    const double w0 =
        keys_direct(-1.75) + keys_direct(-0.75) + keys_direct(0.25);
    const double w1 = keys_direct(1.25);
    REQUIRE(tab->weights[0] == Catch::Approx(w0).margin(1e-12));
    REQUIRE(tab->weights[1] == Catch::Approx(w1).margin(1e-12));
    for (std::size_t t = 2; t < tab->taps; ++t)
      REQUIRE(tab->weights[t] == 0.0);
  }
}

TEST_CASE("weight rows are a partition of unity", "[resample]") {
  const std::size_t pairs[][2] = {{8, 16}, {16, 8},  {7, 13}, {13, 7},
                                  {32, 48}, {48, 32}, {5, 20}, {20, 5},
                                  {1, 4},  {4, 1}};
  for (auto kernel : {ResampleKernel::Cubic, ResampleKernel::Linear}) {
    for (const auto& p : pairs) {
      const auto tab = detail::get_table(p[0], p[1], kernel);
      for (std::size_t i = 0; i < tab->out; ++i) {
        double sum = 0.0;
        for (std::size_t t = 0; t < tab->taps; ++t)
          sum += tab->weights[i * tab->taps + t];
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
      }
    }
  }
}

TEST_CASE("constant images survive any resize", "[resample]") {
  Tensor4f x(1, 3, 17, 23);
  x.fill(0.4217f);
  const std::size_t dims[][2] = {{29, 11}, {9, 46}, {17, 23}, {5, 5}};
  for (const auto& d : dims) {
    auto y = resize(x, d[0], d[1]);
    for (float v : y.data) REQUIRE(v == Catch::Approx(0.4217f).margin(1e-6));
  }
}

TEST_CASE("upscale-by-2 reproduces linear ramps away from borders",
          "[resample]") {
  const std::size_t n = 16;
  Tensor4d x(1, 1, n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t xx = 0; xx < n; ++xx)
      x.at(0, 0, y, xx) = static_cast<double>(xx) / (n - 1);
  auto up = resize(x, 2 * n, 2 * n);
  for (std::size_t y = 4; y < 2 * n - 4; ++y)
    for (std::size_t xx = 4; xx < 2 * n - 4; ++xx) {
      const double u = (xx + 0.5) / 2.0 - 0.5;
      REQUIRE(up.at(0, 0, y, xx) ==
              Catch::Approx(u / (n - 1)).margin(1e-5));
    }
}

TEST_CASE("identity resize is exact", "[resample]") {
  Tensor4f x(1, 2, 9, 13);
  testing_util::fill_uniform(x, 31, "id", -1.0, 1.0);
  auto y = resize(x, 9, 13);
  REQUIRE(testing_util::max_abs_diff(y, x) == 0.0);
}

TEST_CASE("down-then-up round trip stays close on smooth images",
          "[resample]") {
  const std::size_t n = 64;
  Tensor4d x(1, 1, n, n);
  constexpr double tau = 6.283185307179586;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t xx = 0; xx < n; ++xx)
      x.at(0, 0, y, xx) = 0.5 + 0.3 * std::sin(tau * xx / 32.0) *
                                    std::cos(tau * y / 32.0);
  auto down = resize(x, n / 2, n / 2);
  auto up = resize(down, n, n);
  double mae = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i)
    mae += std::fabs(up.data[i] - x.data[i]);
  mae /= static_cast<double>(x.data.size());
  REQUIRE(mae < 0.01);
}

TEST_CASE("the adjoint is the exact transpose of the forward map",
          "[resample]") {
  for (auto kernel : {ResampleKernel::Cubic, ResampleKernel::Linear}) {
    Tensor4d x(1, 2, 9, 13), g(1, 2, 17, 7);
    testing_util::fill_uniform(x, 41, "adj-x", -1.0, 1.0);
    testing_util::fill_uniform(g, 42, "adj-g", -1.0, 1.0);
    auto y = resize(x, 17, 7, kernel);
    auto xt = resize_adjoint(g, 9, 13, kernel);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
      lhs += y.data[i] * g.data[i];
    for (std::size_t i = 0; i < x.data.size(); ++i)
      rhs += x.data[i] * xt.data[i];
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("zero-size targets are rejected", "[resample]") {
  Tensor4f x(1, 1, 4, 4);
  REQUIRE_THROWS_AS(resize(x, 0, 4), UsageError);
  REQUIRE_THROWS_AS(resize(x, 4, 0), UsageError);
}
