#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "overnet/param_store.hpp"
#include "testing.hpp"

using namespace overnet;

namespace {

// Independent scalar Adam reference, pure double.
struct ScalarAdamRef {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double p, double g, double lr, double b1, double b2,
              double eps) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    return p - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged", "[adam]") {
  ParamStore<float> ps;
  auto& e = ps.add("p", 1, 1, 1, 2);
  e.value.data = {0.37f, -1.2f};
  ps.grads_ready = true;
  adam_step(ps, 0.01);
  REQUIRE(e.value.data[0] == 0.37f);
  REQUIRE(e.value.data[1] == -1.2f);
  REQUIRE(e.adam_m.data[0] == 0.0f);
  REQUIRE(e.adam_v.data[0] == 0.0f);
}

TEST_CASE("zero gradient decays existing moments toward zero", "[adam]") {
  ParamStore<float> ps;
  auto& e = ps.add("p", 1, 1, 1, 1);
  e.value.data[0] = 1.0f;
  e.adam_m.data[0] = 0.5f;
  e.adam_v.data[0] = 0.25f;
  ps.grads_ready = true;
  adam_step(ps, 0.0);  // lr 0 isolates the moment update
  REQUIRE(e.adam_m.data[0] == Catch::Approx(0.45f));
  REQUIRE(e.adam_v.data[0] == Catch::Approx(0.25f * 0.999f));
}

TEST_CASE("first step moves by roughly the learning rate", "[adam]") {
  ParamStore<float> ps;
  auto& e = ps.add("p", 1, 1, 1, 1);
  e.value.data[0] = 1.0f;
  e.grad.data[0] = 1.0f;
  ps.grads_ready = true;
  adam_step(ps, 0.1);
  REQUIRE(std::fabs(e.value.data[0] - 0.9f) < 1e-6);
  REQUIRE(ps.step_count == 1);
  REQUIRE(e.grad.data[0] == 0.0f);  // grads zeroed after the step
  REQUIRE_FALSE(ps.grads_ready);
}

TEST_CASE("double-precision steps reproduce the scalar reference trace",
          "[adam]") {
  ParamStore<double> ps;
  auto& e = ps.add("p", 1, 1, 1, 1);
  e.value.data[0] = 0.5;
  ScalarAdamRef ref;
  double p_ref = 0.5;
  const double grads[4] = {0.7, -0.3, 0.11, 0.9};
  for (double g : grads) {
    e.grad.data[0] = g;
    ps.grads_ready = true;
    adam_step(ps, 0.05);
    p_ref = ref.step(p_ref, g, 0.05, 0.9, 0.999, 1e-8);
    REQUIRE(e.value.data[0] == Catch::Approx(p_ref).margin(1e-14));
  }
}

TEST_CASE("single-precision steps track the reference within float noise",
          "[adam]") {
  ParamStore<float> ps;
  auto& e = ps.add("p", 1, 1, 1, 1);
  e.value.data[0] = 0.5f;
  ScalarAdamRef ref;
  double p_ref = 0.5;
  const double grads[2] = {0.7, 0.7};
  for (double g : grads) {
    e.grad.data[0] = static_cast<float>(g);
    ps.grads_ready = true;
    adam_step(ps, 0.05);
    p_ref = ref.step(p_ref, g, 0.05, 0.9, 0.999, 1e-8);
    REQUIRE(e.value.data[0] == Catch::Approx(p_ref).margin(1e-6));
  }
}

TEST_CASE("stepping without gradients is a usage error", "[adam]") {
  ParamStore<float> ps;
  ps.add("p", 1, 1, 1, 1);
  REQUIRE_THROWS_AS(adam_step(ps, 0.01), UsageError);
}

TEST_CASE("duplicate parameter names are rejected", "[adam]") {
  ParamStore<float> ps;
  ps.add("p", 1, 1, 1, 1);
  REQUIRE_THROWS_AS(ps.add("p", 1, 1, 1, 1), ConfigError);
}

TEST_CASE("initialization fills directions, gains, biases, and gates",
          "[adam]") {
  ParamStore<float> ps;
  ps.add("layer.v", 4, 3, 3, 3);
  ps.add("layer.g", 4, 1, 1, 1);
  ps.add("layer.b", 4, 1, 1, 1);
  ps.add("gate", 1, 1, 1, 1);
  init_params(ps, 123);

  const auto& v = ps.get("layer.v").value;
  const double bound = std::sqrt(6.0 / 27.0);
  for (float x : v.data) {
    REQUIRE(x >= -bound);
    REQUIRE(x <= bound);
  }
  // Gain equals the per-row direction norm, so the initial effective weight
  // is v itself.
  for (std::size_t o = 0; o < 4; ++o) {
    double ss = 0.0;
    for (std::size_t i = 0; i < 27; ++i)
      ss += static_cast<double>(v.data[o * 27 + i]) * v.data[o * 27 + i];
    REQUIRE(ps.get("layer.g").value.data[o] ==
            Catch::Approx(std::sqrt(ss)).margin(1e-6));
  }
  for (float x : ps.get("layer.b").value.data) REQUIRE(x == 0.0f);
  REQUIRE(ps.get("gate").value.data[0] == 1.0f);
}

TEST_CASE("initialization depends on names, not registration order",
          "[adam]") {
  ParamStore<float> a, b;
  a.add("one.v", 2, 2, 3, 3);
  a.add("two.v", 2, 2, 3, 3);
  b.add("two.v", 2, 2, 3, 3);
  b.add("one.v", 2, 2, 3, 3);
  init_params(a, 7);
  init_params(b, 7);
  REQUIRE(testing_util::max_abs_diff(a.get("one.v").value,
                                     b.get("one.v").value) == 0.0);
  REQUIRE(testing_util::max_abs_diff(a.get("two.v").value,
                                     b.get("two.v").value) == 0.0);
}
