#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "overnet/autodiff.hpp"
#include "overnet/common.hpp"
#include "overnet/rng.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

template <typename T>
struct ParamEntry {
  Tensor4<T> value;
  Tensor4<T> grad;
  Tensor4<T> adam_m;
  Tensor4<T> adam_v;
};

// Named parameter registry plus optimizer state. Registration order is kept
// so enumeration (checkpoints, parameter counting) is deterministic.
template <typename T>
class ParamStore {
 public:
  ParamEntry<T>& add(const std::string& name, std::size_t n, std::size_t c,
                     std::size_t h, std::size_t w) {
    if (entries_.count(name))
      throw ConfigError("duplicate parameter: " + name);
    names_.push_back(name);
    auto& e = entries_[name];
    e.value = Tensor4<T>(n, c, h, w);
    e.grad = Tensor4<T>(n, c, h, w);
    e.adam_m = Tensor4<T>(n, c, h, w);
    e.adam_v = Tensor4<T>(n, c, h, w);
    return e;
  }

  ParamEntry<T>& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  const ParamEntry<T>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  const std::vector<std::string>& names() const { return names_; }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& name : names_) total += entries_.at(name).value.size();
    return total;
  }

  // Fresh graph leaf for one parameter; gradients flow back into its slot.
  Value<T> leaf(const std::string& name) {
    auto& e = get(name);
    return make_leaf<T>(e.value, true, &e.grad);
  }

  void zero_grads() {
    for (auto& name : names_) entries_[name].grad.fill(T(0));
  }

  std::uint64_t step_count = 0;
  bool grads_ready = false;

 private:
  std::vector<std::string> names_;
  std::map<std::string, ParamEntry<T>> entries_;
};

// Marks gradients as populated; pairing backward with the store keeps
// adam_step honest about stepping on stale or absent gradients.
template <typename T>
void backward(const Value<T>& loss, ParamStore<T>& ps) {
  backward(loss);
  ps.grads_ready = true;
}

// One Adam update over every entry. Bias-correction exponent is
// step_count + 1 so the very first step uses t = 1; all per-element
// arithmetic runs in double before storing back.
template <typename T>
void adam_step(ParamStore<T>& ps, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
  if (!ps.grads_ready)
    throw UsageError("adam_step: gradients have not been computed");
  const double t = static_cast<double>(ps.step_count + 1);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (const auto& name : ps.names()) {
    auto& e = ps.get(name);
    for (std::size_t i = 0; i < e.value.data.size(); ++i) {
      const double g = static_cast<double>(e.grad.data[i]);
      const double m =
          beta1 * static_cast<double>(e.adam_m.data[i]) + (1.0 - beta1) * g;
      const double v =
          beta2 * static_cast<double>(e.adam_v.data[i]) + (1.0 - beta2) * g * g;
      e.adam_m.data[i] = static_cast<T>(m);
      e.adam_v.data[i] = static_cast<T>(v);
      // Correct with the stored (rounded) moments so the update is a pure
      // function of the serialized state; resume replays it bit for bit.
      const double mhat = static_cast<double>(e.adam_m.data[i]) / c1;
      const double vhat = static_cast<double>(e.adam_v.data[i]) / c2;
      e.value.data[i] = static_cast<T>(static_cast<double>(e.value.data[i]) -
                                       lr * mhat / (std::sqrt(vhat) + eps));
    }
    e.grad.fill(T(0));
  }
  ps.step_count += 1;
  ps.grads_ready = false;
}

// He-uniform fill for the direction tensors, gains set to the row norms,
// biases zero, bare scalars (the learned gates) one. Streams are keyed by
// parameter name, so values do not depend on registration order.
template <typename T>
void init_params(ParamStore<T>& ps, std::uint64_t seed) {
  auto suffix_is = [](const std::string& name, const char* suf) {
    const std::string s(suf);
    return name.size() >= s.size() &&
           name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  // Directions first: gains read their row norms.
  for (const auto& name : ps.names()) {
    if (!suffix_is(name, ".v")) continue;
    auto& e = ps.get(name);
    const std::size_t fan_in = e.value.c * e.value.h * e.value.w;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    RandomStream rs(seed, name, 0);
    for (auto& x : e.value.data)
      x = static_cast<T>(rs.next_uniform(-bound, bound));
  }
  for (const auto& name : ps.names()) {
    auto& e = ps.get(name);
    auto ends_with = [&](const char* suf) { return suffix_is(name, suf); };
    if (ends_with(".v")) {
      continue;
    } else if (ends_with(".g")) {
      const std::string vname = name.substr(0, name.size() - 2) + ".v";
      const auto& v = ps.get(vname).value;
      const std::size_t row = v.c * v.h * v.w;
      for (std::size_t o = 0; o < v.n; ++o) {
        double ss = 0.0;
        const T* vp = v.data.data() + o * row;
        for (std::size_t i = 0; i < row; ++i)
          ss += static_cast<double>(vp[i]) * static_cast<double>(vp[i]);
        e.value.data[o] = static_cast<T>(std::sqrt(ss));
      }
    } else if (ends_with(".b")) {
      e.value.fill(T(0));
    } else {
      e.value.fill(T(1));
    }
  }
}

}  // namespace overnet
