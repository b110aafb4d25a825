#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "overnet/autodiff.hpp"
#include "overnet/param_store.hpp"
#include "overnet/rng.hpp"

namespace overnet {

struct FdOptions {
  double eps = 1e-3;
  // 0 means every coordinate; otherwise the number of randomly sampled
  // coordinates to check.
  std::size_t coords = 0;
  std::uint64_t seed = 0;
};

struct FdReport {
  double worst_rel = 0.0;
  std::size_t checked = 0;
  // Probes whose two endpoints straddled a relu/|.| kink. Central
  // differences are not a valid derivative oracle across a kink, so such
  // probes are discarded (and, in sampled mode, redrawn) rather than
  // compared against an inapplicable formula.
  std::size_t kink_skips = 0;

  bool ok(double tol) const { return checked > 0 && worst_rel <= tol; }
};

namespace detail {

struct KinkGuard {
  KinkGuard() { kink_recording() = true; }
  ~KinkGuard() { kink_recording() = false; }
};

}  // namespace detail

// Central-difference verification of analytic parameter gradients, 64-bit.
// make_loss rebuilds the scalar forward graph from the store's current
// values on each call. Relative error uses the symmetric definition
// |fd − g| / max(|fd|, |g|, 1e-6).
template <typename F>
FdReport fd_check(ParamStore<double>& ps, F&& make_loss, FdOptions opt = {}) {
  ps.zero_grads();
  {
    auto loss = make_loss(ps);
    backward(loss, ps);
  }

  const std::size_t total = ps.param_count();
  auto locate = [&](std::size_t flat) -> std::pair<std::string, std::size_t> {
    for (const auto& name : ps.names()) {
      const std::size_t sz = ps.get(name).value.size();
      if (flat < sz) return {name, flat};
      flat -= sz;
    }
    throw UsageError("fd_check: coordinate out of range");
  };

  auto probe = [&](double* slot, double at) {
    const double saved = *slot;
    *slot = at;
    detail::KinkGuard rec;
    auto loss = make_loss(ps);
    const double f = static_cast<double>(loss->val.data[0]);
    auto sig = kink_signature(loss);
    *slot = saved;
    return std::make_pair(f, std::move(sig));
  };

  FdReport rep;
  auto check_coord = [&](std::size_t flat) -> bool {
    auto [name, idx] = locate(flat);
    auto& e = ps.get(name);
    double* slot = &e.value.data[idx];
    const double base = *slot;
    auto [f_plus, sig_plus] = probe(slot, base + opt.eps);
    auto [f_minus, sig_minus] = probe(slot, base - opt.eps);
    if (sig_plus != sig_minus) {
      ++rep.kink_skips;
      return false;
    }
    const double fd = (f_plus - f_minus) / (2.0 * opt.eps);
    const double g = e.grad.data[idx];
    const double rel = std::fabs(fd - g) /
                       std::max({std::fabs(fd), std::fabs(g), 1e-6});
    rep.worst_rel = std::max(rep.worst_rel, rel);
    ++rep.checked;
    return true;
  };

  if (opt.coords == 0 || opt.coords >= total) {
    for (std::size_t i = 0; i < total; ++i) check_coord(i);
  } else {
    RandomStream rs(opt.seed, "fd-coords", 0);
    std::size_t attempts = 0;
    const std::size_t budget = opt.coords * 20;
    std::size_t done = 0;
    while (done < opt.coords && attempts < budget) {
      ++attempts;
      if (check_coord(rs.next_index(total))) ++done;
    }
  }
  return rep;
}

}  // namespace overnet
