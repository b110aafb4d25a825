#pragma once

#include <vector>

#include "overnet/autodiff.hpp"
#include "overnet/ops.hpp"
#include "overnet/resample.hpp"
#include "overnet/scale.hpp"

namespace overnet {

// One network output tagged with the scale it was produced at.
template <typename T>
struct ScaledOutput {
  Rational scale;
  Value<T> out;
};

// Sum over the scale set of the mean absolute difference between each
// output and a bicubic resize of the ground-truth image to that scale's
// size.  Targets go through the same resize routine as the forward path,
// so shapes agree by construction; they are plain tensors, not graph
// nodes, and receive no gradient.
//
// lr_h / lr_w are the low-resolution input dims the outputs were produced
// from; the target for scale s has size s*lr_h x s*lr_w (round-half-up,
// matching the forward path).
template <typename T>
Value<T> multiscale_l1(const std::vector<ScaledOutput<T>>& outputs,
                       const Tensor4<T>& hr, const ScaleSet& set,
                       std::size_t lr_h, std::size_t lr_w) {
  Value<T> total;
  bool first = true;
  for (const auto& s : set.scales) {
    const ScaledOutput<T>* match = nullptr;
    for (const auto& o : outputs) {
      if (o.scale == s) {
        match = &o;
        break;
      }
    }
    if (!match)
      throw UsageError("multiscale_l1: no output for scale " + s.str());
    Tensor4<T> target =
        resize(hr, s.scale_up(lr_h), s.scale_up(lr_w), ResampleKernel::Cubic);
    Value<T> term = mean_abs_diff(match->out, target);
    total = first ? term : add(total, term);
    first = false;
  }
  return total;
}

}  // namespace overnet
