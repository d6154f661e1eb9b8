#pragma once

#include <functional>
#include <span>
#include <vector>

#include "autodiff.hpp"

namespace navbench {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0; // input elements compared
};

using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Central finite differences against the tape gradient of a scalar loss.
/// `build` receives one leaf per input (all requiring gradients). The
/// per-element error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult gradcheck(const std::vector<Tensor>& inputs, const LossBuilder& build, double h = 1e-5,
                          double floor = 1e-6);

/// Random tensor with entries uniform in [-scale, scale], resampling values
/// closer than `margin` to zero (keeps finite differences off relu kinks).
Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0, double margin = 0.0);

} // namespace navbench
