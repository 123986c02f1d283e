#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "freqseg/autodiff/tape.hpp"
#include "freqseg/autodiff/tensor.hpp"

namespace freqseg::ad {

struct GradCheckOptions {
  double eps = 1e-4;
  double tol = 1e-3;
  /// Total element budget across all parameters. Every single-element
  /// parameter is always checked; the remainder is drawn at random.
  std::size_t max_samples = 50;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckRow {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double max_rel_error = 0.0;
  double tol = 0.0;

  bool passed() const { return max_rel_error < tol; }
  std::vector<std::string> failing() const;
};

/// A loss builder: records a scalar loss on the given tape. Called once with
/// a recording tape for the analytic gradient, then repeatedly with a
/// non-recording tape for the central differences.
using LossFn = std::function<Tensor(Tape&)>;

/// Compares backward() against (f(θ+eps) - f(θ-eps)) / (2 eps) on sampled
/// elements of `params`. Parameter values are restored afterwards.
GradCheckReport finite_diff_check(const LossFn& f, std::vector<Parameter>& params,
                                  const GradCheckOptions& opts = {});

}  // namespace freqseg::ad
