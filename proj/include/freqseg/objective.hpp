#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "freqseg/autodiff/tape.hpp"
#include "freqseg/autodiff/tensor.hpp"
#include "freqseg/image.hpp"
#include "freqseg/network.hpp"
#include "freqseg/targets.hpp"

namespace freqseg::objective {

using ad::Tape;
using ad::Tensor;

/// Mean binary cross-entropy on logits, in the overflow-free form
/// max(z, 0) - z t + log(1 + exp(-|z|)).
Tensor bce_with_logits(Tape& tape, const Tensor& logits, const Tensor& target);

/// Mean squared difference.
Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target);

/// Full-resolution supervision for a batch, each (N, 1, H, W).
struct BatchTargets {
  Tensor region;
  Tensor edge;
  Tensor distance;
};

BatchTargets stack_targets(const std::vector<const targets::MultiTaskTargets*>& samples);

struct BlockLoss {
  double region = 0.0;
  double edge = 0.0;
  double distance = 0.0;
};

struct LossComponent {
  std::string name;
  double value;
};

struct LossReport {
  bool mtl = true;
  double r0 = 0.0;
  std::array<BlockLoss, 4> blocks{};
  double total = 0.0;
  /// Differentiable total, for backward().
  Tensor total_tensor;

  /// r0 first, then region/edge/distance per block (region only without mtl).
  std::vector<LossComponent> components() const;
};

/// Deep-supervision objective: BCE on R0 upsampled x16, plus per decoder
/// block i the BCE of region and edge logits and the MSE of the distance map,
/// each upsampled by 2^(4-i) to the target resolution.
LossReport total_loss(Tape& tape, const net::ModelOutputs& outputs, const BatchTargets& targets);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
};

/// Pixel-count metrics. A zero denominator yields 1 when both masks are
/// empty and 0 otherwise.
MetricsReport metrics(const Mask& pred, const Mask& gt);

/// Per-image average.
MetricsReport mean_metrics(std::span<const MetricsReport> reports);

}  // namespace freqseg::objective
