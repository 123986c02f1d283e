#pragma once

#include <span>
#include <vector>

#include "freqseg/autodiff/tape.hpp"
#include "freqseg/autodiff/tensor.hpp"

namespace freqseg::ad {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// Zero-padded 2-D cross-correlation. `weight` is (C_out, C_in, k, k);
/// `bias` may be undefined or hold C_out elements.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dOptions opts = {});

/// Padding that keeps H and W unchanged for an odd kernel at stride 1.
inline int same_padding(int kernel, int dilation) { return dilation * (kernel - 1) / 2; }

/// Per-channel running estimates. Stored at 32-bit precision; statistics are
/// accumulated in double.
struct RunningStats {
  std::vector<float> mean;
  std::vector<float> var;

  explicit RunningStats(int channels = 0)
      : mean(static_cast<std::size_t>(channels), 0.0f),
        var(static_cast<std::size_t>(channels), 1.0f) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Training mode normalizes with biased batch statistics and folds the
/// unbiased variance into `stats`; eval mode uses `stats` as-is.
Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   RunningStats& stats, bool training);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);

/// 2x2 max pooling with stride 2. H and W must be even.
Tensor max_pool2d(Tape& tape, const Tensor& x);

/// Half-pixel-center bilinear interpolation, scale in {2, 4, 8, 16}.
Tensor bilinear_upsample(Tape& tape, const Tensor& x, int scale);

Tensor concat_channels(Tape& tape, std::span<const Tensor> xs);
Tensor add(Tape& tape, const Tensor& x, const Tensor& y);
Tensor mul(Tape& tape, const Tensor& x, const Tensor& y);
/// 1 - x elementwise.
Tensor one_minus(Tape& tape, const Tensor& x);
/// x scaled by a single-element tensor s.
Tensor scale_by_param(Tape& tape, const Tensor& x, const Tensor& s);
/// x (N, C, H, W) times gate (N, 1, H, W) broadcast over channels.
Tensor mul_channel_broadcast(Tape& tape, const Tensor& x, const Tensor& gate);
/// Mean over every element; returns a 1x1x1x1 tensor.
Tensor mean(Tape& tape, const Tensor& x);

/// Numerically stable sigmoid of a scalar.
double sigmoid_scalar(double z);

/// Compensated (Neumaier) sum.
double stable_sum(std::span<const double> values);

}  // namespace freqseg::ad
