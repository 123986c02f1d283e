#pragma once

#include "freqseg/image.hpp"

namespace freqseg::targets {

/// Region, edge and normalized distance supervision for one sample.
struct MultiTaskTargets {
  Mask region;
  Mask edge;
  /// Single-channel, values in [0, 1], zero on background.
  Image distance;
};

/// Binary edge map: 1 where the magnitude of the two 3x3 Sobel responses is
/// strictly positive. Borders use replicate padding, so a uniform mask has no
/// edges.
Mask sobel_edge(const Mask& region);

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel (positions outside the image count as background),
/// divided by the largest such distance. Background and empty masks give 0.
Image distance_map(const Mask& region);

MultiTaskTargets build_targets(const Mask& region);

}  // namespace freqseg::targets
