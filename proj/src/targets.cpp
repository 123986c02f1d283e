#include "freqseg/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace freqseg::targets {
namespace {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) over finite f.
void squared_distance_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    // z[0] is -inf, so k never drops below 0.
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Mask sobel_edge(const Mask& region) {
  const int h = region.height, w = region.width;
  Mask edge(h, w);
  auto px = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return static_cast<int>(region.at(y, x));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                     (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const int gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                     (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      edge.at(y, x) = (gx * gx + gy * gy > 0) ? 1 : 0;
    }
  }
  return edge;
}

Image distance_map(const Mask& region) {
  const int h = region.height, w = region.width;
  Image out(1, h, w);
  if (region.empty_foreground()) return out;

  // Padded grid with a one-pixel background ring; the nearest outside
  // position to any pixel always lies on that ring.
  const int ph = h + 2, pw = w + 2;
  auto fg = [&](int y, int x) {
    return y >= 1 && y <= h && x >= 1 && x <= w && region.at(y - 1, x - 1) != 0;
  };
  // Column pass: exact squared distance to background within the column.
  std::vector<double> col_sq(static_cast<std::size_t>(ph) * pw);
  for (int x = 0; x < pw; ++x) {
    std::vector<int> dist(static_cast<std::size_t>(ph));
    int last = -1;
    for (int y = 0; y < ph; ++y) {
      if (!fg(y, x)) last = y;
      dist[y] = (last < 0) ? ph + pw : y - last;
    }
    last = -1;
    for (int y = ph - 1; y >= 0; --y) {
      if (!fg(y, x)) last = y;
      if (last >= 0) dist[y] = std::min(dist[y], last - y);
    }
    for (int y = 0; y < ph; ++y) {
      col_sq[static_cast<std::size_t>(y) * pw + x] = static_cast<double>(dist[y]) * dist[y];
    }
  }
  // Row pass.
  std::vector<double> f(static_cast<std::size_t>(pw)), d(static_cast<std::size_t>(pw));
  double max_dist = 0.0;
  for (int y = 1; y <= h; ++y) {
    for (int x = 0; x < pw; ++x) f[x] = col_sq[static_cast<std::size_t>(y) * pw + x];
    squared_distance_1d(f, d);
    for (int x = 1; x <= w; ++x) {
      if (!fg(y, x)) continue;
      const double dist = std::sqrt(d[x]);
      out.at(0, y - 1, x - 1) = dist;
      max_dist = std::max(max_dist, dist);
    }
  }
  for (double& v : out.data) v /= max_dist;
  return out;
}

MultiTaskTargets build_targets(const Mask& region) {
  Mask binary = region;
  for (auto& v : binary.data) v = v ? 1 : 0;
  Mask edge = sobel_edge(binary);
  Image dist = distance_map(binary);
  return {std::move(binary), std::move(edge), std::move(dist)};
}

}  // namespace freqseg::targets
