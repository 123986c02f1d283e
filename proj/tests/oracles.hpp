#pragma once

// Independent reference implementations. Deliberately slow and direct; they
// share no code with the library beyond its plain data types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "freqseg/autodiff/tensor.hpp"
#include "freqseg/image.hpp"

namespace oracle {

using freqseg::Image;
using freqseg::Mask;
using freqseg::ad::Shape;
using freqseg::ad::Tensor;

inline Tensor random_tensor(std::mt19937_64& rng, Shape s, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline Image random_image(std::mt19937_64& rng, int c, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(c, h, w);
  for (double& v : img.data) v = u(rng);
  return img;
}

inline Mask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Mask m(h, w);
  for (auto& v : m.data) v = b(rng) ? 1 : 0;
  return m;
}

// Six nested loops over output position, input channel and kernel taps.
inline std::vector<double> conv2d(const Tensor& x, const Tensor& w, const std::vector<double>& bias, int stride,
                                  int pad, int dil, int& oh, int& ow) {
  const Shape xs = x.shape(), ws = w.shape();
  oh = (xs.h + 2 * pad - dil * (ws.h - 1) - 1) / stride + 1;
  ow = (xs.w + 2 * pad - dil * (ws.w - 1) - 1) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(xs.n) * ws.n * oh * ow);
  std::size_t idx = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int c = 0; c < xs.c; ++c)
            for (int ki = 0; ki < ws.h; ++ki)
              for (int kj = 0; kj < ws.w; ++kj) {
                const int yy = i * stride - pad + ki * dil;
                const int xx = j * stride - pad + kj * dil;
                if (yy < 0 || yy >= xs.h || xx < 0 || xx >= xs.w) continue;
                acc += x.at(n, c, yy, xx) * w.at(o, c, ki, kj);
              }
          y[idx++] = acc;
        }
  return y;
}

// Half-pixel-center bilinear sample of plane (n, c) at output pixel (i, j).
inline double bilinear(const Tensor& x, int n, int c, int i, int j, int scale) {
  const Shape s = x.shape();
  auto src = [&](int o, int extent) {
    double p = (o + 0.5) / scale - 0.5;
    return std::clamp(p, 0.0, static_cast<double>(extent - 1));
  };
  const double py = src(i, s.h), px = src(j, s.w);
  const int y0 = static_cast<int>(std::floor(py)), x0 = static_cast<int>(std::floor(px));
  const int y1 = std::min(y0 + 1, s.h - 1), x1 = std::min(x0 + 1, s.w - 1);
  const double fy = py - y0, fx = px - x0;
  return (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) + fx * x.at(n, c, y0, x1)) +
         fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1));
}

// O(H^2 W^2) DFT with frequency index u - H/2 at row u.
inline std::vector<std::complex<double>> dft_centered(const Image& img) {
  const int H = img.height, W = img.width;
  std::vector<std::complex<double>> out(static_cast<std::size_t>(img.channels) * H * W);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int c = 0; c < img.channels; ++c)
    for (int u = 0; u < H; ++u)
      for (int v = 0; v < W; ++v) {
        const double fu = u - H / 2, fv = v - W / 2;
        std::complex<double> acc = 0.0;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const double ang = -two_pi * (fu * y / H + fv * x / W);
            acc += img.at(c, y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
          }
        out[(static_cast<std::size_t>(c) * H + u) * W + v] = acc;
      }
  return out;
}

inline Image idft_centered(const std::vector<std::complex<double>>& spec, int C, int H, int W) {
  Image img(C, H, W);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        std::complex<double> acc = 0.0;
        for (int u = 0; u < H; ++u)
          for (int v = 0; v < W; ++v) {
            const double fu = u - H / 2, fv = v - W / 2;
            const double ang = two_pi * (fu * y / H + fv * x / W);
            acc += spec[(static_cast<std::size_t>(c) * H + u) * W + v] *
                   std::complex<double>(std::cos(ang), std::sin(ang));
          }
        img.at(c, y, x) = acc.real() / (H * W);
      }
  return img;
}

// Sort bins by squared radius, accumulate shell by shell, keep the largest
// radius^2 whose cumulative share stays within r.
inline std::int64_t cutoff_sort_scan(const std::vector<std::complex<double>>& spec, int C, int H, int W, double r) {
  struct Bin {
    std::int64_t r2;
    double p;
  };
  std::vector<Bin> bins;
  for (int c = 0; c < C; ++c)
    for (int u = 0; u < H; ++u)
      for (int v = 0; v < W; ++v) {
        const std::int64_t du = u - H / 2, dv = v - W / 2;
        bins.push_back({du * du + dv * dv, std::norm(spec[(static_cast<std::size_t>(c) * H + u) * W + v])});
      }
  std::stable_sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) { return a.r2 < b.r2; });
  std::vector<std::pair<std::int64_t, double>> cumulative;
  double acc = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    acc += bins[i].p;
    if (i + 1 == bins.size() || bins[i + 1].r2 != bins[i].r2) cumulative.emplace_back(bins[i].r2, acc);
  }
  const double total = acc;
  std::int64_t best = 0;
  for (const auto& [r2, p] : cumulative) {
    if (p / total <= r) best = r2;
    else break;
  }
  return best;
}

// Direct 3x3 Sobel with clamp-to-edge sampling.
inline Mask sobel(const Mask& m) {
  static const int gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  Mask e(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      int sx = 0, sy = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, m.height - 1), xx = std::clamp(x + dx, 0, m.width - 1);
          sx += gx[dy + 1][dx + 1] * m.at(yy, xx);
          sy += gy[dy + 1][dx + 1] * m.at(yy, xx);
        }
      e.at(y, x) = (sx * sx + sy * sy) > 0 ? 1 : 0;
    }
  return e;
}

// Minimum Euclidean distance to any background pixel, including the ring of
// virtual background just outside the image, then max-normalized.
inline Image distance_brute(const Mask& m) {
  Image d(1, m.height, m.width);
  std::vector<std::pair<int, int>> bg;
  for (int y = -1; y <= m.height; ++y)
    for (int x = -1; x <= m.width; ++x) {
      const bool outside = y < 0 || x < 0 || y >= m.height || x >= m.width;
      if (outside || m.at(y, x) == 0) bg.emplace_back(y, x);
    }
  double mx = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (m.at(y, x) == 0) continue;
      long best = std::numeric_limits<long>::max();
      for (auto [by, bx] : bg) best = std::min<long>(best, long(by - y) * (by - y) + long(bx - x) * (bx - x));
      d.at(0, y, x) = std::sqrt(static_cast<double>(best));
      mx = std::max(mx, d.at(0, y, x));
    }
  if (mx > 0.0)
    for (double& v : d.data) v /= mx;
  return d;
}

struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const Mask& p, const Mask& g) {
  Counts c;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    if (p.data[i] && g.data[i]) ++c.tp;
    else if (p.data[i]) ++c.fp;
    else if (g.data[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace oracle
