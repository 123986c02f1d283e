#include "freqseg/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "freqseg/error.hpp"

namespace freqseg::ad {
namespace {

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int ceil_div(int a, int b) { return -floor_div(-a, b); }

// Valid output-column range [lo, hi] for a tap whose input column is
// ow * stride + offset.
struct ColumnRange {
  int lo;
  int hi;
};

ColumnRange tap_columns(int offset, int stride, int in_w, int out_w) {
  int lo = std::max(0, ceil_div(-offset, stride));
  int hi = std::min(out_w - 1, floor_div(in_w - 1 - offset, stride));
  return {lo, hi};
}

struct ConvGeometry {
  Shape in;
  Shape out;
  int k;
  Conv2dOptions opts;
};

void conv_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                  std::span<const double> b, std::span<double> y) {
  const int cin = g.in.c, cout = g.out.c, k = g.k;
  const int s = g.opts.stride, p = g.opts.padding, d = g.opts.dilation;
  for (int n = 0; n < g.in.n; ++n) {
    for (int co = 0; co < cout; ++co) {
      double* out = &y[(static_cast<std::size_t>(n) * cout + co) * g.out.plane()];
      const double bias = b.empty() ? 0.0 : b[co];
      std::fill(out, out + g.out.plane(), bias);
      for (int ci = 0; ci < cin; ++ci) {
        const double* in = &x[(static_cast<std::size_t>(n) * cin + ci) * g.in.plane()];
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = w[((static_cast<std::size_t>(co) * cin + ci) * k + kh) * k + kw];
            const int col_off = kw * d - p;
            const ColumnRange cols = tap_columns(col_off, s, g.in.w, g.out.w);
            if (cols.lo > cols.hi) continue;
            for (int oh = 0; oh < g.out.h; ++oh) {
              const int ih = oh * s + kh * d - p;
              if (ih < 0 || ih >= g.in.h) continue;
              const double* in_row = in + static_cast<std::size_t>(ih) * g.in.w;
              double* out_row = out + static_cast<std::size_t>(oh) * g.out.w;
              for (int ow = cols.lo; ow <= cols.hi; ++ow) {
                out_row[ow] += wv * in_row[ow * s + col_off];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> gy, std::span<double> gx, std::span<double> gw,
                   std::span<double> gb) {
  const int cin = g.in.c, cout = g.out.c, k = g.k;
  const int s = g.opts.stride, p = g.opts.padding, d = g.opts.dilation;
  for (int n = 0; n < g.in.n; ++n) {
    for (int co = 0; co < cout; ++co) {
      const double* gout = &gy[(static_cast<std::size_t>(n) * cout + co) * g.out.plane()];
      if (!gb.empty()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.out.plane(); ++i) acc += gout[i];
        gb[co] += acc;
      }
      for (int ci = 0; ci < cin; ++ci) {
        const std::size_t in_off = (static_cast<std::size_t>(n) * cin + ci) * g.in.plane();
        const double* in = &x[in_off];
        double* gin = gx.empty() ? nullptr : &gx[in_off];
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * k + kh) * k + kw;
            const double wv = w[widx];
            const int col_off = kw * d - p;
            const ColumnRange cols = tap_columns(col_off, s, g.in.w, g.out.w);
            if (cols.lo > cols.hi) continue;
            double wacc = 0.0;
            for (int oh = 0; oh < g.out.h; ++oh) {
              const int ih = oh * s + kh * d - p;
              if (ih < 0 || ih >= g.in.h) continue;
              const std::size_t row = static_cast<std::size_t>(ih) * g.in.w;
              const double* go_row = gout + static_cast<std::size_t>(oh) * g.out.w;
              const double* in_row = in + row;
              for (int ow = cols.lo; ow <= cols.hi; ++ow) {
                wacc += go_row[ow] * in_row[ow * s + col_off];
              }
              if (gin != nullptr) {
                double* gin_row = gin + row;
                for (int ow = cols.lo; ow <= cols.hi; ++ow) {
                  gin_row[ow * s + col_off] += wv * go_row[ow];
                }
              }
            }
            if (!gw.empty()) gw[widx] += wacc;
          }
        }
      }
    }
  }
}

std::span<double> grad_or_empty(const Tensor& t) {
  if (t.defined() && t.requires_grad()) return t.mutable_grad();
  return {};
}

}  // namespace

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dOptions opts) {
  if (opts.stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  if (opts.dilation < 1) throw ArgumentError("conv2d: dilation must be >= 1");
  if (opts.padding < 0) throw ArgumentError("conv2d: padding must be >= 0");
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (ws.c != x.shape().c) {
    throw ShapeError("conv2d: input has " + std::to_string(x.shape().c) +
                     " channels but weight expects " + std::to_string(ws.c));
  }
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(ws.n)) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.numel()) +
                     " does not match C_out " + std::to_string(ws.n));
  }
  const Shape& in = x.shape();
  const int k = ws.h;
  const int oh = (in.h + 2 * opts.padding - opts.dilation * (k - 1) - 1) / opts.stride + 1;
  const int ow = (in.w + 2 * opts.padding - opts.dilation * (k - 1) - 1) / opts.stride + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d: kernel larger than padded input " + in.str());

  const ConvGeometry g{in, Shape{in.n, ws.n, oh, ow}, k, opts};
  Tensor y(g.out);
  conv_forward(g, x.data(), weight.data(),
               bias.defined() ? bias.data() : std::span<const double>{}, y.data());

  if (tape.wants({&x, &weight, &bias})) {
    tape.record({x, weight, bias}, y, [g, x, weight, bias, y]() mutable {
      conv_backward(g, x.data(), weight.data(), y.grad(), grad_or_empty(x),
                    grad_or_empty(weight), grad_or_empty(bias));
    });
  }
  return y;
}

Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   RunningStats& stats, bool training) {
  const Shape& s = x.shape();
  const std::size_t channels = static_cast<std::size_t>(s.c);
  if (gamma.numel() != channels || beta.numel() != channels) {
    throw ShapeError("batchnorm2d: gamma/beta length must equal channel count " +
                     std::to_string(s.c));
  }
  if (stats.mean.size() != channels || stats.var.size() != channels) {
    throw ShapeError("batchnorm2d: running statistics sized for a different channel count");
  }
  const std::size_t count = static_cast<std::size_t>(s.n) * s.plane();
  if (training && count < 2) {
    throw DegenerateError("batchnorm2d: training mode needs at least 2 values per channel, got " +
                          std::to_string(count) + " for shape " + s.str());
  }

  std::vector<double> mu(channels), inv_std(channels);
  Tensor xhat(s);
  Tensor y(s);
  auto xd = x.data();
  auto xh = xhat.data();
  auto yd = y.data();
  for (std::size_t c = 0; c < channels; ++c) {
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = &xd[(static_cast<std::size_t>(n) * channels + c) * s.plane()];
        for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      }
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = &xd[(static_cast<std::size_t>(n) * channels + c) * s.plane()];
        for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - m) * (p[i] - m);
      }
      const double var = sq / static_cast<double>(count);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
      const double unbiased = sq / static_cast<double>(count - 1);
      stats.mean[c] = static_cast<float>((1.0 - kBatchNormMomentum) * stats.mean[c] +
                                         kBatchNormMomentum * m);
      stats.var[c] = static_cast<float>((1.0 - kBatchNormMomentum) * stats.var[c] +
                                        kBatchNormMomentum * unbiased);
    } else {
      mu[c] = stats.mean[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(stats.var[c]) + kBatchNormEps);
    }
    const double gm = gamma.data()[c], bt = beta.data()[c];
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        xh[off + i] = (xd[off + i] - mu[c]) * inv_std[c];
        yd[off + i] = gm * xh[off + i] + bt;
      }
    }
  }

  if (tape.wants({&x, &gamma, &beta})) {
    tape.record({x, gamma, beta}, y,
                [x, gamma, beta, y, xhat, inv_std, training, count]() mutable {
      const Shape& s = x.shape();
      const std::size_t channels = static_cast<std::size_t>(s.c);
      auto gy = y.grad();
      auto xh = xhat.data();
      auto gx = grad_or_empty(x);
      auto gg = grad_or_empty(gamma);
      auto gbt = grad_or_empty(beta);
      for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < s.n; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i) {
            sum_dy += gy[off + i];
            sum_dy_xhat += gy[off + i] * xh[off + i];
          }
        }
        if (!gg.empty()) gg[c] += sum_dy_xhat;
        if (!gbt.empty()) gbt[c] += sum_dy;
        if (gx.empty()) continue;
        const double gm = gamma.data()[c];
        const double m = static_cast<double>(count);
        for (int n = 0; n < s.n; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i) {
            if (training) {
              gx[off + i] += gm * inv_std[c] *
                             (gy[off + i] - sum_dy / m - xh[off + i] * sum_dy_xhat / m);
            } else {
              gx[off + i] += gm * inv_std[c] * gy[off + i];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor y(x.shape());
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto xd = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (xd[i] > 0.0) gx[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor y(x.shape());
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = sigmoid_scalar(xd[i]);
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto yd = y.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * yd[i] * (1.0 - yd[i]);
    });
  }
  return y;
}

Tensor max_pool2d(Tape& tape, const Tensor& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("max_pool2d: spatial dims must be even, got " + s.str());
  }
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor y(os);
  std::vector<std::size_t> argmax(os.numel());
  auto xd = x.data();
  auto yd = y.data();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int oh = 0; oh < os.h; ++oh) {
      for (int ow = 0; ow < os.w; ++ow, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * oh) * s.w + 2 * ow;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * oh + dy) * s.w + 2 * ow + dx;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        argmax[o] = best;
        yd[o] = xd[best];
      }
    }
  }
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y, argmax = std::move(argmax)]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
    });
  }
  return y;
}

namespace {

struct Lerp {
  int lo;
  int hi;
  double frac;
};

// Source taps for each output coordinate under the half-pixel-center
// convention: src = (dst + 0.5) / scale - 0.5, clamped at the borders.
std::vector<Lerp> lerp_table(int in, int scale) {
  std::vector<Lerp> table(static_cast<std::size_t>(in) * scale);
  for (int o = 0; o < in * scale; ++o) {
    double src = (o + 0.5) / scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    table[o] = Lerp{lo, hi, src - lo};
  }
  return table;
}

}  // namespace

Tensor bilinear_upsample(Tape& tape, const Tensor& x, int scale) {
  if (scale != 2 && scale != 4 && scale != 8 && scale != 16) {
    throw ArgumentError("bilinear_upsample: scale must be one of 2, 4, 8, 16; got " +
                        std::to_string(scale));
  }
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, s.h * scale, s.w * scale};
  auto rows = lerp_table(s.h, scale);
  auto cols = lerp_table(s.w, scale);
  Tensor y(os);
  auto xd = x.data();
  auto yd = y.data();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const double* in = &xd[static_cast<std::size_t>(nc) * s.plane()];
    double* out = &yd[static_cast<std::size_t>(nc) * os.plane()];
    for (int oy = 0; oy < os.h; ++oy) {
      const Lerp& r = rows[oy];
      const double* top = in + static_cast<std::size_t>(r.lo) * s.w;
      const double* bot = in + static_cast<std::size_t>(r.hi) * s.w;
      for (int ox = 0; ox < os.w; ++ox) {
        const Lerp& c = cols[ox];
        // a + t * (b - a) form keeps constant inputs exactly constant.
        const double t = top[c.lo] + c.frac * (top[c.hi] - top[c.lo]);
        const double b = bot[c.lo] + c.frac * (bot[c.hi] - bot[c.lo]);
        out[static_cast<std::size_t>(oy) * os.w + ox] = t + r.frac * (b - t);
      }
    }
  }
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y, rows = std::move(rows), cols = std::move(cols)]() mutable {
      const Shape& s = x.shape();
      const Shape& os = y.shape();
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (int nc = 0; nc < s.n * s.c; ++nc) {
        double* gin = &gx[static_cast<std::size_t>(nc) * s.plane()];
        const double* gout = &gy[static_cast<std::size_t>(nc) * os.plane()];
        for (int oy = 0; oy < os.h; ++oy) {
          const Lerp& r = rows[oy];
          for (int ox = 0; ox < os.w; ++ox) {
            const Lerp& c = cols[ox];
            const double g = gout[static_cast<std::size_t>(oy) * os.w + ox];
            const double gt = g * (1.0 - r.frac);
            const double gb = g * r.frac;
            gin[static_cast<std::size_t>(r.lo) * s.w + c.lo] += gt * (1.0 - c.frac);
            gin[static_cast<std::size_t>(r.lo) * s.w + c.hi] += gt * c.frac;
            gin[static_cast<std::size_t>(r.hi) * s.w + c.lo] += gb * (1.0 - c.frac);
            gin[static_cast<std::size_t>(r.hi) * s.w + c.hi] += gb * c.frac;
          }
        }
      }
    });
  }
  return y;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw ArgumentError("concat_channels: no inputs");
  const Shape& first = xs[0].shape();
  int channels = 0;
  for (const Tensor& t : xs) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: inputs disagree on batch/spatial dims: " +
                       first.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  Tensor y(os);
  auto yd = y.data();
  for (int n = 0; n < os.n; ++n) {
    std::size_t dst = static_cast<std::size_t>(n) * channels * os.plane();
    for (const Tensor& t : xs) {
      const std::size_t len = static_cast<std::size_t>(t.shape().c) * os.plane();
      auto src = t.data().subspan(static_cast<std::size_t>(n) * len, len);
      std::copy(src.begin(), src.end(), yd.begin() + static_cast<std::ptrdiff_t>(dst));
      dst += len;
    }
  }
  std::vector<Tensor> inputs(xs.begin(), xs.end());
  if (tape.wants(inputs)) {
    tape.record(inputs, y, [inputs, y]() mutable {
      const Shape& os = y.shape();
      auto gy = y.grad();
      for (int n = 0; n < os.n; ++n) {
        std::size_t src = static_cast<std::size_t>(n) * os.c * os.plane();
        for (Tensor& t : inputs) {
          const std::size_t len = static_cast<std::size_t>(t.shape().c) * os.plane();
          if (t.requires_grad()) {
            auto g = t.mutable_grad().subspan(static_cast<std::size_t>(n) * len, len);
            for (std::size_t i = 0; i < len; ++i) g[i] += gy[src + i];
          }
          src += len;
        }
      }
    });
  }
  return y;
}

Tensor add(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "add");
  Tensor z(x.shape());
  auto xd = x.data(), yd = y.data();
  auto zd = z.data();
  for (std::size_t i = 0; i < zd.size(); ++i) zd[i] = xd[i] + yd[i];
  if (tape.wants({&x, &y})) {
    tape.record({x, y}, z, [x, y, z]() mutable {
      auto gz = z.grad();
      for (const Tensor* t : {&x, &y}) {
        if (!t->requires_grad()) continue;
        auto g = t->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gz[i];
      }
    });
  }
  return z;
}

Tensor mul(Tape& tape, const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "mul");
  Tensor z(x.shape());
  auto xd = x.data(), yd = y.data();
  auto zd = z.data();
  for (std::size_t i = 0; i < zd.size(); ++i) zd[i] = xd[i] * yd[i];
  if (tape.wants({&x, &y})) {
    tape.record({x, y}, z, [x, y, z]() mutable {
      auto gz = z.grad();
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        auto yd = y.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gz[i] * yd[i];
      }
      if (y.requires_grad()) {
        auto g = y.mutable_grad();
        auto xd = x.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gz[i] * xd[i];
      }
    });
  }
  return z;
}

Tensor one_minus(Tape& tape, const Tensor& x) {
  Tensor y(x.shape());
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = 1.0 - xd[i];
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= gy[i];
    });
  }
  return y;
}

Tensor scale_by_param(Tape& tape, const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("scale_by_param: scale must hold one element, got " + s.shape().str());
  Tensor y(x.shape());
  const double sv = s.data()[0];
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = sv * xd[i];
  if (tape.wants({&x, &s})) {
    tape.record({x, s}, y, [x, s, y]() mutable {
      auto gy = y.grad();
      auto xd = x.data();
      if (x.requires_grad()) {
        const double sv = s.data()[0];
        auto gx = x.mutable_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += sv * gy[i];
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < gy.size(); ++i) acc += xd[i] * gy[i];
        s.mutable_grad()[0] += acc;
      }
    });
  }
  return y;
}

Tensor mul_channel_broadcast(Tape& tape, const Tensor& x, const Tensor& gate) {
  const Shape& s = x.shape();
  const Shape& gs = gate.shape();
  if (gs.c != 1 || gs.n != s.n || gs.h != s.h || gs.w != s.w) {
    throw ShapeError("mul_channel_broadcast: gate " + gs.str() + " incompatible with " + s.str());
  }
  Tensor y(s);
  auto xd = x.data(), gd = gate.data();
  auto yd = y.data();
  for (int n = 0; n < s.n; ++n) {
    const double* g = &gd[static_cast<std::size_t>(n) * s.plane()];
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) yd[off + i] = xd[off + i] * g[i];
    }
  }
  if (tape.wants({&x, &gate})) {
    tape.record({x, gate}, y, [x, gate, y]() mutable {
      const Shape& s = x.shape();
      auto gy = y.grad();
      auto xd = x.data(), gd = gate.data();
      auto gx = grad_or_empty(x);
      auto gg = grad_or_empty(gate);
      for (int n = 0; n < s.n; ++n) {
        const std::size_t goff = static_cast<std::size_t>(n) * s.plane();
        for (int c = 0; c < s.c; ++c) {
          const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i) {
            if (!gx.empty()) gx[off + i] += gy[off + i] * gd[goff + i];
            if (!gg.empty()) gg[goff + i] += gy[off + i] * xd[off + i];
          }
        }
      }
    });
  }
  return y;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  Tensor y = Tensor::scalar(stable_sum(x.data()) / n);
  if (tape.wants({&x})) {
    tape.record({x}, y, [x, y, n]() mutable {
      const double g = y.grad()[0] / n;
      for (double& v : x.mutable_grad()) v += g;
    });
  }
  return y;
}

}  // namespace freqseg::ad
