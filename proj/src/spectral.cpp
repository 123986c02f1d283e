#include "freqseg/spectral.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "freqseg/error.hpp"

namespace freqseg::spectral {
namespace {

// Shifted 1-D DFT matrix: row u holds exp(sign * 2 pi i * (u - N/2) * x / N).
std::vector<Complex> dft_matrix(int n, double sign) {
  std::vector<Complex> table(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * k / n;
    table[k] = Complex(std::cos(angle), std::sin(angle));
  }
  std::vector<Complex> m(static_cast<std::size_t>(n) * n);
  for (int u = 0; u < n; ++u) {
    const long long freq = centered(u, n);
    for (int x = 0; x < n; ++x) {
      long long idx = (freq * x) % n;
      if (idx < 0) idx += n;
      m[static_cast<std::size_t>(u) * n + x] = table[static_cast<std::size_t>(idx)];
    }
  }
  return m;
}

// Applies `rows` along the height axis and `cols` along the width axis of an
// H x W plane. For the forward direction rows/cols are indexed [u][x]; the
// inverse direction uses the transposed reading [x][u].
void transform_plane(const Complex* in, Complex* out, int h, int w, const std::vector<Complex>& rows,
                     const std::vector<Complex>& cols, bool inverse) {
  std::vector<Complex> tmp(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int v = 0; v < w; ++v) {
      Complex acc{};
      for (int x = 0; x < w; ++x) {
        const Complex& t = inverse ? cols[static_cast<std::size_t>(x) * w + v]
                                   : cols[static_cast<std::size_t>(v) * w + x];
        acc += in[static_cast<std::size_t>(y) * w + x] * t;
      }
      tmp[static_cast<std::size_t>(y) * w + v] = acc;
    }
  }
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      Complex acc{};
      for (int y = 0; y < h; ++y) {
        const Complex& t = inverse ? rows[static_cast<std::size_t>(y) * h + u]
                                   : rows[static_cast<std::size_t>(u) * h + y];
        acc += tmp[static_cast<std::size_t>(y) * w + v] * t;
      }
      out[static_cast<std::size_t>(u) * w + v] = acc;
    }
  }
}

void require_finite(const Image& image) {
  for (double v : image.data) {
    if (!std::isfinite(v)) throw NumericalError("spectral: image contains non-finite values");
  }
}

}  // namespace

PowerSpectrumRatio::PowerSpectrumRatio(double r) : r_(r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ArgumentError("power spectrum ratio must lie in [0, 1], got " + std::to_string(r));
  }
}

ComplexSpectrum dft2d_shifted(const Image& image) {
  if (image.channels < 1 || image.height < 1 || image.width < 1) {
    throw ShapeError("dft2d_shifted: empty image");
  }
  require_finite(image);
  const int h = image.height, w = image.width;
  const auto rows = dft_matrix(h, -1.0);
  const auto cols = dft_matrix(w, -1.0);
  ComplexSpectrum spec{image.channels, h, w,
                       std::vector<Complex>(image.data.size())};
  std::vector<Complex> plane(image.plane_size());
  for (int c = 0; c < image.channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * image.plane_size();
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = Complex(image.data[off + i], 0.0);
    transform_plane(plane.data(), &spec.bins[off], h, w, rows, cols, false);
  }
  return spec;
}

Image idft2d_shifted(const ComplexSpectrum& spectrum, double* max_imag) {
  const int h = spectrum.height, w = spectrum.width;
  // Inverse matrices are indexed [x][u]; dft_matrix(+1) gives [u][x], and the
  // kernel exp(+2 pi i (u - N/2) x / N) is the same table read transposed.
  const auto rows = dft_matrix(h, +1.0);
  const auto cols = dft_matrix(w, +1.0);
  Image out(spectrum.channels, h, w);
  const double norm = 1.0 / (static_cast<double>(h) * w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<Complex> res(plane);
  double worst = 0.0;
  for (int c = 0; c < spectrum.channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * plane;
    transform_plane(&spectrum.bins[off], res.data(), h, w, rows, cols, true);
    for (std::size_t i = 0; i < plane; ++i) {
      out.data[off + i] = res[i].real() * norm;
      worst = std::max(worst, std::abs(res[i].imag() * norm));
    }
  }
  if (max_imag != nullptr) *max_imag = worst;
  return out;
}

double total_power(const ComplexSpectrum& spectrum) {
  double t = 0.0;
  for (const Complex& z : spectrum.bins) t += std::norm(z);
  return t;
}

std::int64_t cutoff_radius(const ComplexSpectrum& spectrum, PowerSpectrumRatio r) {
  // Shell power keyed by centered radius^2, ascending.
  std::map<std::int64_t, double> shells;
  for (int u = 0; u < spectrum.height; ++u) {
    const std::int64_t du = centered(u, spectrum.height);
    for (int v = 0; v < spectrum.width; ++v) {
      const std::int64_t dv = centered(v, spectrum.width);
      double power = 0.0;
      for (int c = 0; c < spectrum.channels; ++c) power += std::norm(spectrum.at(c, u, v));
      shells[du * du + dv * dv] += power;
    }
  }
  // T is the final cumulative sum; P(max radius) / T == 1 exactly.
  std::vector<std::pair<std::int64_t, double>> cumulative;
  cumulative.reserve(shells.size());
  double running = 0.0;
  for (const auto& [r2, p] : shells) {
    running += p;
    cumulative.emplace_back(r2, running);
  }
  const double total = running;
  if (!(total > 0.0)) {
    throw DegenerateError("cutoff_radius: total power is zero (blank image)");
  }
  std::int64_t best = 0;
  for (const auto& [r2, p] : cumulative) {
    if (p / total <= r.value()) {
      best = r2;
    } else {
      break;
    }
  }
  return best;
}

FrequencyMask build_low_mask(int height, int width, std::int64_t radius2) {
  if (height < 1 || width < 1) throw ShapeError("build_low_mask: empty extent");
  if (radius2 < 0) throw ArgumentError("build_low_mask: radius^2 must be >= 0");
  FrequencyMask mask{height, width, radius2,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0)};
  for (int u = 0; u < height; ++u) {
    const std::int64_t du = centered(u, height);
    for (int v = 0; v < width; ++v) {
      const std::int64_t dv = centered(v, width);
      mask.bits[static_cast<std::size_t>(u) * width + v] = (du * du + dv * dv <= radius2) ? 1 : 0;
    }
  }
  return mask;
}

namespace {

Decomposition split_spectrum(const Image& image, const ComplexSpectrum& spec,
                             const FrequencyMask& mask) {
  if (mask.height != image.height || mask.width != image.width) {
    throw ShapeError("decompose: mask extent does not match image");
  }
  ComplexSpectrum low = spec;
  ComplexSpectrum high = spec;
  const std::size_t plane = image.plane_size();
  for (int c = 0; c < image.channels; ++c) {
    const std::size_t off = static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask.bits[i]) {
        high.bins[off + i] = Complex{};
      } else {
        low.bins[off + i] = Complex{};
      }
    }
  }
  double imag_low = 0.0, imag_high = 0.0;
  Decomposition out{idft2d_shifted(low, &imag_low), idft2d_shifted(high, &imag_high), mask};
  if (imag_low >= 1e-6 || imag_high >= 1e-6) {
    throw NumericalError("decompose: inverse transform left an imaginary residue of " +
                         std::to_string(std::max(imag_low, imag_high)));
  }
  return out;
}

}  // namespace

Decomposition decompose_with_mask(const Image& image, const FrequencyMask& mask) {
  return split_spectrum(image, dft2d_shifted(image), mask);
}

Decomposition decompose(const Image& image, PowerSpectrumRatio r) {
  const ComplexSpectrum spec = dft2d_shifted(image);
  const FrequencyMask mask =
      build_low_mask(image.height, image.width, cutoff_radius(spec, r));
  return split_spectrum(image, spec, mask);
}

}  // namespace freqseg::spectral
