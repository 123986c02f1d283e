#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "freqseg/image.hpp"

namespace freqseg::spectral {

using Complex = std::complex<double>;

/// Per-channel 2-D spectrum with the DC bin at (H/2, W/2) (integer division).
struct ComplexSpectrum {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<Complex> bins;

  Complex& at(int c, int u, int v) {
    return bins[(static_cast<std::size_t>(c) * height + u) * width + v];
  }
  const Complex& at(int c, int u, int v) const {
    return bins[(static_cast<std::size_t>(c) * height + u) * width + v];
  }
};

/// Binary low-pass selector: bit(u, v) = 1 iff du^2 + dv^2 <= radius2, with
/// (du, dv) measured from the spectrum center.
struct FrequencyMask {
  int height = 0;
  int width = 0;
  std::int64_t radius2 = 0;
  std::vector<std::uint8_t> bits;

  std::uint8_t at(int u, int v) const { return bits[static_cast<std::size_t>(u) * width + v]; }
};

/// Fraction of total spectral power assigned to the low band, in [0, 1].
class PowerSpectrumRatio {
 public:
  explicit PowerSpectrumRatio(double r);
  double value() const { return r_; }

 private:
  double r_;
};

/// Signed distance of `index` from the centered DC position.
inline int centered(int index, int extent) { return index - extent / 2; }

/// Unnormalized forward DFT of every channel, DC-centered.
ComplexSpectrum dft2d_shifted(const Image& image);

/// Inverse of dft2d_shifted including the 1/(H W) factor. Returns the real
/// part; the largest discarded imaginary magnitude goes to `max_imag`.
Image idft2d_shifted(const ComplexSpectrum& spectrum, double* max_imag = nullptr);

/// Sum of |X|^2 over every channel and bin.
double total_power(const ComplexSpectrum& spectrum);

/// Largest achievable centered radius^2 whose disk holds at most r of the
/// total power (channels summed). Returns 0 when even the DC bin exceeds r.
std::int64_t cutoff_radius(const ComplexSpectrum& spectrum, PowerSpectrumRatio r);

FrequencyMask build_low_mask(int height, int width, std::int64_t radius2);

struct Decomposition {
  Image low;
  Image high;
  FrequencyMask mask;
};

/// Splits an image into the inverse transforms of its low-pass and
/// complementary high-pass spectra; low + high reproduces the input.
Decomposition decompose(const Image& image, PowerSpectrumRatio r);

/// As decompose(), with a caller-chosen mask.
Decomposition decompose_with_mask(const Image& image, const FrequencyMask& mask);

}  // namespace freqseg::spectral
