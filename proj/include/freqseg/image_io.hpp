#pragma once

#include <string>

#include "freqseg/image.hpp"

namespace freqseg::io {

/// 8-bit grayscale or RGB PNG (alpha dropped, 16-bit reduced), normalized by
/// 1/255.
Image read_png(const std::string& path);

/// Writes 1- or 3-channel images; values are clamped to [0, 1] and stored as
/// round(255 v).
void write_png(const std::string& path, const Image& image);

/// Binary P5 PGM, 8-bit.
Image read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Image& image);

/// Raw little-endian float32, channel-planar, row-major. No header.
void write_f32(const std::string& path, const Image& image);
Image read_f32(const std::string& path, int channels, int height, int width);

/// value > threshold on the first channel.
Mask to_mask(const Image& image, double threshold = 127.0 / 255.0);
/// {0, 1} mask to a single-channel {0.0, 1.0} image.
Image mask_image(const Mask& mask);

/// Image with `channels` channels: replicates a gray plane or keeps RGB.
Image with_channels(const Image& image, int channels);

/// File name without directory and final extension.
std::string stem(const std::string& path);

}  // namespace freqseg::io
