#pragma once

#include <string>

#include "freqseg/network.hpp"
#include "freqseg/training.hpp"

namespace freqseg::config {

struct DataConfig {
  enum class Kind { synthetic, directory };
  Kind kind = Kind::synthetic;
  std::string path;
  int n = 64;
  /// Fraction of samples held out for validation, taken from the end.
  double split = 0.0;
};

struct RunConfig {
  net::ModelConfig model;
  train::TrainConfig train;
  DataConfig data;
};

/// Parses `[section]` / `key = value` text. Unknown sections or keys and
/// malformed values raise ConfigError quoting the line number. The result is
/// validated.
///
/// Defaults: channels 32,64,128,256; decoder reversed channels; r 0.5; all
/// toggles on; aspp_rates 1,6,12,18; lr 1e-4 -> 1e-6; 200 epochs; batch 16;
/// seed 0; image_size 256; hflip_prob 0.5; rot_deg 5; synthetic data, n 64,
/// split 0.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Round-trippable text for the [model] section plus image size.
std::string format_model_config(const net::ModelConfig& cfg);

}  // namespace freqseg::config
