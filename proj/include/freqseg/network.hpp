#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "freqseg/autodiff/ops.hpp"
#include "freqseg/autodiff/tape.hpp"
#include "freqseg/autodiff/tensor.hpp"
#include "freqseg/image.hpp"

namespace freqseg::net {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;

/// Ablation switches. gcb requires fd.
struct Toggles {
  bool fd = true;     // frequency decomposition: three encoders instead of one
  bool gcb = true;    // guided residuals from the full encoder into low/high
  bool mtl = true;    // edge and distance heads next to every region head
  bool faspp = true;  // ASPP + scalable attention fusion instead of a 1x1 conv

  friend bool operator==(const Toggles&, const Toggles&) = default;
};

struct ModelConfig {
  std::array<int, 4> channels{32, 64, 128, 256};
  /// Output channels of DB(1)..DB(4); the fusion stage emits decoder[0].
  /// Zeros mean "channels reversed".
  std::array<int, 4> decoder{0, 0, 0, 0};
  std::array<int, 4> aspp_rates{1, 6, 12, 18};
  int height = 256;
  int width = 256;
  int in_channels = 3;
  double power_ratio = 0.5;
  Toggles toggles;

  /// Throws ConfigError naming the violated rule.
  void validate() const;
  std::array<int, 4> decoder_plan() const;
  /// Channel count of the fused encoder tensor X.
  int fusion_channels() const { return toggles.fd ? 3 * channels[3] : channels[3]; }
};

enum class Branch { full, low, high };

/// Network inputs. low/high are only read when fd is on.
struct ModelInputs {
  Tensor full;
  Tensor low;
  Tensor high;
};

/// S_i: region logits, edge logits and sigmoid distance of one decoder block.
/// edge/distance are undefined when mtl is off.
struct BlockOutputs {
  Tensor region;
  Tensor edge;
  Tensor distance;
};

struct ModelOutputs {
  Tensor r0;
  std::array<BlockOutputs, 4> blocks;
  /// Fused encoder tensor X and, with faspp on, the attention map A.
  Tensor fusion_input;
  Tensor attention;

  std::size_t map_count() const;
};

/// Named batch-norm running statistics, for checkpointing.
struct Buffer {
  std::string name;
  ad::RunningStats* stats;
};

/// Three frequency encoders with guided residuals, F-ASPP SAM fusion and a
/// four-block deeply supervised decoder. Owns its parameters; move-only.
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const;

  /// All trainable parameters in construction order.
  std::vector<Parameter>& parameters();
  const std::vector<Parameter>& parameters() const;
  std::vector<Buffer>& buffers();
  /// Throws ArgumentError for an unknown name.
  Parameter& parameter(const std::string& name);
  std::size_t parameter_count() const;

  /// x_1..x_4 of one encoder. Low/high encoders with gcb on add
  /// GCB(full_features[i]) to each level and require `full_features`.
  std::vector<Tensor> encoder_forward(Tape& tape, const Tensor& image, Branch which,
                                      const std::vector<Tensor>* full_features, bool training);

  /// O from the three level-4 maps. `attention` receives A when non-null.
  Tensor faspp_sam_forward(Tape& tape, const Tensor& x4_low, const Tensor& x4_full,
                           const Tensor& x4_high, Tensor* fusion_input = nullptr,
                           Tensor* attention = nullptr);

  ModelOutputs forward(Tape& tape, const ModelInputs& inputs, bool training);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Stacks images into an NCHW batch and, when fd is on, the per-image
/// low/high decompositions at cfg.power_ratio.
ModelInputs prepare_inputs(const std::vector<Image>& images, const ModelConfig& cfg);

/// Stacks precomputed (full, low, high) triples.
ModelInputs stack_inputs(const std::vector<const Image*>& full, const std::vector<const Image*>& low,
                         const std::vector<const Image*>& high);

Tensor stack_images(const std::vector<const Image*>& images);

/// sigmoid(R4) > threshold, one mask per batch element.
std::vector<Mask> predict(const Tensor& r4, double threshold = 0.5);

}  // namespace freqseg::net
