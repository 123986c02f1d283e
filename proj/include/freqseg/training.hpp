#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "freqseg/image.hpp"
#include "freqseg/network.hpp"
#include "freqseg/objective.hpp"
#include "freqseg/targets.hpp"

namespace freqseg::train {

struct Augmentation {
  double hflip_prob = 0.5;
  /// Rotation angle drawn uniformly from [-rot_deg, rot_deg].
  double rot_deg = 5.0;

  bool enabled() const { return hflip_prob > 0.0 || rot_deg > 0.0; }
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr_max = 1e-4;
  double lr_min = 1e-6;
  int epochs = 200;
  int batch_size = 16;
  std::uint64_t seed = 0;
  Augmentation augmentation;
  AdamOptions adam;
  /// Re-check low + high == image for every batch.
  bool verify_decomposition = false;

  void validate() const;
};

/// lr_min + (lr_max - lr_min) (1 + cos(pi t / T)) / 2 for 0 <= t <= T.
double cosine_lr(long long t, long long total, double lr_max, double lr_min);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long long step = 0;
};

/// One bias-corrected Adam update from the gradients held by `params`.
/// Updated values are rounded to 32-bit precision, the storage precision of
/// parameters.
void adam_step(std::vector<ad::Parameter>& params, AdamState& state, double lr,
               const AdamOptions& opts = {});

/// Image plus supervision and its cached frequency split.
struct Sample {
  Image image;
  targets::MultiTaskTargets targets;
  Image low;
  Image high;

  bool has_decomposition() const { return !low.data.empty(); }
};

/// Builds targets from `region` and, when `decompose` is set, the low/high
/// split at ratio r.
Sample make_sample(Image image, const Mask& region, double r, bool decompose);

Sample flip_horizontal(const Sample& sample);
/// Rotation about the image center on the same canvas. Bilinear for the
/// image, nearest for the region; pixels mapped from outside are 0. Edge and
/// distance targets are rebuilt from the rotated region.
Sample rotate(const Sample& sample, double degrees);

/// Random flip and rotation per `aug`; re-decomposes when the source sample
/// carried a decomposition.
Sample augment(const Sample& sample, std::mt19937_64& rng, const Augmentation& aug, double r);

/// 1-3 filled ellipses over a smooth textured background with mild noise.
/// Deterministic in (n, size, seed).
std::vector<Sample> synth_dataset(int n, int height, int width, std::uint64_t seed, double r,
                                  bool decompose);

/// Pairs `<dir>/images/<stem>.png` with `<dir>/masks/<stem>.png` (mask > 127
/// is foreground). Images must already be height x width.
std::vector<Sample> load_directory(const std::string& dir, int height, int width, int channels,
                                   double r, bool decompose);

struct HistoryRow {
  long long step = 0;
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  std::vector<double> components;
  /// Training-set metrics, present on the last step of each epoch.
  std::optional<objective::MetricsReport> metrics;
};

struct History {
  std::vector<std::string> component_names;
  std::vector<HistoryRow> rows;

  /// `step,epoch,lr,loss_total,loss_r0,...,accuracy,precision,recall,f1,iou`.
  std::string to_csv() const;
};

struct TrainResult {
  History history;
  objective::MetricsReport final_metrics;
};

using StepCallback = std::function<void(const HistoryRow&)>;

/// Adam + per-step cosine schedule over shuffled mini-batches. Throws
/// NumericalError naming the first non-finite loss component.
TrainResult train_loop(net::Model& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                       const StepCallback& on_step = {});

/// Eval-mode forward, sigmoid(R4) > threshold against each region mask,
/// averaged per image.
objective::MetricsReport evaluate(net::Model& model, const std::vector<Sample>& data,
                                  double threshold = 0.5, int batch_size = 16);

struct AblationRow {
  std::string label;
  net::Toggles toggles;
};

/// The five FD/GCB/MTL/F-ASPP combinations, baseline first.
std::vector<AblationRow> default_ablation_rows();

struct AblationResult {
  AblationRow row;
  std::size_t parameter_count = 0;
  objective::MetricsReport metrics;
  History history;
};

using TrainedCallback = std::function<void(const AblationRow&, net::Model&)>;

/// Trains and evaluates every row with identical seed, data and budget.
/// Rejects invalid toggle sets with ConfigError before training anything.
/// `on_trained` sees each model once its training ends.
std::vector<AblationResult> ablation_run(const net::ModelConfig& base, const TrainConfig& cfg,
                                         const std::vector<Sample>& data,
                                         const std::vector<AblationRow>& rows,
                                         const TrainedCallback& on_trained = {});

std::string format_ablation_table(const std::vector<AblationResult>& results);

}  // namespace freqseg::train
