#include "freqseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "freqseg/error.hpp"
#include "freqseg/image_io.hpp"
#include "freqseg/spectral.hpp"

namespace freqseg::train {

void TrainConfig::validate() const {
  if (!(lr_min > 0.0 && lr_min <= lr_max)) {
    throw ConfigError("learning rates must satisfy 0 < lr_min <= lr_max");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(augmentation.hflip_prob >= 0.0 && augmentation.hflip_prob <= 1.0)) {
    throw ConfigError("hflip_prob must lie in [0, 1]");
  }
  if (!(augmentation.rot_deg >= 0.0)) throw ConfigError("rot_deg must be >= 0");
}

double cosine_lr(long long t, long long total, double lr_max, double lr_min) {
  if (total < 1) throw ArgumentError("cosine_lr: total steps must be >= 1");
  if (t < 0 || t > total) {
    throw ArgumentError("cosine_lr: step " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  }
  if (t == 0) return lr_max;
  if (t == total) return lr_min;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

void adam_step(std::vector<ad::Parameter>& params, AdamState& state, double lr, const AdamOptions& opts) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].tensor.numel(), 0.0);
      state.v[i].assign(params[i].tensor.numel(), 0.0);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor& t = params[i].tensor;
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto w = t.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = opts.beta1 * m[k] + (1.0 - opts.beta1) * g[k];
      v[k] = opts.beta2 * v[k] + (1.0 - opts.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] = static_cast<float>(w[k] - lr * mhat / (std::sqrt(vhat) + opts.eps));
    }
  }
}

Sample make_sample(Image image, const Mask& region, double r, bool decompose) {
  if (image.height != region.height || image.width != region.width) {
    throw ShapeError("sample image and mask differ in size");
  }
  Sample s;
  s.targets = targets::build_targets(region);
  if (decompose) {
    auto parts = spectral::decompose(image, spectral::PowerSpectrumRatio(r));
    s.low = std::move(parts.low);
    s.high = std::move(parts.high);
  }
  s.image = std::move(image);
  return s;
}

namespace {

Image flip_image(const Image& img) {
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

Mask flip_mask(const Mask& m) {
  Mask out(m.height, m.width);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
  }
  return out;
}

}  // namespace

Sample flip_horizontal(const Sample& sample) {
  Sample out;
  out.image = flip_image(sample.image);
  out.targets.region = flip_mask(sample.targets.region);
  out.targets.edge = flip_mask(sample.targets.edge);
  out.targets.distance = flip_image(sample.targets.distance);
  if (sample.has_decomposition()) {
    out.low = flip_image(sample.low);
    out.high = flip_image(sample.high);
  }
  return out;
}

Sample rotate(const Sample& sample, double degrees) {
  if (degrees == 0.0) return sample;
  const Image& img = sample.image;
  const int h = img.height, w = img.width;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

  Image rimg(img.channels, h, w);
  Mask rmask(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse map: rotate the output position by -theta.
      const double dx = x - cx, dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) rmask.at(y, x) = sample.targets.region.at(ny, nx);
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < img.channels; ++c) {
        auto px = [&](int yy, int xx) {
          return (xx >= 0 && xx < w && yy >= 0 && yy < h) ? img.at(c, yy, xx) : 0.0;
        };
        const double top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
        const double bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
        rimg.at(c, y, x) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  Sample out;
  out.image = std::move(rimg);
  out.targets = targets::build_targets(rmask);
  return out;
}

Sample augment(const Sample& sample, std::mt19937_64& rng, const Augmentation& aug, double r) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < aug.hflip_prob;
  const double angle = aug.rot_deg > 0.0 ? (2.0 * unit(rng) - 1.0) * aug.rot_deg : 0.0;
  if (!flip && angle == 0.0) return sample;
  Sample out = flip ? flip_horizontal(sample) : sample;
  if (angle != 0.0) out = rotate(out, angle);
  if (sample.has_decomposition()) {
    auto parts = spectral::decompose(out.image, spectral::PowerSpectrumRatio(r));
    out.low = std::move(parts.low);
    out.high = std::move(parts.high);
  }
  return out;
}

std::vector<Sample> synth_dataset(int n, int height, int width, std::uint64_t seed, double r,
                                  bool decompose) {
  if (n < 1) throw ArgumentError("synth_dataset: n must be >= 1");
  if (height % 16 != 0 || width % 16 != 0 || height < 16 || width < 16) {
    throw ArgumentError("synth_dataset: size must be divisible by 16");
  }
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(i), 0x5e9du};
    std::mt19937_64 rng(sseq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.02);
    const double size = std::min(height, width);

    // Background: muted pink base plus a few low-frequency waves.
    Image img(3, height, width);
    const double base[3] = {0.55 + 0.1 * unit(rng), 0.32 + 0.08 * unit(rng), 0.28 + 0.08 * unit(rng)};
    struct Wave {
      double fy, fx, phase, amp;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 3; ++k) {
      waves.push_back({unit(rng) * 2.0, unit(rng) * 2.0, unit(rng) * 2.0 * std::numbers::pi,
                       0.04 + 0.04 * unit(rng)});
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double shade = 0.0;
        for (const Wave& wv : waves) {
          shade += wv.amp * std::sin(2.0 * std::numbers::pi * (wv.fy * y / height + wv.fx * x / width) + wv.phase);
        }
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = base[c] + shade;
      }
    }

    Mask region(height, width);
    const int count = 1 + static_cast<int>(unit(rng) * 3.0);
    for (int e = 0; e < std::min(count, 3); ++e) {
      const double ry = (0.10 + 0.12 * unit(rng)) * size;
      const double rx = (0.10 + 0.12 * unit(rng)) * size;
      const double cy = ry + unit(rng) * (height - 2.0 * ry);
      const double cx = rx + unit(rng) * (width - 2.0 * rx);
      const double angle = unit(rng) * std::numbers::pi;
      const double ca = std::cos(angle), sa = std::sin(angle);
      const double tint[3] = {0.30 + 0.1 * unit(rng), 0.05 * unit(rng), -0.05 * unit(rng)};
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double dy = y - cy, dx = x - cx;
          const double u = (ca * dx + sa * dy) / rx;
          const double v = (-sa * dx + ca * dy) / ry;
          const double rr = u * u + v * v;
          if (rr > 1.0) continue;
          region.at(y, x) = 1;
          // Dome-shaped highlight towards the ellipse center.
          const double dome = 0.15 * (1.0 - rr);
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = base[c] + tint[c] + dome;
        }
      }
    }
    for (double& v : img.data) v = std::clamp(v + noise(rng), 0.0, 1.0);
    out.push_back(make_sample(std::move(img), region, r, decompose));
  }
  return out;
}

std::vector<Sample> load_directory(const std::string& dir, int height, int width, int channels, double r,
                                   bool decompose) {
  namespace fs = std::filesystem;
  const fs::path images = fs::path(dir) / "images";
  const fs::path masks = fs::path(dir) / "masks";
  if (!fs::is_directory(images) || !fs::is_directory(masks)) {
    throw IoError("dataset directory " + dir + " must contain images/ and masks/");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .png images under " + images.string());
  std::vector<Sample> out;
  for (const auto& file : files) {
    const fs::path mask_path = masks / (file.stem().string() + ".png");
    if (!fs::exists(mask_path)) throw IoError("missing mask for " + file.string());
    Image img = io::with_channels(io::read_png(file.string()), channels);
    Mask mask = io::to_mask(io::read_png(mask_path.string()));
    if (img.height != height || img.width != width || mask.height != height || mask.width != width) {
      throw ShapeError(file.string() + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                       ", model expects " + std::to_string(width) + "x" + std::to_string(height));
    }
    out.push_back(make_sample(std::move(img), mask, r, decompose));
  }
  return out;
}

std::string History::to_csv() const {
  std::ostringstream os;
  os << "step,epoch,lr,loss_total";
  for (const auto& name : component_names) os << ",loss_" << name;
  os << ",accuracy,precision,recall,f1,iou\n";
  os << std::setprecision(17);
  for (const auto& row : rows) {
    os << row.step << ',' << row.epoch << ',' << row.lr << ',' << row.total;
    for (double c : row.components) os << ',' << c;
    if (row.metrics) {
      const auto& m = *row.metrics;
      os << ',' << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.iou;
    } else {
      os << ",,,,,";
    }
    os << '\n';
  }
  return os.str();
}

namespace {

struct Batch {
  net::ModelInputs inputs;
  objective::BatchTargets targets;
};

Batch make_batch(const std::vector<const Sample*>& samples, const net::ModelConfig& cfg,
                 bool verify_decomposition) {
  std::vector<const Image*> full, low, high;
  std::vector<const targets::MultiTaskTargets*> tg;
  std::vector<Sample> patched;  // samples that lacked a decomposition
  patched.reserve(samples.size());
  for (const Sample* s : samples) {
    if (cfg.toggles.fd && !s->has_decomposition()) {
      Sample copy = *s;
      auto parts = spectral::decompose(copy.image, spectral::PowerSpectrumRatio(cfg.power_ratio));
      copy.low = std::move(parts.low);
      copy.high = std::move(parts.high);
      patched.push_back(std::move(copy));
      s = &patched.back();
    }
    if (cfg.toggles.fd && verify_decomposition) {
      for (std::size_t i = 0; i < s->image.data.size(); ++i) {
        if (std::abs(s->low.data[i] + s->high.data[i] - s->image.data[i]) >= 1e-6) {
          throw NumericalError("frequency decomposition no longer sums to the image");
        }
      }
    }
    full.push_back(&s->image);
    if (cfg.toggles.fd) {
      low.push_back(&s->low);
      high.push_back(&s->high);
    }
    tg.push_back(&s->targets);
  }
  return Batch{net::stack_inputs(full, low, high), objective::stack_targets(tg)};
}

std::vector<std::string> component_names(const net::ModelConfig& cfg) {
  objective::LossReport probe;
  probe.mtl = cfg.toggles.mtl;
  std::vector<std::string> names;
  for (const auto& c : probe.components()) names.push_back(c.name);
  return names;
}

}  // namespace

objective::MetricsReport evaluate(net::Model& model, const std::vector<Sample>& data, double threshold,
                                  int batch_size) {
  std::vector<objective::MetricsReport> per_image;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Sample*> chunk;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) chunk.push_back(&data[i]);
    Batch batch = make_batch(chunk, model.config(), false);
    ad::Tape tape(ad::Tape::Mode::off);
    auto out = model.forward(tape, batch.inputs, false);
    auto masks = net::predict(out.blocks[3].region, threshold);
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      per_image.push_back(objective::metrics(masks[k], chunk[k]->targets.region));
    }
  }
  return objective::mean_metrics(per_image);
}

TrainResult train_loop(net::Model& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                       const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training set is empty");
  const auto& mcfg = model.config();
  for (const Sample& s : data) {
    if (s.image.height != mcfg.height || s.image.width != mcfg.width || s.image.channels != mcfg.in_channels) {
      throw ShapeError("training sample does not match the model input size");
    }
  }
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const long long steps_per_epoch = static_cast<long long>((n + bs - 1) / bs);
  const long long total_steps = steps_per_epoch * cfg.epochs;

  TrainResult result;
  result.history.component_names = component_names(mcfg);
  AdamState state;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::seed_seq shuffle_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                               static_cast<std::uint32_t>(epoch), 0x5u};
    std::mt19937_64 shuffle_rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < n; start += bs) {
      std::vector<Sample> augmented;
      std::vector<const Sample*> chunk;
      const std::size_t stop = std::min(n, start + bs);
      augmented.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        if (cfg.augmentation.enabled()) {
          std::seed_seq sseq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                             static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(epoch)};
          std::mt19937_64 rng(sseq);
          augmented.push_back(augment(data[idx], rng, cfg.augmentation, mcfg.power_ratio));
          chunk.push_back(&augmented.back());
        } else {
          chunk.push_back(&data[idx]);
        }
      }
      Batch batch = make_batch(chunk, mcfg, cfg.verify_decomposition);

      ad::Tape tape;
      auto outputs = model.forward(tape, batch.inputs, true);
      auto report = objective::total_loss(tape, outputs, batch.targets);
      HistoryRow row;
      row.step = step;
      row.epoch = epoch;
      row.total = report.total;
      for (const auto& c : report.components()) {
        if (!std::isfinite(c.value)) {
          throw NumericalError("non-finite loss component '" + c.name + "' at step " + std::to_string(step));
        }
        row.components.push_back(c.value);
      }
      if (!std::isfinite(report.total)) {
        throw NumericalError("non-finite total loss at step " + std::to_string(step));
      }
      row.lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
      tape.backward(report.total_tensor);
      adam_step(model.parameters(), state, row.lr, cfg.adam);
      result.history.rows.push_back(std::move(row));
      ++step;
    }
    auto& last = result.history.rows.back();
    last.metrics = evaluate(model, data, 0.5, cfg.batch_size);
    if (on_step) on_step(last);
  }
  result.final_metrics = *result.history.rows.back().metrics;
  return result;
}

std::vector<AblationRow> default_ablation_rows() {
  return {
      {"baseline", {false, false, false, false}},
      {"fd+gcb", {true, true, false, false}},
      {"fd+mtl", {true, false, true, false}},
      {"fd+gcb+mtl", {true, true, true, false}},
      {"fd+gcb+mtl+faspp", {true, true, true, true}},
  };
}

std::vector<AblationResult> ablation_run(const net::ModelConfig& base, const TrainConfig& cfg,
                                         const std::vector<Sample>& data, const std::vector<AblationRow>& rows,
                                         const TrainedCallback& on_trained) {
  for (const auto& row : rows) {
    net::ModelConfig mc = base;
    mc.toggles = row.toggles;
    try {
      mc.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("ablation row '" + row.label + "': " + e.what());
    }
  }
  std::vector<AblationResult> results;
  for (const auto& row : rows) {
    net::ModelConfig mc = base;
    mc.toggles = row.toggles;
    net::Model model(mc, cfg.seed);
    AblationResult res;
    res.row = row;
    res.parameter_count = model.parameter_count();
    auto trained = train_loop(model, data, cfg);
    if (on_trained) on_trained(row, model);
    res.metrics = trained.final_metrics;
    res.history = std::move(trained.history);
    results.push_back(std::move(res));
  }
  return results;
}

std::string format_ablation_table(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  auto mark = [](bool on) { return on ? "x" : "-"; };
  os << std::left << std::setw(18) << "row" << std::setw(4) << "FD" << std::setw(5) << "GCB" << std::setw(5)
     << "MTL" << std::setw(7) << "FASPP" << std::right << std::setw(12) << "params" << std::setw(10) << "IoU"
     << '\n';
  for (const auto& r : results) {
    const auto& t = r.row.toggles;
    os << std::left << std::setw(18) << r.row.label << std::setw(4) << mark(t.fd) << std::setw(5) << mark(t.gcb)
       << std::setw(5) << mark(t.mtl) << std::setw(7) << mark(t.faspp) << std::right << std::setw(12)
       << r.parameter_count << std::setw(10) << std::fixed << std::setprecision(4) << r.metrics.iou << '\n';
  }
  return os.str();
}

}  // namespace freqseg::train
