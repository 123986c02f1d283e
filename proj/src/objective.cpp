#include "freqseg/objective.hpp"

#include <cmath>

#include "freqseg/autodiff/ops.hpp"
#include "freqseg/error.hpp"

namespace freqseg::objective {

Tensor bce_with_logits(Tape& tape, const Tensor& logits, const Tensor& target) {
  ad::require_same_shape(logits, target, "bce_with_logits");
  auto z = logits.data();
  auto t = target.data();
  std::vector<double> terms(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    terms[i] = std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(z.size());
  Tensor loss = Tensor::scalar(ad::stable_sum(terms) / n);
  if (tape.wants({&logits})) {
    tape.record({logits, target}, loss, [logits, target, loss, n]() mutable {
      const double g = loss.grad()[0] / n;
      auto z = logits.data();
      auto t = target.data();
      auto gz = logits.mutable_grad();
      for (std::size_t i = 0; i < gz.size(); ++i) gz[i] += g * (ad::sigmoid_scalar(z[i]) - t[i]);
    });
  }
  return loss;
}

Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target) {
  ad::require_same_shape(pred, target, "mse");
  auto p = pred.data();
  auto t = target.data();
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) terms[i] = (p[i] - t[i]) * (p[i] - t[i]);
  const double n = static_cast<double>(p.size());
  Tensor loss = Tensor::scalar(ad::stable_sum(terms) / n);
  if (tape.wants({&pred})) {
    tape.record({pred, target}, loss, [pred, target, loss, n]() mutable {
      const double g = 2.0 * loss.grad()[0] / n;
      auto p = pred.data();
      auto t = target.data();
      auto gp = pred.mutable_grad();
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (p[i] - t[i]);
    });
  }
  return loss;
}

BatchTargets stack_targets(const std::vector<const targets::MultiTaskTargets*>& samples) {
  if (samples.empty()) throw ArgumentError("stack_targets: empty batch");
  const int h = samples[0]->region.height, w = samples[0]->region.width;
  const ad::Shape s{static_cast<int>(samples.size()), 1, h, w};
  BatchTargets out{Tensor(s), Tensor(s), Tensor(s)};
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& t = *samples[n];
    if (t.region.height != h || t.region.width != w || t.distance.height != h || t.distance.width != w) {
      throw ShapeError("stack_targets: samples disagree in size");
    }
    for (std::size_t i = 0; i < plane; ++i) {
      out.region.data()[n * plane + i] = t.region.data[i];
      out.edge.data()[n * plane + i] = t.edge.data[i];
      out.distance.data()[n * plane + i] = t.distance.data[i];
    }
  }
  return out;
}

std::vector<LossComponent> LossReport::components() const {
  std::vector<LossComponent> out{{"r0", r0}};
  for (int i = 0; i < 4; ++i) {
    const std::string k = std::to_string(i + 1);
    out.push_back({"region_" + k, blocks[i].region});
    if (mtl) {
      out.push_back({"edge_" + k, blocks[i].edge});
      out.push_back({"distance_" + k, blocks[i].distance});
    }
  }
  return out;
}

namespace {

Tensor to_full_resolution(Tape& tape, const Tensor& map, int factor, const Tensor& target,
                          const char* what) {
  const ad::Shape& s = map.shape();
  const ad::Shape& ts = target.shape();
  if (s.n != ts.n || s.c != 1 || s.h * factor != ts.h || s.w * factor != ts.w) {
    throw ShapeError(std::string("total_loss: ") + what + " map " + s.str() +
                     " does not sit on the resolution ladder for targets " + ts.str() +
                     " (expected upsample factor " + std::to_string(factor) + ")");
  }
  return factor == 1 ? map : ad::bilinear_upsample(tape, map, factor);
}

}  // namespace

LossReport total_loss(Tape& tape, const net::ModelOutputs& outputs, const BatchTargets& targets) {
  LossReport report;
  report.mtl = outputs.blocks[0].edge.defined();

  Tensor r0 = bce_with_logits(tape, to_full_resolution(tape, outputs.r0, 16, targets.region, "R0"),
                              targets.region);
  report.r0 = r0.item();
  Tensor total = r0;
  for (int i = 0; i < 4; ++i) {
    const int factor = 1 << (3 - i);
    const net::BlockOutputs& b = outputs.blocks[i];
    Tensor region = bce_with_logits(
        tape, to_full_resolution(tape, b.region, factor, targets.region, "region"), targets.region);
    report.blocks[i].region = region.item();
    total = ad::add(tape, total, region);
    if (report.mtl) {
      Tensor edge = bce_with_logits(
          tape, to_full_resolution(tape, b.edge, factor, targets.edge, "edge"), targets.edge);
      Tensor dist = mse(tape, to_full_resolution(tape, b.distance, factor, targets.distance, "distance"),
                        targets.distance);
      report.blocks[i].edge = edge.item();
      report.blocks[i].distance = dist.item();
      total = ad::add(tape, total, ad::add(tape, edge, dist));
    }
  }
  report.total = total.item();
  report.total_tensor = total;
  return report;
}

MetricsReport metrics(const Mask& pred, const Mask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError("metrics: prediction and ground truth differ in size");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    tn += !p && !g;
  }
  const bool both_empty = tp + fp + fn == 0;
  auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) return both_empty ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  MetricsReport r;
  r.accuracy = ratio(tp + tn, tp + tn + fp + fn);
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  r.iou = ratio(tp, tp + fp + fn);
  return r;
}

MetricsReport mean_metrics(std::span<const MetricsReport> reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
    m.iou += r.iou;
  }
  const double n = static_cast<double>(reports.size());
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  m.iou /= n;
  return m;
}

}  // namespace freqseg::objective
