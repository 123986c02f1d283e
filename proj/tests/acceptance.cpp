// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "freqseg/autodiff/ops.hpp"
#include "freqseg/checkpoint.hpp"
#include "freqseg/cli/commands.hpp"
#include "freqseg/network.hpp"
#include "freqseg/objective.hpp"
#include "freqseg/spectral.hpp"
#include "freqseg/targets.hpp"
#include "freqseg/training.hpp"
#include "oracles.hpp"

using namespace freqseg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1 ----------------------------------------------------------------------

Outcome spectral_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> ch(1, 3), ext(1, 64);
  double recon = 0.0, parseval = 0.0, allpass = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int c = i == 0 ? 3 : ch(rng), h = i == 0 ? 64 : ext(rng), w = i == 0 ? 64 : ext(rng);
    Image x = oracle::random_image(rng, c, h, w);
    auto d = spectral::decompose(x, spectral::PowerSpectrumRatio(0.5));
    for (std::size_t k = 0; k < x.data.size(); ++k) recon = std::max(recon, std::abs(d.low.data[k] + d.high.data[k] - x.data[k]));
    double energy = 0.0;
    for (double v : x.data) energy += v * v;
    const double freq = spectral::total_power(spectral::dft2d_shifted(x)) / (static_cast<double>(h) * w);
    parseval = std::max(parseval, std::abs(energy - freq) / energy);
    auto one = spectral::decompose(x, spectral::PowerSpectrumRatio(1.0));
    for (std::size_t k = 0; k < x.data.size(); ++k) {
      allpass = std::max(allpass, std::abs(one.low.data[k] - x.data[k]));
      allpass = std::max(allpass, std::abs(one.high.data[k]));
    }
  }
  const double secs = seconds_since(t0);
  return {recon < 1e-6 && parseval < 1e-6 && allpass < 1e-6 && secs < 30.0,
          fmt("recon %.2e, parseval rel %.2e, r=1 %.2e, %.1fs", recon, parseval, allpass, secs)};
}

// --- 2 ----------------------------------------------------------------------

Outcome cutoff_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const int n = i % 2 ? 16 : 8;
    Image x = oracle::random_image(rng, 1 + i % 3, n, n);
    const double r = i % 4 == 0 ? 0.5 : ur(rng);
    auto s = spectral::dft2d_shifted(x);
    if (spectral::cutoff_radius(s, spectral::PowerSpectrumRatio(r)) != oracle::cutoff_sort_scan(s.bins, s.channels, n, n, r))
      ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, fmt("%d/100 mismatches, %.2fs", mismatches, secs)};
}

// --- 3 ----------------------------------------------------------------------

Outcome target_oracles() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> ext(1, 16);
  std::uniform_real_distribution<double> dens(0.05, 0.95);
  int edge_bad = 0, dist_bad = 0, range_bad = 0;
  for (int i = 0; i < 100; ++i) {
    Mask m = oracle::random_mask(rng, ext(rng), ext(rng), dens(rng));
    if (!(targets::sobel_edge(m) == oracle::sobel(m))) ++edge_bad;
    Image d = targets::distance_map(m);
    if (d.data != oracle::distance_brute(m).data) ++dist_bad;
    double mx = 0.0;
    bool in_range = true;
    for (double v : d.data) {
      in_range = in_range && v >= 0.0 && v <= 1.0;
      mx = std::max(mx, v);
    }
    if (!in_range || (!m.empty_foreground() && mx != 1.0)) ++range_bad;
  }
  return {edge_bad == 0 && dist_bad == 0 && range_bad == 0,
          fmt("sobel %d/100, distance %d/100, range %d/100 failures", edge_bad, dist_bad, range_bad)};
}

// --- 4 ----------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto checks = cli::gradcheck_suite(1e-3);
  double worst = 0.0;
  bool all = true, alpha = false, beta = false;
  std::string worst_name;
  for (const auto& c : checks) {
    all = all && c.report.passed();
    if (c.report.max_rel_error >= worst) {
      worst = c.report.max_rel_error;
      worst_name = c.name;
    }
    for (const auto& row : c.report.rows) {
      if (c.name != "model_total_loss") continue;
      alpha = alpha || (row.name == "sam.alpha" && row.checked > 0 && row.max_rel_error < 1e-3);
      beta = beta || (row.name == "sam.beta" && row.checked > 0 && row.max_rel_error < 1e-3);
    }
  }
  const double secs = seconds_since(t0);
  return {all && alpha && beta && secs < 120.0,
          fmt("%zu checks, worst %.2e (%s), alpha %s, beta %s, %.1fs", checks.size(), worst, worst_name.c_str(),
              alpha ? "ok" : "missing", beta ? "ok" : "missing", secs)};
}

// --- 5 ----------------------------------------------------------------------

net::ModelConfig acceptance_model(net::Toggles t = {}) {
  net::ModelConfig c;
  c.channels = {4, 8, 16, 32};
  c.height = c.width = 64;
  c.toggles = t;
  return c;
}

Outcome shape_contract() {
  const net::ModelConfig c = acceptance_model();
  net::Model model(c, 5);
  auto data = train::synth_dataset(2, 64, 64, 5, 0.5, true);
  std::vector<const Image*> full, low, high;
  for (const auto& s : data) {
    full.push_back(&s.image);
    low.push_back(&s.low);
    high.push_back(&s.high);
  }
  ad::Tape tape(ad::Tape::Mode::off);
  auto out = model.forward(tape, net::stack_inputs(full, low, high), false);
  bool ok = out.fusion_input.shape() == ad::Shape{2, 96, 4, 4} && out.map_count() == 13;
  ok = ok && out.r0.shape() == ad::Shape{2, 1, 4, 4};
  for (int i = 0; i < 4; ++i) {
    const int s = 64 >> (3 - i);  // upsample factor 2^(3-i) restores 64
    for (const auto* t : {&out.blocks[i].region, &out.blocks[i].edge, &out.blocks[i].distance})
      ok = ok && t->defined() && t->shape() == ad::Shape{2, 1, s, s};
  }
  return {ok, "X " + out.fusion_input.shape().str() + ", " + std::to_string(out.map_count()) + " maps at 4,8,16,32,64"};
}

// --- 6 ----------------------------------------------------------------------

train::TrainConfig overfit_config() {
  train::TrainConfig t;
  t.lr_max = 1e-2;
  t.lr_min = 1e-6;
  t.epochs = 300;
  t.batch_size = 8;
  t.seed = 42;
  t.augmentation = {0.0, 0.0};
  return t;
}

struct OverfitRun {
  std::string csv;
  std::vector<std::uint8_t> checkpoint;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double history_iou = 0.0;
  double eval_iou = 0.0;
  long long steps = 0;
  double seconds = 0.0;
};

OverfitRun overfit_run() {
  const auto t0 = Clock::now();
  const net::ModelConfig mc = acceptance_model();
  const train::TrainConfig tc = overfit_config();
  auto data = train::synth_dataset(8, 64, 64, tc.seed, mc.power_ratio, true);
  net::Model model(mc, tc.seed);
  auto result = train::train_loop(model, data, tc);
  OverfitRun run;
  run.csv = result.history.to_csv();
  run.checkpoint = checkpoint::serialize(model);
  run.first_loss = result.history.rows.front().total;
  run.last_loss = result.history.rows.back().total;
  run.history_iou = result.history.rows.back().metrics->iou;
  run.eval_iou = train::evaluate(model, data).iou;
  run.steps = static_cast<long long>(result.history.rows.size());
  run.seconds = seconds_since(t0);
  return run;
}

Outcome overfit(const OverfitRun& r) {
  const double ratio = r.last_loss / r.first_loss;
  return {r.steps <= 300 && r.history_iou >= 0.95 && r.eval_iou >= 0.95 && ratio < 0.10 && r.seconds < 900.0,
          fmt("%lld steps, IoU %.4f (eval %.4f), loss %.4f -> %.4f (%.1f%%), %.0fs", r.steps, r.history_iou, r.eval_iou,
              r.first_loss, r.last_loss, 100.0 * ratio, r.seconds)};
}

// --- 7 ----------------------------------------------------------------------

struct AblationArtifacts {
  std::string table;
  std::vector<std::string> csvs;
  std::vector<std::vector<std::uint8_t>> checkpoints;
  std::vector<std::size_t> counts;
};

AblationArtifacts ablation_once() {
  train::TrainConfig tc = overfit_config();
  tc.epochs = 1;
  auto data = train::synth_dataset(8, 64, 64, tc.seed, 0.5, true);
  AblationArtifacts art;
  auto results = train::ablation_run(acceptance_model(), tc, data, train::default_ablation_rows(),
                                     [&](const train::AblationRow&, net::Model& m) {
                                       art.checkpoints.push_back(checkpoint::serialize(m));
                                     });
  art.table = train::format_ablation_table(results);
  for (const auto& r : results) {
    art.csvs.push_back(r.history.to_csv());
    art.counts.push_back(r.parameter_count);
  }
  return art;
}

Outcome ablation(const AblationArtifacts& art, std::string& table_out) {
  table_out = art.table;
  // Dropping any enabled toggle must strictly shrink the model.
  int violations = 0, comparisons = 0;
  const auto rows = train::default_ablation_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const net::Toggles t = rows[i].toggles;
    for (bool net::Toggles::*field : {&net::Toggles::fd, &net::Toggles::gcb, &net::Toggles::mtl, &net::Toggles::faspp}) {
      if (!(t.*field)) continue;
      net::Toggles u = t;
      u.*field = false;
      if (field == &net::Toggles::fd) u.gcb = false;
      ++comparisons;
      if (!(net::Model(acceptance_model(u), 1).parameter_count() < art.counts[i])) ++violations;
    }
  }
  return {art.counts.size() == 5 && violations == 0,
          fmt("%zu rows trained, %d/%d monotonicity violations", art.counts.size(), violations, comparisons)};
}

// --- 8 ----------------------------------------------------------------------

Outcome metrics_oracle() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> ext(1, 16);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int h = ext(rng), w = ext(rng);
    Mask p = oracle::random_mask(rng, h, w, dens(rng)), g = oracle::random_mask(rng, h, w, dens(rng));
    const auto c = oracle::count(p, g);
    const bool both_empty = c.tp + c.fp + c.fn == 0;
    auto ratio = [&](long num, long den) { return den ? double(num) / double(den) : (both_empty ? 1.0 : 0.0); };
    const auto r = objective::metrics(p, g);
    if (r.accuracy != double(c.tp + c.tn) / double(h * w) || r.precision != ratio(c.tp, c.tp + c.fp) ||
        r.recall != ratio(c.tp, c.tp + c.fn) || r.f1 != ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn) ||
        r.iou != ratio(c.tp, c.tp + c.fp + c.fn))
      ++bad;
  }
  const auto e = objective::metrics(Mask(5, 5), Mask(5, 5));
  const bool empty_ok = e.accuracy == 1 && e.precision == 1 && e.recall == 1 && e.f1 == 1 && e.iou == 1;
  return {bad == 0 && empty_ok, fmt("%d/1000 mismatches, both-empty -> 1: %s", bad, empty_ok ? "yes" : "no")};
}

// --- 9 ----------------------------------------------------------------------

Outcome determinism(const OverfitRun& a, const OverfitRun& b, const AblationArtifacts& x, const AblationArtifacts& y) {
  const bool overfit_same = a.csv == b.csv && a.checkpoint == b.checkpoint;
  const bool ablation_same = x.table == y.table && x.csvs == y.csvs && x.checkpoints == y.checkpoints;
  return {overfit_same && ablation_same,
          fmt("overfit history+checkpoint %s, ablation %zu histories+checkpoints %s", overfit_same ? "identical" : "DIFFER",
              x.csvs.size(), ablation_same ? "identical" : "DIFFER")};
}

// --- 10 ---------------------------------------------------------------------

Outcome schedule_endpoints() {
  const long long T = 300;
  const double start = train::cosine_lr(0, T, 1e-4, 1e-6), end = train::cosine_lr(T, T, 1e-4, 1e-6);
  return {start == 1e-4 && end == 1e-6, fmt("lr(0) = %.17g, lr(T) = %.17g", start, end)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "spectral identities", guarded(spectral_identities));
  report(2, "cutoff correctness", guarded(cutoff_correctness));
  report(3, "target oracles", guarded(target_oracles));
  report(4, "gradient suite", guarded(gradient_suite));
  report(5, "shape contract", guarded(shape_contract));

  OverfitRun run_a, run_b;
  AblationArtifacts abl_a, abl_b;
  std::string table;
  report(6, "overfit experiment", guarded([&] {
           run_a = overfit_run();
           return overfit(run_a);
         }));
  report(7, "ablation harness", guarded([&] {
           abl_a = ablation_once();
           return ablation(abl_a, table);
         }));
  if (!table.empty()) std::printf("%s", table.c_str());
  report(8, "metrics oracle", guarded(metrics_oracle));
  report(9, "determinism", guarded([&] {
           run_b = overfit_run();
           abl_b = ablation_once();
           return determinism(run_a, run_b, abl_a, abl_b);
         }));
  report(10, "schedule endpoints", guarded(schedule_endpoints));

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
