#include "freqseg/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>

#include "freqseg/error.hpp"

namespace freqseg::ad {

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> out;
  for (const auto& row : rows) {
    if (!(row.max_rel_error < tol)) out.push_back(row.name);
  }
  return out;
}

GradCheckReport finite_diff_check(const LossFn& f, std::vector<Parameter>& params,
                                  const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) throw ArgumentError("finite_diff_check: eps must be positive");

  for (auto& p : params) p.tensor.set_requires_grad(true);
  Tape tape;
  Tensor loss = f(tape);
  tape.backward(loss);

  // (parameter index, element index), deduplicated and ordered.
  std::set<std::pair<std::size_t, std::size_t>> picks;
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    total += params[i].tensor.numel();
    if (params[i].tensor.numel() == 1) picks.emplace(i, 0);
  }
  std::mt19937_64 rng(opts.seed);
  const std::size_t budget = std::min(std::max(opts.max_samples, picks.size()), total);
  std::uniform_int_distribution<std::size_t> pick_flat(0, total - 1);
  while (picks.size() < budget) {
    std::size_t flat = pick_flat(rng);
    std::size_t i = 0;
    while (flat >= params[i].tensor.numel()) flat -= params[i].tensor.numel(), ++i;
    picks.emplace(i, flat);
  }

  std::vector<GradCheckRow> rows(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) rows[i].name = params[i].name;

  GradCheckReport report;
  report.tol = opts.tol;
  for (const auto& [pi, ei] : picks) {
    Tensor& t = params[pi].tensor;
    const double analytic = t.has_grad() ? t.grad()[ei] : 0.0;
    const double saved = t.data()[ei];
    Tape off(Tape::Mode::off);
    t.data()[ei] = saved + opts.eps;
    const double up = f(off).item();
    t.data()[ei] = saved - opts.eps;
    const double down = f(off).item();
    t.data()[ei] = saved;
    const double numeric = (up - down) / (2.0 * opts.eps);
    const double abs_err = std::abs(analytic - numeric);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
    double rel = abs_err / denom;
    if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
    GradCheckRow& row = rows[pi];
    ++row.checked;
    row.max_rel_error = std::max(row.max_rel_error, rel);
    row.max_abs_error = std::max(row.max_abs_error, abs_err);
    report.max_rel_error = std::max(report.max_rel_error, rel);
  }
  for (auto& row : rows) {
    if (row.checked > 0) report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace freqseg::ad
