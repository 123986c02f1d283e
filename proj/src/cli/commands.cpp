#include "freqseg/cli/commands.hpp"

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "freqseg/autodiff/ops.hpp"
#include "freqseg/checkpoint.hpp"
#include "freqseg/config_file.hpp"
#include "freqseg/error.hpp"
#include "freqseg/image_io.hpp"
#include "freqseg/network.hpp"
#include "freqseg/objective.hpp"
#include "freqseg/spectral.hpp"
#include "freqseg/targets.hpp"
#include "freqseg/training.hpp"

namespace freqseg::cli {
namespace fs = std::filesystem;
using ad::Parameter;
using ad::Tape;
using ad::Tensor;

namespace {

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void print_metrics(std::ostream& out, const std::string& title, const objective::MetricsReport& m) {
  out << title << '\n';
  out << std::left << std::setw(12) << "metric" << "value\n";
  const std::pair<const char*, double> rows[] = {
      {"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"iou", m.iou}};
  for (const auto& [name, v] : rows) {
    out << std::left << std::setw(12) << name << std::fixed << std::setprecision(4) << v << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

std::string metric_lines(const objective::MetricsReport& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "accuracy=" << m.accuracy << '\n'
     << "precision=" << m.precision << '\n'
     << "recall=" << m.recall << '\n'
     << "f1=" << m.f1 << '\n'
     << "iou=" << m.iou << '\n';
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create " + path);
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

// --- decompose ------------------------------------------------------------

int cmd_decompose(const std::string& input, double r, const std::string& out_dir, std::ostream& out) {
  const spectral::PowerSpectrumRatio ratio(r);
  Image img = io::read_png(input);
  auto parts = spectral::decompose(img, ratio);
  ensure_dir(out_dir);
  const std::string s = io::stem(input);
  const fs::path dir(out_dir);
  Image high_vis = parts.high;
  for (double& v : high_vis.data) v += 0.5;
  io::write_png(join(dir, s + "_low.png"), parts.low);
  io::write_png(join(dir, s + "_high.png"), high_vis);
  io::write_f32(join(dir, s + "_low.f32"), parts.low);
  io::write_f32(join(dir, s + "_high.f32"), parts.high);
  Image mask(1, parts.mask.height, parts.mask.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = parts.mask.bits[i] ? 1.0 : 0.0;
  io::write_pgm(join(dir, s + "_mask.pgm"), mask);
  out << "r=" << r << " radius2=" << parts.mask.radius2 << " size=" << img.width << 'x' << img.height
      << " channels=" << img.channels << '\n';
  return kOk;
}

// --- gen-targets ----------------------------------------------------------

int cmd_gen_targets(const std::string& mask_path, const std::string& out_dir, std::ostream& out) {
  const Mask region = io::to_mask(io::read_png(mask_path));
  const auto t = targets::build_targets(region);
  ensure_dir(out_dir);
  const std::string s = io::stem(mask_path);
  const fs::path dir(out_dir);
  io::write_png(join(dir, s + "_edge.png"), io::mask_image(t.edge));
  io::write_png(join(dir, s + "_dist.png"), t.distance);
  io::write_f32(join(dir, s + "_dist.f32"), t.distance);
  std::size_t fg = 0, edge = 0;
  for (auto v : t.region.data) fg += v;
  for (auto v : t.edge.data) edge += v;
  out << "foreground=" << fg << " edge=" << edge << '\n';
  return kOk;
}

// --- data -----------------------------------------------------------------

struct Split {
  std::vector<train::Sample> train;
  std::vector<train::Sample> val;
};

Split load_data(const config::RunConfig& rc) {
  std::vector<train::Sample> all;
  const auto& m = rc.model;
  if (rc.data.kind == config::DataConfig::Kind::synthetic) {
    all = train::synth_dataset(rc.data.n, m.height, m.width, rc.train.seed, m.power_ratio, m.toggles.fd);
  } else {
    all = train::load_directory(rc.data.path, m.height, m.width, m.in_channels, m.power_ratio, m.toggles.fd);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(rc.data.split * static_cast<double>(all.size())));
  if (n_val >= all.size()) throw ConfigError("[data] split leaves no training samples");
  Split s;
  s.train.assign(std::make_move_iterator(all.begin()),
                 std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(n_val)));
  s.val.assign(std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(n_val)),
               std::make_move_iterator(all.end()));
  return s;
}

config::RunConfig load_run_config(const std::string& path) {
  config::RunConfig rc = config::load_config(path);
  if (const char* env = std::getenv("FREQSEG_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t pos = 0;
      rc.train.seed = std::stoull(env, &pos);
      if (pos != std::strlen(env)) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("FREQSEG_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  return rc;
}

// --- train ----------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& ckpt, const std::string& history_path,
              std::ostream& out) {
  const config::RunConfig rc = load_run_config(config_path);
  Split data = load_data(rc);
  net::Model model(rc.model, rc.train.seed);
  out << "training " << model.parameter_count() << " parameters on " << data.train.size() << " samples, "
      << rc.train.epochs << " epochs\n";
  const int every = std::max(1, rc.train.epochs / 20);
  auto progress = [&](const train::HistoryRow& row) {
    if (!row.metrics) return;
    if ((row.epoch + 1) % every != 0 && row.epoch + 1 != rc.train.epochs) return;
    out << "epoch " << row.epoch + 1 << '/' << rc.train.epochs << " step " << row.step << " loss "
        << std::setprecision(6) << row.total << " iou " << row.metrics->iou << std::endl;
  };
  auto result = train::train_loop(model, data.train, rc.train, progress);
  checkpoint::save(ckpt, model);
  write_text(history_path, result.history.to_csv());
  print_metrics(out, "train metrics", result.final_metrics);
  if (!data.val.empty()) {
    print_metrics(out, "validation metrics", train::evaluate(model, data.val, 0.5, rc.train.batch_size));
  }
  out << "checkpoint=" << ckpt << "\nhistory=" << history_path << '\n';
  return kOk;
}

// --- eval -----------------------------------------------------------------

std::vector<train::Sample> eval_data(const std::string& source, const net::ModelConfig& cfg) {
  if (source.rfind("synthetic:", 0) == 0) {
    std::stringstream ss(source.substr(10));
    std::string seed_s, n_s;
    if (!std::getline(ss, seed_s, ':') || !std::getline(ss, n_s)) {
      throw ConfigError("--data synthetic form is synthetic:<seed>:<n>");
    }
    std::uint64_t seed = 0;
    int n = 0;
    try {
      seed = std::stoull(seed_s);
      n = std::stoi(n_s);
    } catch (const std::exception&) {
      throw ConfigError("--data synthetic form is synthetic:<seed>:<n>");
    }
    if (n < 1) throw ConfigError("--data synthetic sample count must be >= 1");
    return train::synth_dataset(n, cfg.height, cfg.width, seed, cfg.power_ratio, cfg.toggles.fd);
  }
  return train::load_directory(source, cfg.height, cfg.width, cfg.in_channels, cfg.power_ratio, cfg.toggles.fd);
}

int cmd_eval(const std::string& ckpt, const std::string& data_spec, double threshold, std::string out_path,
             std::ostream& out) {
  net::Model model = checkpoint::load(ckpt);
  const auto data = eval_data(data_spec, model.config());
  const auto m = train::evaluate(model, data, threshold, 16);
  print_metrics(out, "evaluation on " + std::to_string(data.size()) + " images", m);
  out << metric_lines(m);
  if (out_path.empty()) out_path = ckpt + ".metrics";
  write_text(out_path, metric_lines(m));
  return kOk;
}

// --- gradcheck ------------------------------------------------------------

int cmd_gradcheck(double tol, std::uint64_t seed, std::ostream& out) {
  const auto checks = gradcheck_suite(tol, seed);
  bool ok = true;
  out << std::left << std::setw(22) << "check" << std::setw(28) << "parameter" << std::setw(8) << "n"
      << "max_rel_error\n";
  for (const auto& c : checks) {
    for (const auto& row : c.report.rows) {
      out << std::left << std::setw(22) << c.name << std::setw(28) << row.name << std::setw(8) << row.checked
          << std::scientific << std::setprecision(3) << row.max_rel_error << '\n';
      out.unsetf(std::ios::floatfield);
    }
    if (!c.report.passed()) ok = false;
  }
  if (!ok) {
    out << "FAILED (tol " << tol << "):";
    for (const auto& c : checks) {
      for (const auto& name : c.report.failing()) out << ' ' << c.name << '/' << name;
    }
    out << '\n';
    return kCheckFailed;
  }
  out << "all gradients within tol " << tol << '\n';
  return kOk;
}

// --- ablate ---------------------------------------------------------------

std::vector<train::AblationRow> read_rows(const std::string& source) {
  if (source == "default") return train::default_ablation_rows();
  std::ifstream in(source);
  if (!in) throw ConfigError("cannot read rows file " + source);
  std::vector<train::AblationRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    auto bad = [&]() {
      return ConfigError("rows file line " + std::to_string(lineno) + ": expected 'label = fd,gcb,mtl,faspp' with 0/1");
    };
    if (eq == std::string::npos) throw bad();
    std::string label = line.substr(0, eq);
    label.erase(0, label.find_first_not_of(" \t"));
    label.erase(label.find_last_not_of(" \t") + 1);
    std::stringstream ss(line.substr(eq + 1));
    std::array<bool, 4> flags{};
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t\r"));
      item.erase(item.find_last_not_of(" \t\r") + 1);
      if (i >= 4 || (item != "0" && item != "1")) throw bad();
      flags[i++] = item == "1";
    }
    if (i != 4 || label.empty()) throw bad();
    rows.push_back({label, net::Toggles{flags[0], flags[1], flags[2], flags[3]}});
  }
  if (rows.empty()) throw ConfigError("rows file " + source + " lists no rows");
  return rows;
}

int cmd_ablate(const std::string& config_path, const std::string& rows_spec, std::ostream& out) {
  config::RunConfig rc = load_run_config(config_path);
  const auto rows = read_rows(rows_spec);
  // Every row may need the frequency split.
  rc.model.toggles.fd = true;
  rc.model.toggles.gcb = false;
  Split data = load_data(rc);
  const auto results = train::ablation_run(rc.model, rc.train, data.train, rows);
  out << train::format_ablation_table(results);
  return kOk;
}

}  // namespace

// --- gradcheck suite -------------------------------------------------------

namespace {

Tensor random_tensor(std::mt19937_64& rng, ad::Shape s, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Values bounded away from zero so relu kinks stay outside the eps window.
Tensor away_from_zero(std::mt19937_64& rng, ad::Shape s) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

// Scalar probe mean(y * w) with fixed random weights w.
Tensor probe(Tape& tape, const Tensor& y, const Tensor& w) { return ad::mean(tape, ad::mul(tape, y, w)); }

NamedCheck unary_check(const std::string& name, std::mt19937_64& rng, ad::Shape in, ad::Shape out_shape,
                       const std::function<Tensor(Tape&, const Tensor&)>& op, const ad::GradCheckOptions& opts,
                       bool avoid_zero = false) {
  std::vector<Parameter> params{{"x", avoid_zero ? away_from_zero(rng, in) : random_tensor(rng, in)}};
  const Tensor w = random_tensor(rng, out_shape);
  auto f = [&](Tape& tape) { return probe(tape, op(tape, params[0].tensor), w); };
  return {name, ad::finite_diff_check(f, params, opts)};
}

}  // namespace

std::vector<NamedCheck> gradcheck_suite(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::GradCheckOptions opts;
  opts.tol = tol;
  opts.max_samples = 200;
  opts.seed = seed;
  std::vector<NamedCheck> checks;

  auto conv_case = [&](const std::string& name, ad::Conv2dOptions co, ad::Shape in, int cout, int k) {
    std::vector<Parameter> params{{"x", random_tensor(rng, in)},
                                  {"weight", random_tensor(rng, ad::Shape{cout, in.c, k, k})},
                                  {"bias", random_tensor(rng, ad::Shape{1, 1, 1, cout})}};
    Tape shape_tape(Tape::Mode::off);
    const ad::Shape out = ad::conv2d(shape_tape, params[0].tensor, params[1].tensor, params[2].tensor, co).shape();
    const Tensor w = random_tensor(rng, out);
    auto f = [&](Tape& tape) {
      return probe(tape, ad::conv2d(tape, params[0].tensor, params[1].tensor, params[2].tensor, co), w);
    };
    checks.push_back({name, ad::finite_diff_check(f, params, opts)});
  };
  conv_case("conv2d", {1, 1, 1}, ad::Shape{2, 3, 5, 5}, 4, 3);
  conv_case("conv2d_stride2", {2, 1, 1}, ad::Shape{2, 2, 6, 6}, 3, 3);
  conv_case("conv2d_dilated", {1, 2, 2}, ad::Shape{1, 2, 7, 7}, 2, 3);

  for (bool training : {true, false}) {
    std::vector<Parameter> params{{"x", random_tensor(rng, ad::Shape{3, 2, 3, 3})},
                                  {"gamma", random_tensor(rng, ad::Shape{1, 1, 1, 2}, 0.5, 1.5)},
                                  {"beta", random_tensor(rng, ad::Shape{1, 1, 1, 2})}};
    const Tensor w = random_tensor(rng, ad::Shape{3, 2, 3, 3});
    ad::RunningStats stats(2);
    stats.mean = {0.1f, -0.2f};
    stats.var = {0.8f, 1.3f};
    auto f = [&](Tape& tape) {
      ad::RunningStats local = stats;
      return probe(tape, ad::batchnorm2d(tape, params[0].tensor, params[1].tensor, params[2].tensor, local, training),
                   w);
    };
    checks.push_back({training ? "batchnorm2d_train" : "batchnorm2d_eval", ad::finite_diff_check(f, params, opts)});
  }

  const ad::Shape s{2, 2, 4, 4};
  checks.push_back(unary_check("relu", rng, s, s, [](Tape& t, const Tensor& x) { return ad::relu(t, x); }, opts, true));
  checks.push_back(unary_check("sigmoid", rng, s, s, [](Tape& t, const Tensor& x) { return ad::sigmoid(t, x); }, opts));
  checks.push_back(unary_check("max_pool2d", rng, s, ad::Shape{2, 2, 2, 2},
                               [](Tape& t, const Tensor& x) { return ad::max_pool2d(t, x); }, opts));
  checks.push_back(unary_check("bilinear_upsample_x2", rng, ad::Shape{1, 2, 3, 3}, ad::Shape{1, 2, 6, 6},
                               [](Tape& t, const Tensor& x) { return ad::bilinear_upsample(t, x, 2); }, opts));
  checks.push_back(unary_check("bilinear_upsample_x4", rng, ad::Shape{1, 1, 2, 3}, ad::Shape{1, 1, 8, 12},
                               [](Tape& t, const Tensor& x) { return ad::bilinear_upsample(t, x, 4); }, opts));
  checks.push_back(unary_check("one_minus", rng, s, s, [](Tape& t, const Tensor& x) { return ad::one_minus(t, x); }, opts));
  checks.push_back(unary_check("mean", rng, s, ad::Shape{}, [](Tape& t, const Tensor& x) { return ad::mean(t, x); }, opts));

  {
    std::vector<Parameter> params{{"x", random_tensor(rng, ad::Shape{2, 2, 3, 3})},
                                  {"y", random_tensor(rng, ad::Shape{2, 3, 3, 3})},
                                  {"s", random_tensor(rng, ad::Shape{})},
                                  {"gate", random_tensor(rng, ad::Shape{2, 1, 3, 3})},
                                  {"z", random_tensor(rng, ad::Shape{2, 5, 3, 3})}};
    const Tensor w = random_tensor(rng, ad::Shape{2, 5, 3, 3});
    auto f = [&](Tape& tape) {
      const std::array<Tensor, 2> parts{params[0].tensor, params[1].tensor};
      Tensor c = ad::concat_channels(tape, parts);
      Tensor g = ad::mul_channel_broadcast(tape, c, params[3].tensor);
      Tensor a = ad::add(tape, ad::scale_by_param(tape, g, params[2].tensor), ad::mul(tape, c, params[4].tensor));
      return probe(tape, a, w);
    };
    checks.push_back({"concat_add_mul_scale", ad::finite_diff_check(f, params, opts)});
  }

  {
    std::vector<Parameter> params{{"logits", random_tensor(rng, ad::Shape{2, 1, 4, 4}, -3.0, 3.0)},
                                  {"pred", random_tensor(rng, ad::Shape{2, 1, 4, 4}, 0.0, 1.0)}};
    Tensor target(ad::Shape{2, 1, 4, 4});
    Tensor dist = random_tensor(rng, ad::Shape{2, 1, 4, 4}, 0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    for (double& v : target.data()) v = coin(rng) ? 1.0 : 0.0;
    auto f = [&](Tape& tape) {
      return ad::add(tape, objective::bce_with_logits(tape, params[0].tensor, target),
                     objective::mse(tape, params[1].tensor, dist));
    };
    checks.push_back({"bce_mse", ad::finite_diff_check(f, params, opts)});
  }

  {
    net::ModelConfig cfg;
    cfg.channels = {2, 4, 8, 16};
    cfg.height = cfg.width = 16;
    net::Model model(cfg, seed);
    auto samples = train::synth_dataset(2, 16, 16, seed, cfg.power_ratio, true);
    std::vector<const Image*> full, low, high;
    std::vector<const targets::MultiTaskTargets*> tg;
    for (const auto& smp : samples) {
      full.push_back(&smp.image);
      low.push_back(&smp.low);
      high.push_back(&smp.high);
      tg.push_back(&smp.targets);
    }
    const auto inputs = net::stack_inputs(full, low, high);
    const auto targets = objective::stack_targets(tg);
    auto f = [&](Tape& tape) {
      auto outputs = model.forward(tape, inputs, true);
      return objective::total_loss(tape, outputs, targets).total_tensor;
    };
    ad::GradCheckOptions model_opts = opts;
    model_opts.max_samples = 50;
    checks.push_back({"model_total_loss", ad::finite_diff_check(f, model.parameters(), model_opts)});
  }
  return checks;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frequency-decomposition segmentation toolkit", "freqseg"};
  app.require_subcommand(1);

  std::string input, out_dir, mask, config_path, ckpt_out = "model.ckpt", history = "history.csv", ckpt, data_spec,
                                                 metrics_out, rows = "default";
  double r = 0.5, threshold = 0.5, tol = 1e-3;
  std::uint64_t gc_seed = 1;

  auto* dec = app.add_subcommand("decompose", "split an image into low/high frequency components");
  dec->add_option("--input", input, "8-bit PNG")->required();
  dec->add_option("--r", r, "power spectrum ratio in [0, 1]")->capture_default_str();
  dec->add_option("--out-dir", out_dir, "output directory")->required();

  auto* gen = app.add_subcommand("gen-targets", "edge and distance targets from a binary mask");
  gen->add_option("--mask", mask, "mask PNG (> 127 is foreground)")->required();
  gen->add_option("--out-dir", out_dir, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model from a config file");
  tr->add_option("--config", config_path, "config file")->required();
  tr->add_option("--out", ckpt_out, "checkpoint path")->capture_default_str();
  tr->add_option("--history", history, "history CSV path")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt, "checkpoint path")->required();
  ev->add_option("--data", data_spec, "dataset directory or synthetic:<seed>:<n>")->required();
  ev->add_option("--threshold", threshold, "probability threshold")->capture_default_str();
  ev->add_option("--out", metrics_out, "metrics file (default <checkpoint>.metrics)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--tol", tol, "max relative error")->capture_default_str();
  gc->add_option("--seed", gc_seed, "seed for inputs and the tiny model")->capture_default_str();

  auto* ab = app.add_subcommand("ablate", "train/evaluate the ablation rows");
  ab->add_option("--config", config_path, "base config file")->required();
  ab->add_option("--rows", rows, "'default' or a rows file")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*dec) return cmd_decompose(input, r, out_dir, out);
    if (*gen) return cmd_gen_targets(mask, out_dir, out);
    if (*tr) return cmd_train(config_path, ckpt_out, history, out);
    if (*ev) return cmd_eval(ckpt, data_spec, threshold, metrics_out, out);
    if (*gc) return cmd_gradcheck(tol, gc_seed, out);
    if (*ab) return cmd_ablate(config_path, rows, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical divergence: " << e.what() << '\n';
    return kDiverged;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kDataError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kConfigError;
}

}  // namespace freqseg::cli
