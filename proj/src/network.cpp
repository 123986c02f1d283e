#include "freqseg/network.hpp"

#include <cmath>
#include <random>
#include <unordered_set>

#include "freqseg/error.hpp"
#include "freqseg/spectral.hpp"

namespace freqseg::net {
namespace {

struct ConvLayer {
  Tensor weight;
  Tensor bias;
  ad::Conv2dOptions opts;

  Tensor operator()(Tape& tape, const Tensor& x) const { return ad::conv2d(tape, x, weight, bias, opts); }
};

struct BatchNormLayer {
  Tensor gamma;
  Tensor beta;
  ad::RunningStats stats;
};

struct ConvBnRelu {
  ConvLayer conv;
  BatchNormLayer bn;

  Tensor operator()(Tape& tape, const Tensor& x, bool training) {
    Tensor y = conv(tape, x);
    y = ad::batchnorm2d(tape, y, bn.gamma, bn.beta, bn.stats, training);
    return ad::relu(tape, y);
  }
};

struct EncoderBlock {
  bool pool_first = false;
  ConvBnRelu first;
  ConvBnRelu second;
};

struct Encoder {
  std::array<EncoderBlock, 4> blocks;
  // Guided residuals, only for low/high encoders.
  std::array<ConvLayer, 4> gcb;
};

struct DecoderBlock {
  bool has_skip = false;
  ConvBnRelu first;
  ConvBnRelu second;
  ConvLayer region;
  ConvLayer edge;
  ConvLayer distance;
};

// Draws float-representable Kaiming-normal weights and registers parameters.
class Builder {
 public:
  Builder(std::vector<Parameter>& params, std::uint64_t seed) : params_(params), rng_(seed) {}

  Tensor param(const std::string& name, ad::Shape shape, double fill) {
    Tensor t(shape, fill, true);
    add(name, t);
    return t;
  }

  ConvLayer conv(const std::string& name, int cin, int cout, int k, ad::Conv2dOptions opts = {}) {
    if (opts.padding == 0 && opts.stride == 1) opts.padding = ad::same_padding(k, opts.dilation);
    Tensor w(ad::Shape{cout, cin, k, k}, 0.0, true);
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& v : w.data()) v = static_cast<float>(normal(rng_));
    add(name + ".weight", w);
    return ConvLayer{w, param(name + ".bias", ad::Shape{1, 1, 1, cout}, 0.0), opts};
  }

  ConvBnRelu conv_bn_relu(const std::string& name, int cin, int cout, ad::Conv2dOptions opts = {}) {
    ConvBnRelu out;
    out.conv = conv(name + ".conv", cin, cout, 3, opts);
    out.bn.gamma = param(name + ".bn.gamma", ad::Shape{1, 1, 1, cout}, 1.0);
    out.bn.beta = param(name + ".bn.beta", ad::Shape{1, 1, 1, cout}, 0.0);
    out.bn.stats = ad::RunningStats(cout);
    return out;
  }

 private:
  void add(const std::string& name, const Tensor& t) {
    if (!names_.insert(name).second) throw ConfigError("duplicate parameter name " + name);
    params_.push_back(Parameter{name, t});
  }

  std::vector<Parameter>& params_;
  std::unordered_set<std::string> names_;
  std::mt19937_64 rng_;
};

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::full: return "full";
    case Branch::low: return "low";
    case Branch::high: return "high";
  }
  return "?";
}

}  // namespace

void ModelConfig::validate() const {
  for (int c : channels) {
    if (c < 1) throw ConfigError("model channels must be positive");
  }
  for (int c : decoder) {
    if (c < 0) throw ConfigError("decoder channels must be positive (or 0 for the default)");
  }
  for (int r : aspp_rates) {
    if (r < 1) throw ConfigError("aspp_rates must be positive");
  }
  if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0) {
    throw ConfigError("input size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by 16");
  }
  if (in_channels < 1) throw ConfigError("in_channels must be positive");
  if (!(power_ratio >= 0.0 && power_ratio <= 1.0)) {
    throw ConfigError("power ratio r must lie in [0, 1]");
  }
  if (toggles.gcb && !toggles.fd) {
    throw ConfigError("gcb = true requires fd = true (GCB connects the full encoder to low/high)");
  }
}

std::array<int, 4> ModelConfig::decoder_plan() const {
  std::array<int, 4> plan = decoder;
  for (int i = 0; i < 4; ++i) {
    if (plan[i] == 0) plan[i] = channels[3 - i];
  }
  return plan;
}

std::size_t ModelOutputs::map_count() const {
  std::size_t n = r0.defined() ? 1 : 0;
  for (const auto& b : blocks) {
    n += b.region.defined() + b.edge.defined() + b.distance.defined();
  }
  return n;
}

struct Model::Impl {
  ModelConfig cfg;
  std::vector<Parameter> params;
  std::vector<Buffer> buffers;
  Encoder full, low, high;
  std::array<ConvLayer, 4> aspp;
  ConvLayer gate;
  Tensor alpha;
  Tensor beta;
  ConvLayer sam_out;
  ConvLayer fuse;  // faspp off
  ConvLayer r0_head;
  std::array<DecoderBlock, 4> decoder;

  Impl(ModelConfig c, std::uint64_t seed) : cfg(std::move(c)) {
    cfg.validate();
    Builder b(params, seed);
    const auto& ch = cfg.channels;
    const auto dec = cfg.decoder_plan();

    auto build_encoder = [&](Encoder& enc, Branch which) {
      const std::string base = std::string("enc.") + branch_name(which) + ".";
      for (int i = 0; i < 4; ++i) {
        const int cin = (i == 0) ? cfg.in_channels : ch[i - 1];
        const std::string name = base + std::to_string(i + 1);
        EncoderBlock& blk = enc.blocks[i];
        blk.pool_first = i > 0;
        ad::Conv2dOptions first_opts;
        if (i == 0) first_opts = ad::Conv2dOptions{2, 1, 1};
        blk.first = b.conv_bn_relu(name + ".a", cin, ch[i], first_opts);
        blk.second = b.conv_bn_relu(name + ".b", ch[i], ch[i]);
      }
      if (which != Branch::full && cfg.toggles.gcb) {
        for (int i = 0; i < 4; ++i) {
          enc.gcb[i] = b.conv(std::string("gcb.") + branch_name(which) + "." + std::to_string(i + 1),
                              ch[i], ch[i], 1);
        }
      }
    };
    build_encoder(full, Branch::full);
    if (cfg.toggles.fd) {
      build_encoder(low, Branch::low);
      build_encoder(high, Branch::high);
    }

    const int xc = cfg.fusion_channels();
    if (cfg.toggles.faspp) {
      for (int i = 0; i < 4; ++i) {
        const int rate = cfg.aspp_rates[i];
        aspp[i] = b.conv("sam.aspp." + std::to_string(i), xc, xc, 3,
                         ad::Conv2dOptions{1, ad::same_padding(3, rate), rate});
      }
      gate = b.conv("sam.gate", xc, 1, 1);
      alpha = b.param("sam.alpha", ad::Shape{}, 1.0);
      beta = b.param("sam.beta", ad::Shape{}, 1.0);
      sam_out = b.conv("sam.out", 2 * xc, dec[0], 3);
    } else {
      fuse = b.conv("fuse", xc, dec[0], 1);
    }
    r0_head = b.conv("head.r0", dec[0], 1, 1);

    int prev = dec[0];
    for (int i = 0; i < 4; ++i) {
      DecoderBlock& db = decoder[i];
      const std::string name = "dec." + std::to_string(i + 1);
      db.has_skip = i < 3;
      const int cin = prev + (db.has_skip ? ch[2 - i] : 0);
      db.first = b.conv_bn_relu(name + ".a", cin, dec[i]);
      db.second = b.conv_bn_relu(name + ".b", dec[i], dec[i]);
      db.region = b.conv(name + ".region", dec[i], 1, 1);
      if (cfg.toggles.mtl) {
        db.edge = b.conv(name + ".edge", dec[i], 1, 1);
        db.distance = b.conv(name + ".distance", dec[i], 1, 1);
      }
      prev = dec[i];
    }
    register_buffers();
  }

  void register_buffers() {
    buffers.clear();
    auto add = [&](const std::string& name, ConvBnRelu& layer) {
      buffers.push_back(Buffer{name, &layer.bn.stats});
    };
    auto add_encoder = [&](Encoder& enc, Branch which) {
      for (int i = 0; i < 4; ++i) {
        const std::string name = std::string("enc.") + branch_name(which) + "." + std::to_string(i + 1);
        add(name + ".a.bn", enc.blocks[i].first);
        add(name + ".b.bn", enc.blocks[i].second);
      }
    };
    add_encoder(full, Branch::full);
    if (cfg.toggles.fd) {
      add_encoder(low, Branch::low);
      add_encoder(high, Branch::high);
    }
    for (int i = 0; i < 4; ++i) {
      const std::string name = "dec." + std::to_string(i + 1);
      add(name + ".a.bn", decoder[i].first);
      add(name + ".b.bn", decoder[i].second);
    }
  }
};

Model::Model(ModelConfig cfg, std::uint64_t seed) : impl_(std::make_unique<Impl>(std::move(cfg), seed)) {}
Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

const ModelConfig& Model::config() const { return impl_->cfg; }
std::vector<Parameter>& Model::parameters() { return impl_->params; }
const std::vector<Parameter>& Model::parameters() const { return impl_->params; }
std::vector<Buffer>& Model::buffers() { return impl_->buffers; }

Parameter& Model::parameter(const std::string& name) {
  for (auto& p : impl_->params) {
    if (p.name == name) return p;
  }
  throw ArgumentError("no parameter named " + name);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : impl_->params) n += p.tensor.numel();
  return n;
}

std::vector<Tensor> Model::encoder_forward(Tape& tape, const Tensor& image, Branch which,
                                           const std::vector<Tensor>* full_features, bool training) {
  Impl& m = *impl_;
  if (which != Branch::full && !m.cfg.toggles.fd) {
    throw ConfigError("low/high encoders exist only with fd = true");
  }
  const bool guided = which != Branch::full && m.cfg.toggles.gcb;
  if (guided && (full_features == nullptr || full_features->size() != 4)) {
    throw ConfigError(std::string("encoder '") + branch_name(which) +
                      "' needs the four full-frequency feature maps when gcb is enabled");
  }
  if (image.shape().c != m.cfg.in_channels) {
    throw ShapeError("encoder input has " + std::to_string(image.shape().c) + " channels, expected " +
                     std::to_string(m.cfg.in_channels));
  }
  Encoder& enc = which == Branch::full ? m.full : (which == Branch::low ? m.low : m.high);
  std::vector<Tensor> levels;
  Tensor x = image;
  for (int i = 0; i < 4; ++i) {
    EncoderBlock& blk = enc.blocks[i];
    if (blk.pool_first) x = ad::max_pool2d(tape, x);
    x = blk.first(tape, x, training);
    x = blk.second(tape, x, training);
    if (guided) {
      Tensor g = ad::relu(tape, enc.gcb[i](tape, (*full_features)[i]));
      x = ad::add(tape, x, g);
    }
    levels.push_back(x);
  }
  return levels;
}

Tensor Model::faspp_sam_forward(Tape& tape, const Tensor& x4_low, const Tensor& x4_full,
                                const Tensor& x4_high, Tensor* fusion_input, Tensor* attention) {
  Impl& m = *impl_;
  Tensor x;
  if (m.cfg.toggles.fd) {
    if (!(x4_low.shape() == x4_full.shape()) || !(x4_high.shape() == x4_full.shape())) {
      throw ShapeError("fusion inputs disagree: low " + x4_low.shape().str() + ", full " +
                       x4_full.shape().str() + ", high " + x4_high.shape().str());
    }
    const std::array<Tensor, 3> parts{x4_low, x4_full, x4_high};
    x = ad::concat_channels(tape, parts);
  } else {
    x = x4_full;
  }
  if (fusion_input != nullptr) *fusion_input = x;

  if (!m.cfg.toggles.faspp) return m.fuse(tape, x);

  Tensor f = m.aspp[0](tape, x);
  for (int i = 1; i < 4; ++i) f = ad::add(tape, f, m.aspp[i](tape, x));
  Tensor a = ad::sigmoid(tape, m.gate(tape, f));
  if (attention != nullptr) *attention = a;
  Tensor fg = ad::scale_by_param(tape, ad::mul_channel_broadcast(tape, x, a), m.alpha);
  Tensor bg = ad::scale_by_param(tape, ad::mul_channel_broadcast(tape, x, ad::one_minus(tape, a)), m.beta);
  const std::array<Tensor, 2> both{fg, bg};
  return m.sam_out(tape, ad::concat_channels(tape, both));
}

ModelOutputs Model::forward(Tape& tape, const ModelInputs& inputs, bool training) {
  Impl& m = *impl_;
  const ad::Shape& s = inputs.full.shape();
  if (s.h % 16 != 0 || s.w % 16 != 0) {
    throw ConfigError("input size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                      " is not divisible by 16");
  }
  ModelOutputs out;
  std::vector<Tensor> full = encoder_forward(tape, inputs.full, Branch::full, nullptr, training);
  Tensor fused;
  if (m.cfg.toggles.fd) {
    if (!inputs.low.defined() || !inputs.high.defined()) {
      throw ConfigError("fd = true requires low and high frequency inputs");
    }
    require_same_shape(inputs.low, inputs.full, "model inputs");
    require_same_shape(inputs.high, inputs.full, "model inputs");
    auto low = encoder_forward(tape, inputs.low, Branch::low, &full, training);
    auto high = encoder_forward(tape, inputs.high, Branch::high, &full, training);
    fused = faspp_sam_forward(tape, low[3], full[3], high[3], &out.fusion_input, &out.attention);
  } else {
    fused = faspp_sam_forward(tape, Tensor{}, full[3], Tensor{}, &out.fusion_input, &out.attention);
  }
  out.r0 = m.r0_head(tape, fused);

  Tensor x = fused;
  for (int i = 0; i < 4; ++i) {
    DecoderBlock& db = m.decoder[i];
    x = ad::bilinear_upsample(tape, x, 2);
    if (db.has_skip) {
      const std::array<Tensor, 2> parts{x, full[2 - i]};
      x = ad::concat_channels(tape, parts);
    }
    x = db.first(tape, x, training);
    x = db.second(tape, x, training);
    BlockOutputs& bo = out.blocks[i];
    bo.region = db.region(tape, x);
    if (m.cfg.toggles.mtl) {
      bo.edge = db.edge(tape, x);
      bo.distance = ad::sigmoid(tape, db.distance(tape, x));
    }
  }
  return out;
}

Tensor stack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw ArgumentError("cannot stack an empty batch");
  const Image& first = *images[0];
  ad::Shape s{static_cast<int>(images.size()), first.channels, first.height, first.width};
  Tensor t(s);
  auto d = t.data();
  std::size_t off = 0;
  for (const Image* img : images) {
    if (img->channels != first.channels || img->height != first.height || img->width != first.width) {
      throw ShapeError("batch images disagree in shape");
    }
    std::copy(img->data.begin(), img->data.end(), d.begin() + static_cast<std::ptrdiff_t>(off));
    off += img->data.size();
  }
  return t;
}

ModelInputs stack_inputs(const std::vector<const Image*>& full, const std::vector<const Image*>& low,
                         const std::vector<const Image*>& high) {
  ModelInputs in;
  in.full = stack_images(full);
  if (!low.empty()) in.low = stack_images(low);
  if (!high.empty()) in.high = stack_images(high);
  return in;
}

ModelInputs prepare_inputs(const std::vector<Image>& images, const ModelConfig& cfg) {
  std::vector<const Image*> full;
  for (const Image& img : images) {
    if (img.channels != cfg.in_channels) {
      throw ShapeError("image has " + std::to_string(img.channels) + " channels, model expects " +
                       std::to_string(cfg.in_channels));
    }
    full.push_back(&img);
  }
  if (!cfg.toggles.fd) return stack_inputs(full, {}, {});
  std::vector<spectral::Decomposition> parts;
  parts.reserve(images.size());
  for (const Image& img : images) {
    parts.push_back(spectral::decompose(img, spectral::PowerSpectrumRatio(cfg.power_ratio)));
  }
  std::vector<const Image*> low, high;
  for (const auto& p : parts) {
    low.push_back(&p.low);
    high.push_back(&p.high);
  }
  return stack_inputs(full, low, high);
}

std::vector<Mask> predict(const Tensor& r4, double threshold) {
  const ad::Shape& s = r4.shape();
  if (s.c != 1) throw ShapeError("predict expects single-channel logits, got " + s.str());
  std::vector<Mask> masks;
  auto d = r4.data();
  for (int n = 0; n < s.n; ++n) {
    Mask m(s.h, s.w);
    for (std::size_t i = 0; i < s.plane(); ++i) {
      m.data[i] = ad::sigmoid_scalar(d[static_cast<std::size_t>(n) * s.plane() + i]) > threshold ? 1 : 0;
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

}  // namespace freqseg::net
