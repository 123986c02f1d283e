#include "freqseg/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "freqseg/error.hpp"

namespace freqseg::config {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

double parse_double(int line, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(line, "'" + key + "' expects a number, got '" + v + "'");
  }
}

long long parse_int(int line, const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(line, "'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(int line, const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  fail(line, "'" + key + "' expects true/false, got '" + v + "'");
}

std::array<int, 4> parse_four(int line, const std::string& key, const std::string& v) {
  std::array<int, 4> out{};
  std::stringstream ss(v);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) fail(line, "'" + key + "' expects exactly 4 comma-separated integers");
    out[i++] = static_cast<int>(parse_int(line, key, trim(item)));
  }
  if (i != 4) fail(line, "'" + key + "' expects exactly 4 comma-separated integers");
  return out;
}

void parse_size(int line, const std::string& v, int& h, int& w) {
  const auto x = v.find('x');
  if (x == std::string::npos) {
    h = w = static_cast<int>(parse_int(line, "image_size", v));
  } else {
    h = static_cast<int>(parse_int(line, "image_size", trim(v.substr(0, x))));
    w = static_cast<int>(parse_int(line, "image_size", trim(v.substr(x + 1))));
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "model" && section != "train" && section != "data") {
        fail(line, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (section.empty()) fail(line, "key '" + key + "' outside of a section");

    auto& m = cfg.model;
    auto& t = cfg.train;
    auto& d = cfg.data;
    if (section == "model") {
      if (key == "channels") m.channels = parse_four(line, key, val);
      else if (key == "decoder") m.decoder = parse_four(line, key, val);
      else if (key == "aspp_rates") m.aspp_rates = parse_four(line, key, val);
      else if (key == "r") m.power_ratio = parse_double(line, key, val);
      else if (key == "fd") m.toggles.fd = parse_bool(line, key, val);
      else if (key == "gcb") m.toggles.gcb = parse_bool(line, key, val);
      else if (key == "mtl") m.toggles.mtl = parse_bool(line, key, val);
      else if (key == "faspp") m.toggles.faspp = parse_bool(line, key, val);
      else if (key == "in_channels") m.in_channels = static_cast<int>(parse_int(line, key, val));
      else fail(line, "unknown key '" + key + "' in [model]");
    } else if (section == "train") {
      if (key == "lr_max") t.lr_max = parse_double(line, key, val);
      else if (key == "lr_min") t.lr_min = parse_double(line, key, val);
      else if (key == "epochs") t.epochs = static_cast<int>(parse_int(line, key, val));
      else if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(line, key, val));
      else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(line, key, val));
      else if (key == "image_size") parse_size(line, val, m.height, m.width);
      else if (key == "hflip_prob") t.augmentation.hflip_prob = parse_double(line, key, val);
      else if (key == "rot_deg") t.augmentation.rot_deg = parse_double(line, key, val);
      else fail(line, "unknown key '" + key + "' in [train]");
    } else {
      if (key == "kind") {
        if (val == "synthetic") d.kind = DataConfig::Kind::synthetic;
        else if (val == "directory") d.kind = DataConfig::Kind::directory;
        else fail(line, "'kind' must be synthetic or directory, got '" + val + "'");
      } else if (key == "path") {
        d.path = val;
      } else if (key == "n") {
        d.n = static_cast<int>(parse_int(line, key, val));
      } else if (key == "split") {
        d.split = parse_double(line, key, val);
      } else {
        fail(line, "unknown key '" + key + "' in [data]");
      }
    }
  }
  cfg.model.validate();
  cfg.train.validate();
  if (cfg.data.n < 1) throw ConfigError("[data] n must be >= 1");
  if (!(cfg.data.split >= 0.0 && cfg.data.split < 1.0)) throw ConfigError("[data] split must lie in [0, 1)");
  if (cfg.data.kind == DataConfig::Kind::directory && cfg.data.path.empty()) {
    throw ConfigError("[data] kind = directory requires a path");
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_model_config(const net::ModelConfig& cfg) {
  auto four = [](const std::array<int, 4>& a) {
    return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + "," +
           std::to_string(a[3]);
  };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  std::ostringstream os;
  os << std::setprecision(17);
  os << "[model]\n"
     << "channels = " << four(cfg.channels) << '\n'
     << "decoder = " << four(cfg.decoder_plan()) << '\n'
     << "aspp_rates = " << four(cfg.aspp_rates) << '\n'
     << "r = " << cfg.power_ratio << '\n'
     << "fd = " << flag(cfg.toggles.fd) << '\n'
     << "gcb = " << flag(cfg.toggles.gcb) << '\n'
     << "mtl = " << flag(cfg.toggles.mtl) << '\n'
     << "faspp = " << flag(cfg.toggles.faspp) << '\n'
     << "in_channels = " << cfg.in_channels << '\n'
     << "[train]\n"
     << "image_size = " << cfg.height << 'x' << cfg.width << '\n';
  return os.str();
}

}  // namespace freqseg::config
