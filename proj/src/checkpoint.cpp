#include "freqseg/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "freqseg/config_file.hpp"
#include "freqseg/error.hpp"

namespace freqseg::checkpoint {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IntegrityError("checkpoint truncated");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::string str() {
    const std::uint32_t n = u32();
    const std::uint8_t* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

struct Entry {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

std::vector<Entry> collect(net::Model& model) {
  std::vector<Entry> out;
  for (const auto& p : model.parameters()) {
    Entry e{p.name, p.tensor.shape(), {}};
    for (double v : p.tensor.data()) e.values.push_back(static_cast<float>(v));
    out.push_back(std::move(e));
  }
  for (const auto& b : model.buffers()) {
    const int c = static_cast<int>(b.stats->mean.size());
    out.push_back(Entry{b.name + ".running_mean", ad::Shape{1, 1, 1, c}, b.stats->mean});
    out.push_back(Entry{b.name + ".running_var", ad::Shape{1, 1, 1, c}, b.stats->var});
  }
  return out;
}

void append_floats(Writer& w, std::vector<std::uint8_t>& payload, const std::vector<float>& values) {
  for (float f : values) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(bits), static_cast<std::uint8_t>(bits >> 8),
                               static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 24)};
    w.raw(b, 4);
    payload.insert(payload.end(), b, b + 4);
  }
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize(net::Model& model) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.bytes.push_back(kVersion);
  w.str(config::format_model_config(model.config()));
  const auto entries = collect(model);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  std::vector<std::uint8_t> payload;
  for (const auto& e : entries) {
    w.str(e.name);
    w.u32(4);
    for (int d : {e.shape.n, e.shape.c, e.shape.h, e.shape.w}) w.u32(static_cast<std::uint32_t>(d));
    append_floats(w, payload, e.values);
  }
  w.u32(crc_of(payload));
  return std::move(w.bytes);
}

net::Model deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError("not a checkpoint (bad magic)");
  }
  const std::uint8_t version = *r.take(1);
  if (version != kVersion) throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  net::ModelConfig cfg;
  try {
    cfg = config::parse_config(r.str()).model;
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("embedded config is invalid: ") + e.what());
  }
  net::Model model(cfg, 0);

  const std::uint32_t count = r.u32();
  if (count > bytes.size()) throw IntegrityError("checkpoint entry count is implausible");
  std::map<std::string, Entry> entries;
  std::vector<std::uint8_t> payload;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str();
    if (r.u32() != 4) throw IntegrityError("entry " + e.name + " is not rank 4");
    e.shape.n = static_cast<int>(r.u32());
    e.shape.c = static_cast<int>(r.u32());
    e.shape.h = static_cast<int>(r.u32());
    e.shape.w = static_cast<int>(r.u32());
    const std::size_t numel = e.shape.numel();
    if (numel * 4 > bytes.size()) throw IntegrityError("entry " + e.name + " is larger than the file");
    const std::uint8_t* p = r.take(numel * 4);
    payload.insert(payload.end(), p, p + numel * 4);
    e.values.resize(numel);
    for (std::size_t k = 0; k < numel; ++k) {
      const std::uint32_t bits = static_cast<std::uint32_t>(p[4 * k]) | (static_cast<std::uint32_t>(p[4 * k + 1]) << 8) |
                                 (static_cast<std::uint32_t>(p[4 * k + 2]) << 16) |
                                 (static_cast<std::uint32_t>(p[4 * k + 3]) << 24);
      e.values[k] = std::bit_cast<float>(bits);
    }
    if (!entries.emplace(e.name, std::move(e)).second) throw IntegrityError("duplicate checkpoint entry");
  }
  const std::uint32_t stored = r.u32();
  if (!r.done()) throw IntegrityError("trailing bytes after checkpoint checksum");
  if (stored != crc_of(payload)) throw IntegrityError("checkpoint checksum mismatch");

  auto fetch = [&](const std::string& name, const ad::Shape& shape) -> const Entry& {
    auto it = entries.find(name);
    if (it == entries.end()) throw IntegrityError("checkpoint lacks entry " + name);
    if (!(it->second.shape == shape)) {
      throw IntegrityError("checkpoint entry " + name + " has shape " + it->second.shape.str() + ", model expects " +
                           shape.str());
    }
    return it->second;
  };
  std::size_t used = 0;
  for (auto& p : model.parameters()) {
    const Entry& e = fetch(p.name, p.tensor.shape());
    auto d = p.tensor.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = e.values[k];
    ++used;
  }
  for (auto& b : model.buffers()) {
    const ad::Shape s{1, 1, 1, static_cast<int>(b.stats->mean.size())};
    b.stats->mean = fetch(b.name + ".running_mean", s).values;
    b.stats->var = fetch(b.name + ".running_var", s).values;
    used += 2;
  }
  if (used != entries.size()) throw IntegrityError("checkpoint holds entries the model does not use");
  return model;
}

void save(const std::string& path, net::Model& model) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

net::Model load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace freqseg::checkpoint
