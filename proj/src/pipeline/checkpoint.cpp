#include "satp/pipeline/checkpoint.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "satp/error.hpp"

namespace satp {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'T', 'P'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string origin)
      : b_(bytes), origin_(std::move(origin)) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b_.begin() + static_cast<long>(pos_), b_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(origin_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail("truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::uint64_t parse_u64(const std::string& s, const Reader& r, const char* key) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size()) r.fail(std::string("malformed ") + key);
    return v;
  } catch (const std::logic_error&) {
    r.fail(std::string("malformed ") + key);
  }
}

void write_tensor(Writer& w, std::uint8_t kind, const std::string& name, const Tensor& t) {
  w.u8(kind);
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape()) w.u64(d);
  for (double v : t.data()) w.f64(v);
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
  return buf;
}

void Checkpoint::set_metric(const std::string& key, double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  metadata[key] = buf;
}

std::optional<double> Checkpoint::metric(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) return std::nullopt;
  return std::stod(it->second);
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  std::map<std::string, std::string> meta = c.metadata;
  meta["stage"] = c.stage;
  meta["seed"] = std::to_string(c.seed);
  meta["epoch"] = std::to_string(c.epoch);
  meta["config_digest"] = hex64(c.config_digest);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  const auto& params = c.params.parameters();
  const auto& buffers = c.params.buffers();
  w.u32(static_cast<std::uint32_t>(params.size() + buffers.size()));
  for (const auto& [name, t] : params) write_tensor(w, 0, name, t);
  for (const auto& [name, t] : buffers) write_tensor(w, 1, name, t);
  return w.take();
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(origin + ": not a SATP checkpoint (bad magic)");
  }
  for (int k = 0; k < 4; ++k) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t k = 0; k < n_meta; ++k) {
    std::string key = r.str();
    c.metadata[key] = r.str();
  }
  for (const char* key : {"stage", "seed", "epoch", "config_digest"}) {
    if (!c.metadata.contains(key)) r.fail(std::string("missing metadata '") + key + "'");
  }
  c.stage = c.metadata.at("stage");
  c.seed = parse_u64(c.metadata.at("seed"), r, "seed");
  c.epoch = parse_u64(c.metadata.at("epoch"), r, "epoch");
  c.config_digest = parse_u64(c.metadata.at("config_digest"), r, "config_digest");
  for (const char* key : {"stage", "seed", "epoch", "config_digest"}) c.metadata.erase(key);

  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint8_t kind = r.u8();
    if (kind > 1) r.fail("unknown tensor kind");
    std::string name = r.str();
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d != 0 && numel > (bytes.size() / 8) / d) r.fail("tensor '" + name + "' is larger than the file");
      numel *= d;
    }
    std::vector<double> values(numel);
    for (auto& v : values) v = r.f64();
    Tensor t = Tensor::from(std::move(shape), std::move(values));
    if (kind == 0) {
      if (c.params.contains(name)) r.fail("duplicate tensor '" + name + "'");
      c.params.add(name, std::move(t));
    } else {
      if (c.params.contains_buffer(name)) r.fail("duplicate buffer '" + name + "'");
      c.params.add_buffer(name, std::move(t));
    }
  }
  if (!r.done()) r.fail("trailing bytes");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_digest,
                           bool allow_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint c = deserialize(bytes, path);
  if (expected_digest && *expected_digest != c.config_digest && !allow_mismatch) {
    throw DataError(path + ": config digest " + hex64(c.config_digest) + " does not match the current " +
                    hex64(*expected_digest));
  }
  return c;
}

}  // namespace satp
